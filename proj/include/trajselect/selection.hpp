#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trajselect/corpus.hpp"
#include "trajselect/verifier.hpp"

namespace trajselect {

// One query's N candidates: the unit of Best-of-N selection.
struct CandidateSet {
  Query query;
  std::vector<TrajectoryRecord> candidates;
  std::vector<std::optional<double>> trajectory_scores;  // unscored = nullopt
};

struct BenchmarkResult {
  std::string name;
  int n_correct = 0;
  int n_total = 0;
};

// Groups records by query in first-appearance order.
std::vector<CandidateSet> group_candidates(const Corpus& corpus);

// Arithmetic mean; an empty step list scores 0 so unsegmentable trajectories
// never win.
double aggregate_mean(const std::vector<double>& step_scores);

// Argmax, ties broken by lowest index. Throws EmptyCandidatesError.
std::size_t best_of_n(const std::vector<double>& scores);

// Most frequent normalized answer; ties go to the group appearing first.
// Absent answers only win when every candidate is absent (then index 0).
// Returns the first index in the winning group.
std::size_t majority_vote(
    const std::vector<std::optional<std::string>>& answers);

// Uniform over [0, n), keyed by (seed, query_id) so repeated runs and
// different queries draw independently but reproducibly.
std::size_t random_select(std::size_t n, std::uint64_t seed,
                          const std::string& query_id);

// 1 iff any outcome is 1: the oracle upper bound for any selection method.
int pass_at_n(const std::vector<int>& outcomes);

// Mean over benchmarks of 100 * n_correct / n_total, rounded to 2 decimals.
double macro_average(const std::vector<BenchmarkResult>& results);

struct RankedRecord {
  std::size_t index = 0;  // position in the input list
  double score = 0.0;
};

// Scores every record (forward, p_right per step, mean) and returns the k
// highest, ties keeping original order. Requires k <= records.size().
std::vector<RankedRecord> rank_corpus(
    const std::vector<TrajectoryRecord>& records, const VerifierParams& params,
    const VerifierConfig& cfg, std::size_t k);

}  // namespace trajselect
