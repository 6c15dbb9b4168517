#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trajselect/trace.hpp"

namespace trajselect {

struct Corpus {
  std::vector<TrajectoryRecord> records;
  std::map<std::string, Query> queries;
  std::uint64_t seed = 0;
};

struct CorpusStats {
  std::size_t n_total = 0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::map<std::size_t, std::size_t> step_count_histogram;
  // Traces the sampler emitted without any "\n\n" end up as one step; the
  // fraction is reported so degenerate corpora are visible.
  double single_step_fraction = 0.0;
};

// Trim, collapse internal whitespace runs to one space, strip one surrounding
// $ pair.
std::string normalize_answer(const std::string& raw);

// 1 iff normalized answers match; an absent answer never matches.
int label_outcome(const std::optional<std::string>& extracted,
                  const std::string& gold);

// Keeps all records of the minority class and downsamples the majority class
// to a 1:1 ratio, uniformly without replacement. The result is in canonical
// seeded order (see shuffle_corpus), which makes the operation idempotent for
// a fixed seed. Throws EmptyClassError when either class is empty.
Corpus balance_downsample(const Corpus& corpus, std::uint64_t seed);

// Reorders records by a seeded hash of their content: a fixed permutation per
// seed, independent of the incoming order.
Corpus shuffle_corpus(const Corpus& corpus, std::uint64_t seed);

// Splits whole candidate sets: queries are assigned to the eval side with the
// given fraction. Applied after balancing/shuffling when a holdout is wanted.
std::pair<Corpus, Corpus> split_by_query(const Corpus& corpus,
                                         double eval_fraction,
                                         std::uint64_t seed);

CorpusStats compute_stats(const Corpus& corpus);

// JSONL, one record per line. Required fields: query_id, response_text,
// step_hiddens, gold_answer. Derived fields (steps, extracted_answer,
// outcome) and query_text are written back on save and reused on load when
// present. Throws SchemaError with the 1-based line number.
Corpus load_jsonl(const std::filesystem::path& path);
void save_jsonl(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace trajselect
