#include "trajselect/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "trajselect/errors.hpp"
#include "trajselect/parallel.hpp"
#include "trajselect/rng.hpp"

namespace trajselect {

std::vector<CandidateSet> group_candidates(const Corpus& corpus) {
  std::vector<CandidateSet> sets;
  std::map<std::string, std::size_t> position;
  for (const auto& record : corpus.records) {
    auto it = position.find(record.query_id);
    if (it == position.end()) {
      const auto q = corpus.queries.find(record.query_id);
      if (q == corpus.queries.end()) {
        throw DataError("record references unknown query " + record.query_id);
      }
      it = position.emplace(record.query_id, sets.size()).first;
      sets.push_back(CandidateSet{q->second, {}, {}});
    }
    sets[it->second].candidates.push_back(record);
    sets[it->second].trajectory_scores.push_back(std::nullopt);
  }
  return sets;
}

double aggregate_mean(const std::vector<double>& step_scores) {
  if (step_scores.empty()) return 0.0;
  double sum = 0.0;
  for (const double s : step_scores) sum += s;
  return sum / static_cast<double>(step_scores.size());
}

std::size_t best_of_n(const std::vector<double>& scores) {
  if (scores.empty()) throw EmptyCandidatesError("no candidates to select");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::size_t majority_vote(
    const std::vector<std::optional<std::string>>& answers) {
  if (answers.empty()) throw EmptyCandidatesError("no candidates to vote on");

  struct Group {
    std::size_t count = 0;
    std::size_t first_index = 0;
  };
  std::map<std::string, Group> groups;
  std::vector<std::string> arrival;  // normalized keys in first-seen order
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (!answers[i]) continue;  // absent answers are not evidence
    const std::string key = normalize_answer(*answers[i]);
    auto it = groups.find(key);
    if (it == groups.end()) {
      groups.emplace(key, Group{1, i});
      arrival.push_back(key);
    } else {
      it->second.count++;
    }
  }
  if (groups.empty()) return 0;  // every candidate is absent

  std::size_t best_count = 0;
  std::size_t best_index = 0;
  for (const auto& key : arrival) {
    const Group& g = groups.at(key);
    if (g.count > best_count) {
      best_count = g.count;
      best_index = g.first_index;
    }
  }
  return best_index;
}

std::size_t random_select(std::size_t n, std::uint64_t seed,
                          const std::string& query_id) {
  if (n == 0) throw EmptyCandidatesError("no candidates to select");
  rng::Stream stream(
      rng::derive_key(seed, "random-select", rng::fnv1a(query_id)));
  return static_cast<std::size_t>(stream.next_below(n));
}

int pass_at_n(const std::vector<int>& outcomes) {
  if (outcomes.empty()) throw EmptyCandidatesError("no candidates to check");
  for (const int y : outcomes) {
    if (y == 1) return 1;
  }
  return 0;
}

double macro_average(const std::vector<BenchmarkResult>& results) {
  if (results.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : results) {
    if (r.n_total < 1) throw DataError("benchmark " + r.name + " is empty");
    sum += 100.0 * static_cast<double>(r.n_correct) /
           static_cast<double>(r.n_total);
  }
  return std::round(sum / static_cast<double>(results.size()) * 100.0) / 100.0;
}

std::vector<RankedRecord> rank_corpus(
    const std::vector<TrajectoryRecord>& records, const VerifierParams& params,
    const VerifierConfig& cfg, std::size_t k) {
  if (k > records.size()) {
    throw DataError("k = " + std::to_string(k) + " exceeds corpus size " +
                    std::to_string(records.size()));
  }
  std::vector<RankedRecord> ranked(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    std::vector<std::vector<double>> hiddens = records[i].step_hiddens;
    if (hiddens.size() > static_cast<std::size_t>(cfg.max_steps)) {
      hiddens.resize(static_cast<std::size_t>(cfg.max_steps));
    }
    ranked[i] = RankedRecord{i, score_trajectory(params, cfg, hiddens)};
  });
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedRecord& a, const RankedRecord& b) {
                     return a.score > b.score;
                   });
  ranked.resize(k);
  return ranked;
}

}  // namespace trajselect
