#include "trajselect/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "trajselect/errors.hpp"
#include "trajselect/rng.hpp"

namespace trajselect {

namespace {

using nlohmann::json;

// Vocabulary used only to re-derive token alignment for records that carry no
// precomputed steps. Alignment needs a consistent tokenizer, not a specific
// vocabulary size.
constexpr int kAlignmentVocab = 4096;

std::uint64_t record_digest(const TrajectoryRecord& r) {
  std::string buf;
  buf.reserve(r.query_id.size() + r.trace.raw_text.size() + 8);
  buf += r.query_id;
  buf += '\x1f';
  buf += r.trace.raw_text;
  buf += '\x1f';
  buf += r.extracted_answer ? *r.extracted_answer : std::string("\x00", 1);
  buf += '\x1f';
  buf += static_cast<char>('0' + r.outcome);
  return rng::fnv1a(buf);
}

struct Keyed {
  std::uint64_t key;
  std::size_t index;
};

// Canonical seeded order: sort by keyed content hash, original index breaking
// ties. Independent of the incoming order, hence idempotent.
std::vector<std::size_t> canonical_order(const Corpus& corpus,
                                         std::uint64_t seed,
                                         std::string_view purpose) {
  std::vector<Keyed> keyed;
  keyed.reserve(corpus.records.size());
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    keyed.push_back(
        {rng::derive_key(seed, purpose, record_digest(corpus.records[i])), i});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    return a.key != b.key ? a.key < b.key : a.index < b.index;
  });
  std::vector<std::size_t> order;
  order.reserve(keyed.size());
  for (const auto& k : keyed) order.push_back(k.index);
  return order;
}

json record_to_json(const TrajectoryRecord& record, const Query& query) {
  json steps = json::array();
  for (const auto& s : record.trace.steps) {
    steps.push_back({{"text", s.text},
                     {"final_token_index", s.final_token_index}});
  }
  json hiddens = json::array();
  for (const auto& h : record.step_hiddens) {
    for (const double v : h) {
      if (!std::isfinite(v)) {
        throw DataError("non-finite hidden value in record for query " +
                        record.query_id);
      }
    }
    hiddens.push_back(h);
  }
  json j{{"query_id", record.query_id},
         {"query_text", query.text},
         {"response_text", record.trace.raw_text},
         {"gold_answer", query.gold_answer},
         {"step_hiddens", std::move(hiddens)},
         {"steps", std::move(steps)},
         {"outcome", record.outcome}};
  if (record.extracted_answer) {
    j["extracted_answer"] = *record.extracted_answer;
  } else {
    j["extracted_answer"] = nullptr;
  }
  return j;
}

}  // namespace

std::string normalize_answer(const std::string& raw) {
  std::string s = trim(raw);
  if (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
    s = trim(s.substr(1, s.size() - 2));
  }
  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  for (const char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out += ' ';
    in_space = false;
    out += c;
  }
  return out;
}

int label_outcome(const std::optional<std::string>& extracted,
                  const std::string& gold) {
  if (!extracted) return 0;
  return normalize_answer(*extracted) == normalize_answer(gold) ? 1 : 0;
}

Corpus shuffle_corpus(const Corpus& corpus, std::uint64_t seed) {
  Corpus out;
  out.queries = corpus.queries;
  out.seed = seed;
  for (const std::size_t i : canonical_order(corpus, seed, "shuffle")) {
    out.records.push_back(corpus.records[i]);
  }
  return out;
}

Corpus balance_downsample(const Corpus& corpus, std::uint64_t seed) {
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  for (const auto& r : corpus.records) (r.outcome == 1 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) {
    throw EmptyClassError("balance requires both classes, got " +
                          std::to_string(n_pos) + " positive / " +
                          std::to_string(n_neg) + " negative");
  }
  const int majority_label = n_pos >= n_neg ? 1 : 0;
  const std::size_t keep = std::min(n_pos, n_neg);

  // Bottom-k by keyed hash: a uniform subsample without replacement that does
  // not depend on record order.
  std::vector<Keyed> majority;
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const auto& r = corpus.records[i];
    if (r.outcome == majority_label) {
      majority.push_back(
          {rng::derive_key(seed, "balance", record_digest(r)), i});
    } else {
      selected.push_back(i);
    }
  }
  std::sort(majority.begin(), majority.end(),
            [](const Keyed& a, const Keyed& b) {
              return a.key != b.key ? a.key < b.key : a.index < b.index;
            });
  for (std::size_t i = 0; i < keep; ++i) selected.push_back(majority[i].index);

  Corpus balanced;
  balanced.queries = corpus.queries;
  balanced.seed = seed;
  balanced.records.reserve(selected.size());
  for (const std::size_t i : selected) {
    balanced.records.push_back(corpus.records[i]);
  }
  return shuffle_corpus(balanced, seed);
}

std::pair<Corpus, Corpus> split_by_query(const Corpus& corpus,
                                         double eval_fraction,
                                         std::uint64_t seed) {
  if (eval_fraction < 0.0 || eval_fraction > 1.0) {
    throw ConfigError("eval_fraction must lie in [0, 1]");
  }
  std::vector<std::string> ids;
  for (const auto& r : corpus.records) {
    if (std::find(ids.begin(), ids.end(), r.query_id) == ids.end()) {
      ids.push_back(r.query_id);
    }
  }
  rng::Stream stream(rng::derive_key(seed, "split"));
  rng::shuffle(ids, stream);
  const std::size_t n_eval =
      static_cast<std::size_t>(std::floor(eval_fraction * ids.size()));
  std::vector<std::string> eval_ids(ids.begin(), ids.begin() + n_eval);

  Corpus train;
  Corpus eval;
  train.seed = eval.seed = seed;
  for (const auto& r : corpus.records) {
    const bool in_eval = std::find(eval_ids.begin(), eval_ids.end(),
                                   r.query_id) != eval_ids.end();
    (in_eval ? eval : train).records.push_back(r);
  }
  for (const auto& [id, q] : corpus.queries) {
    const bool in_eval =
        std::find(eval_ids.begin(), eval_ids.end(), id) != eval_ids.end();
    (in_eval ? eval : train).queries.emplace(id, q);
  }
  return {std::move(train), std::move(eval)};
}

CorpusStats compute_stats(const Corpus& corpus) {
  CorpusStats stats;
  stats.n_total = corpus.records.size();
  std::size_t single = 0;
  for (const auto& r : corpus.records) {
    (r.outcome == 1 ? stats.n_pos : stats.n_neg)++;
    const std::size_t n_steps = r.trace.steps.size();
    stats.step_count_histogram[n_steps]++;
    if (n_steps == 1) ++single;
  }
  stats.single_step_fraction =
      stats.n_total == 0 ? 0.0
                         : static_cast<double>(single) /
                               static_cast<double>(stats.n_total);
  return stats;
}

Corpus load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  const HashTokenizer tokenizer(kAlignmentVocab);
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw SchemaError(line_no, e.what());
    }
    try {
      TrajectoryRecord record;
      record.query_id = j.at("query_id").get<std::string>();
      const auto response_text = j.at("response_text").get<std::string>();
      const auto gold = j.at("gold_answer").get<std::string>();
      record.step_hiddens =
          j.at("step_hiddens").get<std::vector<std::vector<double>>>();

      if (j.contains("steps")) {
        record.trace.raw_text = response_text;
        auto [trace_text, answer_text] = extract_think_span(response_text);
        record.trace.answer_text = std::move(answer_text);
        for (const auto& js : j.at("steps")) {
          record.trace.steps.push_back(
              StepText{js.at("text").get<std::string>(),
                       js.at("final_token_index").get<std::size_t>()});
        }
      } else {
        record.trace = parse_trace(response_text, tokenizer);
      }

      if (j.contains("extracted_answer")) {
        const auto& e = j.at("extracted_answer");
        record.extracted_answer =
            e.is_null() ? std::nullopt
                        : std::optional<std::string>(e.get<std::string>());
      } else {
        record.extracted_answer = extract_answer(record.trace.answer_text);
      }
      record.outcome = j.contains("outcome")
                           ? j.at("outcome").get<int>()
                           : label_outcome(record.extracted_answer, gold);
      if (record.outcome != 0 && record.outcome != 1) {
        throw DataError("outcome must be 0 or 1");
      }

      if (record.step_hiddens.size() != record.trace.steps.size()) {
        throw DataError("step_hiddens count " +
                        std::to_string(record.step_hiddens.size()) +
                        " does not match step count " +
                        std::to_string(record.trace.steps.size()));
      }
      const std::size_t dim =
          record.step_hiddens.empty() ? 0 : record.step_hiddens.front().size();
      for (const auto& h : record.step_hiddens) {
        if (h.size() != dim) throw DataError("ragged step_hiddens");
        for (const double v : h) {
          if (!std::isfinite(v)) throw DataError("non-finite hidden value");
        }
      }

      Query query{record.query_id,
                  j.contains("query_text")
                      ? j.at("query_text").get<std::string>()
                      : record.query_id,
                  gold};
      const auto found = corpus.queries.find(query.id);
      if (found == corpus.queries.end()) {
        corpus.queries.emplace(query.id, query);
      } else if (found->second.gold_answer != query.gold_answer) {
        throw DataError("conflicting gold_answer for query " + query.id);
      }
      corpus.records.push_back(std::move(record));
    } catch (const SchemaError&) {
      throw;
    } catch (const json::exception& e) {
      throw SchemaError(line_no, e.what());
    } catch (const DataError& e) {
      throw SchemaError(line_no, e.what());
    }
  }
  return corpus;
}

void save_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const auto& record : corpus.records) {
    const auto q = corpus.queries.find(record.query_id);
    if (q == corpus.queries.end()) {
      throw DataError("record references unknown query " + record.query_id);
    }
    out << record_to_json(record, q->second).dump() << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace trajselect
