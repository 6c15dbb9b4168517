#include "trajselect/sampler.hpp"

#include <array>
#include <cassert>
#include <string>

#include "trajselect/errors.hpp"
#include "trajselect/parallel.hpp"
#include "trajselect/rng.hpp"

namespace trajselect {

namespace {

constexpr std::array<const char*, 24> kWords = {
    "expand",  "factor",   "substitute", "simplify", "combine", "integral",
    "modulo",  "residue",  "bound",      "estimate", "lemma",   "induction",
    "base",    "case",     "symmetry",   "product",  "sum",     "ratio",
    "triangle", "sequence", "prime",     "digit",    "root",    "fraction"};

std::string candidate_step_text(int step_index, rng::Stream& stream) {
  std::string text = "Step " + std::to_string(step_index + 1) + ": ";
  const int n_words = stream.next_int(2, 4);
  for (int w = 0; w < n_words; ++w) {
    if (w > 0) text += ' ';
    text += kWords[static_cast<std::size_t>(
        stream.next_below(kWords.size()))];
  }
  text += " gives " + std::to_string(stream.next_int(0, 99)) + ".";
  return text;
}

}  // namespace

SamplerParams make_sampler(std::uint64_t seed, int vocab_size, int d_sampler) {
  if (vocab_size < 1 || d_sampler < 1) {
    throw ConfigError("sampler dimensions must be >= 1");
  }
  SamplerParams p;
  p.vocab_size = vocab_size;
  p.d_sampler = d_sampler;
  p.seed = seed;
  p.embedding.resize(vocab_size, d_sampler);
  p.mix.resize(d_sampler, d_sampler);

  // Embeddings live in (-1, 1) so h_0 obeys the same bound the tanh
  // recurrence guarantees for every later position.
  rng::Stream embed_stream(rng::derive_key(seed, "embedding"));
  for (int r = 0; r < vocab_size; ++r) {
    for (int c = 0; c < d_sampler; ++c) {
      p.embedding(r, c) = 2.0 * embed_stream.next_unit() - 1.0;
    }
  }
  rng::Stream mix_stream(rng::derive_key(seed, "mix"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_sampler));
  for (int r = 0; r < d_sampler; ++r) {
    for (int c = 0; c < d_sampler; ++c) {
      p.mix(r, c) = scale * mix_stream.next_normal();
    }
  }
  return p;
}

std::vector<Eigen::VectorXd> encode(const SamplerParams& sampler,
                                    const std::vector<int>& token_ids) {
  std::vector<Eigen::VectorXd> hidden;
  hidden.reserve(token_ids.size());
  for (const int id : token_ids) {
    if (id < 0 || id >= sampler.vocab_size) {
      throw VocabError("token id " + std::to_string(id) +
                       " outside vocabulary of " +
                       std::to_string(sampler.vocab_size));
    }
    if (hidden.empty()) {
      hidden.emplace_back(sampler.embedding.row(id).transpose());
    } else {
      hidden.emplace_back(
          (sampler.mix * hidden.back() +
           sampler.embedding.row(id).transpose())
              .array()
              .tanh()
              .matrix());
    }
  }
  return hidden;
}

void validate(const SynthConfig& cfg) {
  if (cfg.n_queries < 1) throw ConfigError("n_queries must be >= 1");
  if (cfg.candidates_per_query < 1) throw ConfigError("candidates_per_query must be >= 1");
  if (cfg.steps_min < 1) throw ConfigError("steps_min must be >= 1");
  if (cfg.steps_max < cfg.steps_min) {
    throw ConfigError("steps_max must be >= steps_min");
  }
  if (cfg.signal_strength < 0.0) throw ConfigError("signal_strength must be >= 0");
  if (cfg.noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
  if (cfg.base_correct_rate <= 0.0 || cfg.base_correct_rate >= 1.0) {
    throw ConfigError("base_correct_rate must lie in (0, 1)");
  }
  if (cfg.d_sampler < 1) throw ConfigError("d_sampler must be >= 1");
  if (cfg.vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
}

Eigen::VectorXd signal_direction(const SynthConfig& cfg) {
  rng::Stream stream(rng::derive_key(cfg.seed, "signal-dir"));
  Eigen::VectorXd u(cfg.d_sampler);
  for (int i = 0; i < cfg.d_sampler; ++i) u[i] = stream.next_normal();
  const double norm = u.norm();
  return norm > 0.0 ? Eigen::VectorXd(u / norm) : u;
}

Corpus generate_corpus(const SynthConfig& cfg) {
  validate(cfg);
  const SamplerParams sampler = make_sampler(
      rng::derive_key(cfg.seed, "sampler"), cfg.vocab_size, cfg.d_sampler);
  const Eigen::VectorXd u = signal_direction(cfg);
  const HashTokenizer tokenizer(cfg.vocab_size);

  const std::size_t n_queries = static_cast<std::size_t>(cfg.n_queries);
  const std::size_t per_query = static_cast<std::size_t>(cfg.candidates_per_query);
  std::vector<Query> queries(n_queries);
  std::vector<TrajectoryRecord> records(n_queries * per_query);

  parallel_for(n_queries, [&](std::size_t q) {
    char id[16];
    std::snprintf(id, sizeof(id), "q%05zu", q);
    rng::Stream gold_stream(rng::derive_key(cfg.seed, "gold", q));
    const int gold_value = gold_stream.next_int(0, 999);
    Query query{id,
                "Evaluate expression #" + std::to_string(q) + ".",
                std::to_string(gold_value)};
    queries[q] = query;

    for (std::size_t c = 0; c < per_query; ++c) {
      rng::Stream draw(rng::derive_key(cfg.seed, "candidate", q, c));
      const int y = draw.next_unit() < cfg.base_correct_rate ? 1 : 0;
      const int n_steps = draw.next_int(cfg.steps_min, cfg.steps_max);

      std::vector<std::string> step_texts;
      step_texts.reserve(static_cast<std::size_t>(n_steps));
      std::string trace_text;
      for (int s = 0; s < n_steps; ++s) {
        std::string text = candidate_step_text(s, draw);
        if (s > 0) trace_text += "\n\n";
        trace_text += text;
        step_texts.push_back(std::move(text));
      }

      std::string answer_text;
      if (y == 1) {
        answer_text = "\n\nThe final answer is \\boxed{" +
                      std::to_string(gold_value) + "}.";
      } else if (draw.next_unit() < 0.1) {
        // Occasionally an unparseable response: no boxed answer at all.
        answer_text = "\n\nI could not settle on a final answer.";
      } else {
        const int wrong = (gold_value + draw.next_int(1, 3)) % 1000;
        answer_text =
            "\n\nThe final answer is \\boxed{" + std::to_string(wrong) + "}.";
      }
      const std::string raw =
          "<think>" + trace_text + "</think>" + answer_text;

      const std::vector<int> token_ids = tokenizer.tokenize(raw);
      const std::vector<std::size_t> finals = step_final_token_indices(
          token_ids, step_texts,
          [&](const std::string& s) { return tokenizer.tokenize(s); });
      const std::vector<Eigen::VectorXd> hidden = encode(sampler, token_ids);

      TrajectoryRecord record;
      record.query_id = query.id;
      record.trace.raw_text = raw;
      record.trace.answer_text = answer_text;
      for (int s = 0; s < n_steps; ++s) {
        record.trace.steps.push_back(
            StepText{step_texts[static_cast<std::size_t>(s)],
                     finals[static_cast<std::size_t>(s)]});
      }

      // The coordinate along u is replaced by the planted signal, so with
      // noise_std == 0 the two classes sit exactly at +/- signal_strength.
      rng::Stream noise(rng::derive_key(cfg.seed, "noise", q, c));
      record.step_hiddens.reserve(static_cast<std::size_t>(n_steps));
      for (int s = 0; s < n_steps; ++s) {
        Eigen::VectorXd h = hidden[finals[static_cast<std::size_t>(s)]];
        const double planted = cfg.signal_strength * (2.0 * y - 1.0) +
                               cfg.noise_std * noise.next_normal();
        h -= u.dot(h) * u;
        h += planted * u;
        record.step_hiddens.emplace_back(h.data(), h.data() + h.size());
      }

      record.extracted_answer = extract_answer(answer_text);
      record.outcome = label_outcome(record.extracted_answer, query.gold_answer);
      assert(record.outcome == y);
      records[q * per_query + c] = std::move(record);
    }
  });

  Corpus corpus;
  corpus.seed = cfg.seed;
  corpus.records = std::move(records);
  for (auto& q : queries) corpus.queries.emplace(q.id, std::move(q));
  return corpus;
}

}  // namespace trajselect
