#include "trajselect/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "trajselect/errors.hpp"
#include "trajselect/parallel.hpp"
#include "trajselect/rng.hpp"

namespace trajselect {

namespace {

using nlohmann::json;

const std::vector<std::string> kMethodOrder = {"trajselector", "majority",
                                               "random", "oracle"};

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

void reject_unknown_keys(const json& j, const std::string& scope,
                         const std::vector<std::string>& known) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown key \"" + key + "\" in " + scope);
    }
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad value for ") + key + ": " + e.what());
    }
  }
}

std::filesystem::path ensure_output_dir(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output dir " + dir.string());
  return dir;
}

std::filesystem::path write_resolved_config(const RunConfig& cfg) {
  const auto dir = ensure_output_dir(cfg);
  const auto path = dir / ("config_" + config_hash(cfg) + ".json");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << resolved_config_json(cfg) << '\n';
  return path;
}

Corpus load_corpus_checked(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError("corpus file not found: " + path.string());
  }
  return load_jsonl(path);
}

std::string benchmark_name(int bucket) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "synth-%02d", bucket);
  return buf;
}

std::vector<std::vector<double>> clipped_hiddens(const TrajectoryRecord& r,
                                                 int max_steps) {
  std::vector<std::vector<double>> h = r.step_hiddens;
  if (h.size() > static_cast<std::size_t>(max_steps)) {
    h.resize(static_cast<std::size_t>(max_steps));
  }
  return h;
}

}  // namespace

Method method_from_string(const std::string& name) {
  if (name == "trajselector") return Method::trajselector;
  if (name == "majority") return Method::majority;
  if (name == "random") return Method::random;
  if (name == "oracle") return Method::oracle;
  throw ConfigError("unknown method: " + name);
}

std::string to_string(Method method) {
  switch (method) {
    case Method::trajselector: return "trajselector";
    case Method::majority: return "majority";
    case Method::random: return "random";
    case Method::oracle: return "oracle";
  }
  throw ConfigError("unreachable method value");
}

void validate(const RunConfig& cfg) {
  validate(cfg.verifier);
  validate(cfg.train);
  validate(cfg.synth);
  if (cfg.synth.d_sampler != cfg.verifier.d_sampler) {
    throw ConfigError("synth.d_sampler must match verifier.d_sampler");
  }
  const int wanted = cfg.train.loss_kind == LossKind::buffer ? 3 : 2;
  if (cfg.verifier.n_score_classes != wanted) {
    throw ConfigError("loss " + to_string(cfg.train.loss_kind) +
                      " needs n_score_classes = " + std::to_string(wanted));
  }
  if (cfg.n_values.empty()) throw ConfigError("n_values must not be empty");
  for (const int n : cfg.n_values) {
    if (n < 1) throw ConfigError("n_values entries must be >= 1");
  }
  if (cfg.n_benchmarks < 1) throw ConfigError("n_benchmarks must be >= 1");
  if (cfg.rank_k < 0) throw ConfigError("rank_k must be >= 0");
  if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }

  reject_unknown_keys(j, "config",
                      {"verifier", "train", "synth", "method", "n_values",
                       "output_dir", "n_benchmarks", "rank_k"});
  RunConfig cfg;
  bool explicit_classes = false;
  if (j.contains("verifier")) {
    const auto& jv = j.at("verifier");
    reject_unknown_keys(jv, "verifier",
                        {"d_sampler", "d_model", "n_layers", "n_heads",
                         "d_head_hidden", "max_steps", "n_score_classes"});
    read_field(jv, "d_sampler", cfg.verifier.d_sampler);
    read_field(jv, "d_model", cfg.verifier.d_model);
    read_field(jv, "n_layers", cfg.verifier.n_layers);
    read_field(jv, "n_heads", cfg.verifier.n_heads);
    read_field(jv, "d_head_hidden", cfg.verifier.d_head_hidden);
    read_field(jv, "max_steps", cfg.verifier.max_steps);
    explicit_classes = jv.contains("n_score_classes");
    read_field(jv, "n_score_classes", cfg.verifier.n_score_classes);
  }
  if (j.contains("train")) {
    const auto& jt = j.at("train");
    reject_unknown_keys(jt, "train",
                        {"learning_rate", "epochs", "weight_decay",
                         "batch_size", "grad_accum", "adam_beta1",
                         "adam_beta2", "adam_eps", "seed", "loss"});
    read_field(jt, "learning_rate", cfg.train.learning_rate);
    read_field(jt, "epochs", cfg.train.epochs);
    read_field(jt, "weight_decay", cfg.train.weight_decay);
    read_field(jt, "batch_size", cfg.train.batch_size);
    read_field(jt, "grad_accum", cfg.train.grad_accum);
    read_field(jt, "adam_beta1", cfg.train.adam_beta1);
    read_field(jt, "adam_beta2", cfg.train.adam_beta2);
    read_field(jt, "adam_eps", cfg.train.adam_eps);
    read_field(jt, "seed", cfg.train.seed);
    if (jt.contains("loss")) {
      cfg.train.loss_kind =
          loss_kind_from_string(jt.at("loss").get<std::string>());
    }
  }
  if (j.contains("synth")) {
    const auto& js = j.at("synth");
    reject_unknown_keys(js, "synth",
                        {"n_queries", "candidates_per_query", "steps_min",
                         "steps_max", "signal_strength", "noise_std",
                         "base_correct_rate", "d_sampler", "vocab_size",
                         "seed"});
    read_field(js, "n_queries", cfg.synth.n_queries);
    read_field(js, "candidates_per_query", cfg.synth.candidates_per_query);
    read_field(js, "steps_min", cfg.synth.steps_min);
    read_field(js, "steps_max", cfg.synth.steps_max);
    read_field(js, "signal_strength", cfg.synth.signal_strength);
    read_field(js, "noise_std", cfg.synth.noise_std);
    read_field(js, "base_correct_rate", cfg.synth.base_correct_rate);
    read_field(js, "vocab_size", cfg.synth.vocab_size);
    read_field(js, "seed", cfg.synth.seed);
    if (js.contains("d_sampler")) {
      read_field(js, "d_sampler", cfg.synth.d_sampler);
    } else {
      cfg.synth.d_sampler = cfg.verifier.d_sampler;
    }
  } else {
    cfg.synth.d_sampler = cfg.verifier.d_sampler;
  }
  if (j.contains("method")) {
    cfg.method = method_from_string(j.at("method").get<std::string>());
  }
  read_field(j, "n_values", cfg.n_values);
  read_field(j, "output_dir", cfg.output_dir);
  read_field(j, "n_benchmarks", cfg.n_benchmarks);
  read_field(j, "rank_k", cfg.rank_k);

  // The head width follows the loss unless pinned explicitly.
  if (!explicit_classes) {
    cfg.verifier.n_score_classes =
        cfg.train.loss_kind == LossKind::buffer ? 3 : 2;
  }
  validate(cfg);
  return cfg;
}

std::string resolved_config_json(const RunConfig& cfg) {
  json j;
  j["verifier"] = {{"d_sampler", cfg.verifier.d_sampler},
                   {"d_model", cfg.verifier.d_model},
                   {"n_layers", cfg.verifier.n_layers},
                   {"n_heads", cfg.verifier.n_heads},
                   {"d_head_hidden", cfg.verifier.d_head_hidden},
                   {"max_steps", cfg.verifier.max_steps},
                   {"n_score_classes", cfg.verifier.n_score_classes}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"epochs", cfg.train.epochs},
                {"weight_decay", cfg.train.weight_decay},
                {"batch_size", cfg.train.batch_size},
                {"grad_accum", cfg.train.grad_accum},
                {"adam_beta1", cfg.train.adam_beta1},
                {"adam_beta2", cfg.train.adam_beta2},
                {"adam_eps", cfg.train.adam_eps},
                {"seed", cfg.train.seed},
                {"loss", to_string(cfg.train.loss_kind)}};
  j["synth"] = {{"n_queries", cfg.synth.n_queries},
                {"candidates_per_query", cfg.synth.candidates_per_query},
                {"steps_min", cfg.synth.steps_min},
                {"steps_max", cfg.synth.steps_max},
                {"signal_strength", cfg.synth.signal_strength},
                {"noise_std", cfg.synth.noise_std},
                {"base_correct_rate", cfg.synth.base_correct_rate},
                {"d_sampler", cfg.synth.d_sampler},
                {"vocab_size", cfg.synth.vocab_size},
                {"seed", cfg.synth.seed}};
  j["method"] = to_string(cfg.method);
  j["n_values"] = cfg.n_values;
  j["output_dir"] = cfg.output_dir;
  j["n_benchmarks"] = cfg.n_benchmarks;
  j["rank_k"] = cfg.rank_k;
  return j.dump(2);
}

std::string config_hash(const RunConfig& cfg) {
  const std::uint64_t h = rng::fnv1a(resolved_config_json(cfg));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

EvalReport evaluate(const Corpus& corpus, const VerifierParams& params,
                    const VerifierConfig& vcfg,
                    const std::vector<int>& n_values,
                    std::uint64_t selection_seed, int n_benchmarks) {
  const std::vector<CandidateSet> sets = group_candidates(corpus);
  if (sets.empty()) throw DataError("corpus has no candidate sets");

  // Score every candidate once; prefix sweeps reuse these.
  std::vector<std::vector<double>> scores(sets.size());
  parallel_for(sets.size(), [&](std::size_t s) {
    scores[s].resize(sets[s].candidates.size());
    for (std::size_t c = 0; c < sets[s].candidates.size(); ++c) {
      scores[s][c] = score_trajectory(
          params, vcfg, clipped_hiddens(sets[s].candidates[c], vcfg.max_steps));
    }
  });

  EvalReport report;
  for (const int n : n_values) {
    struct Counts {
      std::vector<int> correct;
      std::vector<int> total;
    };
    std::vector<Counts> by_method(kMethodOrder.size());
    for (auto& c : by_method) {
      c.correct.assign(static_cast<std::size_t>(n_benchmarks), 0);
      c.total.assign(static_cast<std::size_t>(n_benchmarks), 0);
    }
    std::size_t eligible = 0;
    for (std::size_t s = 0; s < sets.size(); ++s) {
      const CandidateSet& set = sets[s];
      if (set.candidates.size() < static_cast<std::size_t>(n)) continue;
      ++eligible;
      const std::size_t bucket = s % static_cast<std::size_t>(n_benchmarks);
      const std::size_t prefix = static_cast<std::size_t>(n);

      std::vector<int> outcomes(prefix);
      std::vector<std::optional<std::string>> answers(prefix);
      std::vector<double> prefix_scores(prefix);
      for (std::size_t c = 0; c < prefix; ++c) {
        outcomes[c] = set.candidates[c].outcome;
        answers[c] = set.candidates[c].extracted_answer;
        prefix_scores[c] = scores[s][c];
      }

      for (std::size_t m = 0; m < kMethodOrder.size(); ++m) {
        int correct = 0;
        if (kMethodOrder[m] == "trajselector") {
          correct = outcomes[best_of_n(prefix_scores)];
        } else if (kMethodOrder[m] == "majority") {
          correct = outcomes[majority_vote(answers)];
        } else if (kMethodOrder[m] == "random") {
          correct = outcomes[random_select(prefix, selection_seed,
                                           set.query.id)];
        } else {
          correct = pass_at_n(outcomes);
        }
        by_method[m].correct[bucket] += correct;
        by_method[m].total[bucket] += 1;
      }
    }

    if (eligible == 0) {
      report.skipped_n.push_back(n);
      continue;
    }
    for (std::size_t m = 0; m < kMethodOrder.size(); ++m) {
      int correct = 0;
      int total = 0;
      BenchmarkTable table{kMethodOrder[m], n, {}};
      for (int b = 0; b < n_benchmarks; ++b) {
        const int bc = by_method[m].correct[static_cast<std::size_t>(b)];
        const int bt = by_method[m].total[static_cast<std::size_t>(b)];
        correct += bc;
        total += bt;
        if (bt > 0) {
          table.rows.push_back(BenchmarkResult{benchmark_name(b), bc, bt});
        }
      }
      report.rows.push_back(EvalRow{
          kMethodOrder[m], n,
          100.0 * static_cast<double>(correct) / static_cast<double>(total)});
      report.tables.push_back(std::move(table));
    }
  }
  return report;
}

SynthOutputs cmd_synth(const RunConfig& cfg) {
  validate(cfg);
  const auto dir = ensure_output_dir(cfg);
  const std::string hash = config_hash(cfg);

  const Corpus corpus = generate_corpus(cfg.synth);
  const CorpusStats stats = compute_stats(corpus);

  SynthOutputs out;
  out.corpus = dir / ("corpus_" + hash + ".jsonl");
  save_jsonl(corpus, out.corpus);

  json js;
  js["n_total"] = stats.n_total;
  js["n_pos"] = stats.n_pos;
  js["n_neg"] = stats.n_neg;
  js["single_step_fraction"] = stats.single_step_fraction;
  json hist = json::array();
  for (const auto& [steps, count] : stats.step_count_histogram) {
    hist.push_back({steps, count});
  }
  js["step_count_histogram"] = std::move(hist);
  out.stats = dir / ("stats_" + hash + ".json");
  std::ofstream stats_file(out.stats, std::ios::binary);
  if (!stats_file) throw DataError("cannot write " + out.stats.string());
  stats_file << js.dump(2) << '\n';

  out.config = write_resolved_config(cfg);
  return out;
}

TrainOutputs cmd_train(const RunConfig& cfg,
                       const std::filesystem::path& corpus_path) {
  validate(cfg);
  const auto dir = ensure_output_dir(cfg);
  const std::string hash = config_hash(cfg);

  const Corpus corpus = load_corpus_checked(corpus_path);
  const Corpus balanced = balance_downsample(corpus, cfg.train.seed);
  TrainResult result = train(balanced, cfg.train, cfg.verifier);

  TrainOutputs out;
  out.checkpoint = dir / ("checkpoint_" + hash + ".json");
  save_checkpoint(result.params, cfg.verifier, out.checkpoint);

  out.log = dir / ("train_log_" + hash + ".csv");
  std::ofstream log(out.log, std::ios::binary);
  if (!log) throw DataError("cannot write " + out.log.string());
  log << "step,epoch,loss,grad_norm,wall_ms\n";
  for (const auto& row : result.log) {
    log << row.step << ',' << row.epoch << ','
        << format_double("%.10g", row.loss) << ','
        << format_double("%.10g", row.grad_norm) << ','
        << format_double("%.3f", row.wall_ms) << '\n';
  }

  out.config = write_resolved_config(cfg);
  return out;
}

std::filesystem::path cmd_score(const RunConfig& cfg,
                                const std::filesystem::path& corpus_path,
                                const std::filesystem::path& checkpoint_path) {
  validate(cfg);
  const auto dir = ensure_output_dir(cfg);
  const std::string hash = config_hash(cfg);

  const Corpus corpus = load_corpus_checked(corpus_path);
  const auto [params, vcfg] = load_checkpoint(checkpoint_path);

  std::vector<double> scores(corpus.records.size());
  parallel_for(corpus.records.size(), [&](std::size_t i) {
    scores[i] = score_trajectory(
        params, vcfg, clipped_hiddens(corpus.records[i], vcfg.max_steps));
  });

  const auto path = dir / ("scores_" + hash + ".csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "record_index,query_id,outcome,trajectory_score\n";
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    out << i << ',' << corpus.records[i].query_id << ','
        << corpus.records[i].outcome << ','
        << format_double("%.10g", scores[i]) << '\n';
  }
  write_resolved_config(cfg);
  return path;
}

std::filesystem::path cmd_select(const RunConfig& cfg,
                                 const std::filesystem::path& corpus_path,
                                 const std::filesystem::path& checkpoint_path) {
  validate(cfg);
  const auto dir = ensure_output_dir(cfg);
  const std::string hash = config_hash(cfg);

  const Corpus corpus = load_corpus_checked(corpus_path);
  const std::vector<CandidateSet> sets = group_candidates(corpus);

  VerifierParams params;
  VerifierConfig vcfg = cfg.verifier;
  if (cfg.method == Method::trajselector) {
    std::tie(params, vcfg) = load_checkpoint(checkpoint_path);
  }

  const auto path = dir / ("selections_" + hash + ".csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "query_id,method,selected_index,selected_outcome\n";
  for (const auto& set : sets) {
    const std::size_t n = set.candidates.size();
    std::size_t chosen = 0;
    int outcome = 0;
    switch (cfg.method) {
      case Method::trajselector: {
        std::vector<double> scores(n);
        for (std::size_t c = 0; c < n; ++c) {
          scores[c] = score_trajectory(
              params, vcfg, clipped_hiddens(set.candidates[c], vcfg.max_steps));
        }
        chosen = best_of_n(scores);
        outcome = set.candidates[chosen].outcome;
        break;
      }
      case Method::majority: {
        std::vector<std::optional<std::string>> answers(n);
        for (std::size_t c = 0; c < n; ++c) {
          answers[c] = set.candidates[c].extracted_answer;
        }
        chosen = majority_vote(answers);
        outcome = set.candidates[chosen].outcome;
        break;
      }
      case Method::random: {
        chosen = random_select(n, cfg.train.seed, set.query.id);
        outcome = set.candidates[chosen].outcome;
        break;
      }
      case Method::oracle: {
        // First correct candidate, if any.
        chosen = 0;
        for (std::size_t c = 0; c < n; ++c) {
          if (set.candidates[c].outcome == 1) {
            chosen = c;
            break;
          }
        }
        outcome = set.candidates[chosen].outcome;
        break;
      }
    }
    out << set.query.id << ',' << to_string(cfg.method) << ',' << chosen << ','
        << outcome << '\n';
  }
  write_resolved_config(cfg);
  return path;
}

EvalOutputs cmd_eval(const RunConfig& cfg,
                     const std::filesystem::path& corpus_path,
                     const std::filesystem::path& checkpoint_path) {
  validate(cfg);
  const auto dir = ensure_output_dir(cfg);
  const std::string hash = config_hash(cfg);

  const Corpus corpus = load_corpus_checked(corpus_path);
  const auto [params, vcfg] = load_checkpoint(checkpoint_path);
  const EvalReport report = evaluate(corpus, params, vcfg, cfg.n_values,
                                     cfg.train.seed, cfg.n_benchmarks);

  EvalOutputs out;
  out.results = dir / ("results_" + hash + ".csv");
  std::ofstream results(out.results, std::ios::binary);
  if (!results) throw DataError("cannot write " + out.results.string());
  results << "method,n,accuracy_pct\n";
  for (const int n : report.skipped_n) {
    results << "# skipped n=" << n << ": no query has that many candidates\n";
  }
  for (const auto& row : report.rows) {
    results << row.method << ',' << row.n << ','
            << format_double("%.2f", row.accuracy_pct) << '\n';
  }

  for (const auto& table : report.tables) {
    const auto path = dir / ("benchmarks_" + hash + "_" + table.method + "_n" +
                             std::to_string(table.n) + ".csv");
    std::ofstream bench(path, std::ios::binary);
    if (!bench) throw DataError("cannot write " + path.string());
    bench << "benchmark,n_correct,n_total\n";
    for (const auto& row : table.rows) {
      bench << row.name << ',' << row.n_correct << ',' << row.n_total << '\n';
    }
    out.benchmark_tables.push_back(path);
  }

  // Stdout summary in the per-benchmark-columns layout.
  for (const int n : cfg.n_values) {
    bool any = false;
    for (const auto& row : report.rows) {
      if (row.n == n) any = true;
    }
    if (!any) continue;
    std::cout << "Best-of-" << n << ":\n";
    for (const auto& table : report.tables) {
      if (table.n != n) continue;
      std::cout << "  " << table.method << ":";
      for (const auto& row : table.rows) {
        std::cout << ' ' << row.name << '=' << row.n_correct << '/'
                  << row.n_total;
      }
      std::cout << " avg=" << format_double("%.2f", macro_average(table.rows))
                << "%\n";
    }
  }
  for (const int n : report.skipped_n) {
    std::cout << "skipped n=" << n << " (not enough candidates)\n";
  }

  out.config = write_resolved_config(cfg);
  return out;
}

std::filesystem::path cmd_rank(const RunConfig& cfg,
                               const std::filesystem::path& corpus_path,
                               const std::filesystem::path& checkpoint_path) {
  validate(cfg);
  const auto dir = ensure_output_dir(cfg);
  const std::string hash = config_hash(cfg);

  const Corpus corpus = load_corpus_checked(corpus_path);
  const auto [params, vcfg] = load_checkpoint(checkpoint_path);
  const std::size_t k = std::min(static_cast<std::size_t>(cfg.rank_k),
                                 corpus.records.size());
  const auto ranked = rank_corpus(corpus.records, params, vcfg, k);

  const auto path = dir / ("rank_" + hash + ".csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "rank,record_index,query_id,outcome,score\n";
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& record = corpus.records[ranked[r].index];
    out << r << ',' << ranked[r].index << ',' << record.query_id << ','
        << record.outcome << ',' << format_double("%.10g", ranked[r].score)
        << '\n';
  }
  write_resolved_config(cfg);
  return path;
}

GradCheckReport cmd_gradcheck(const RunConfig& cfg) {
  validate(cfg);
  const VerifierParams params = init_params(cfg.verifier, cfg.train.seed);

  // A small synthetic batch; gradient checking probes the math, not the data.
  rng::Stream stream(rng::derive_key(cfg.train.seed, "gradcheck-batch"));
  std::vector<TrainExample> batch;
  for (int b = 0; b < 2; ++b) {
    TrainExample ex;
    ex.outcome = b % 2;
    const int t_steps = 3 + 2 * b;
    ex.hiddens.resize(t_steps, cfg.verifier.d_sampler);
    for (Eigen::Index i = 0; i < ex.hiddens.rows(); ++i) {
      for (Eigen::Index j = 0; j < ex.hiddens.cols(); ++j) {
        ex.hiddens(i, j) = 2.0 * stream.next_normal();
      }
    }
    batch.push_back(std::move(ex));
  }
  const GradCheckReport report =
      grad_check(params, cfg.verifier, batch, cfg.train.loss_kind, 1e-4, 50,
                 cfg.train.seed);
  std::cout << "gradcheck: max_rel_error="
            << format_double("%.3g", report.max_rel_error) << " over "
            << report.n_coords << " coordinates (worst " << report.worst_tensor
            << ")\n";
  return report;
}

std::vector<EvalRow> load_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "method,n,accuracy_pct") {
    throw DataError("unexpected results header in " + path.string());
  }
  std::vector<EvalRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    EvalRow row;
    std::string field;
    if (!std::getline(ss, row.method, ',')) continue;
    if (!std::getline(ss, field, ',')) {
      throw DataError("bad results row: " + line);
    }
    row.n = std::stoi(field);
    if (!std::getline(ss, field, ',')) {
      throw DataError("bad results row: " + line);
    }
    row.accuracy_pct = std::stod(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<BenchmarkResult> load_benchmark_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "benchmark,n_correct,n_total") {
    throw DataError("unexpected benchmark header in " + path.string());
  }
  std::vector<BenchmarkResult> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    BenchmarkResult row;
    std::string field;
    if (!std::getline(ss, row.name, ',')) continue;
    if (!std::getline(ss, field, ',')) {
      throw DataError("bad benchmark row: " + line);
    }
    row.n_correct = std::stoi(field);
    if (!std::getline(ss, field, ',')) {
      throw DataError("bad benchmark row: " + line);
    }
    row.n_total = std::stoi(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace trajselect
