#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trajselect/corpus.hpp"
#include "trajselect/sampler.hpp"
#include "trajselect/selection.hpp"
#include "trajselect/training.hpp"
#include "trajselect/verifier.hpp"

namespace trajselect {

enum class Method { trajselector, majority, random, oracle };

Method method_from_string(const std::string& name);
std::string to_string(Method method);

// Everything that affects results lives here; the CLI only picks the
// subcommand and file paths. Each command writes the resolved config next to
// its outputs and stamps its hash into every output filename.
struct RunConfig {
  VerifierConfig verifier;
  TrainConfig train;
  SynthConfig synth;
  Method method = Method::trajselector;
  std::vector<int> n_values = {1, 2, 4, 8};
  std::string output_dir = "out";
  int n_benchmarks = 4;
  int rank_k = 10;
};

RunConfig load_run_config(const std::filesystem::path& path);
void validate(const RunConfig& cfg);
std::string resolved_config_json(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);  // 16 hex characters

struct EvalRow {
  std::string method;
  int n = 0;
  double accuracy_pct = 0.0;
};

struct BenchmarkTable {
  std::string method;
  int n = 0;
  std::vector<BenchmarkResult> rows;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<BenchmarkTable> tables;
  std::vector<int> skipped_n;
};

// Scores every candidate once, then sweeps the prefix sizes in n_values: all
// four methods per n, plus per-benchmark counts (queries are bucketed
// round-robin into n_benchmarks synthetic benchmarks). Queries with fewer
// than n candidates are left out of that n; an n no query satisfies is
// recorded in skipped_n.
EvalReport evaluate(const Corpus& corpus, const VerifierParams& params,
                    const VerifierConfig& vcfg,
                    const std::vector<int>& n_values,
                    std::uint64_t selection_seed, int n_benchmarks);

struct SynthOutputs {
  std::filesystem::path corpus;
  std::filesystem::path stats;
  std::filesystem::path config;
};

struct TrainOutputs {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  std::filesystem::path config;
};

struct EvalOutputs {
  std::filesystem::path results;
  std::vector<std::filesystem::path> benchmark_tables;
  std::filesystem::path config;
};

SynthOutputs cmd_synth(const RunConfig& cfg);
TrainOutputs cmd_train(const RunConfig& cfg,
                       const std::filesystem::path& corpus_path);
std::filesystem::path cmd_score(const RunConfig& cfg,
                                const std::filesystem::path& corpus_path,
                                const std::filesystem::path& checkpoint_path);
std::filesystem::path cmd_select(const RunConfig& cfg,
                                 const std::filesystem::path& corpus_path,
                                 const std::filesystem::path& checkpoint_path);
EvalOutputs cmd_eval(const RunConfig& cfg,
                     const std::filesystem::path& corpus_path,
                     const std::filesystem::path& checkpoint_path);
std::filesystem::path cmd_rank(const RunConfig& cfg,
                               const std::filesystem::path& corpus_path,
                               const std::filesystem::path& checkpoint_path);
GradCheckReport cmd_gradcheck(const RunConfig& cfg);

// Round-trip loaders for the emitted CSV formats ('#' lines are comments).
std::vector<EvalRow> load_results_csv(const std::filesystem::path& path);
std::vector<BenchmarkResult> load_benchmark_csv(
    const std::filesystem::path& path);

}  // namespace trajselect
