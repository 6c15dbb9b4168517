#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "trajselect/errors.hpp"
#include "trajselect/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct Options {
  std::string config_path;
  std::string corpus_path;
  std::string checkpoint_path;
  std::string output_dir;  // optional override
  bool verbose = false;
};

trajselect::RunConfig load_config(const Options& opt) {
  trajselect::RunConfig cfg = trajselect::load_run_config(opt.config_path);
  if (!opt.output_dir.empty()) cfg.output_dir = opt.output_dir;
  trajselect::validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Best-of-N trajectory selection harness"};
  app.require_subcommand(1);

  Options opt;
  app.add_flag("-v,--verbose", opt.verbose, "Chatty output");

  const auto add_common = [&](CLI::App* sub, bool needs_corpus,
                              bool needs_checkpoint) {
    sub->add_option("--config", opt.config_path, "Run config JSON")
        ->required();
    sub->add_option("--out", opt.output_dir,
                    "Override the config's output_dir");
    if (needs_corpus) {
      sub->add_option("--corpus", opt.corpus_path, "Corpus JSONL")->required();
    }
    if (needs_checkpoint) {
      sub->add_option("--checkpoint", opt.checkpoint_path,
                      "Verifier checkpoint JSON")
          ->required();
    }
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  add_common(synth, false, false);
  CLI::App* train = app.add_subcommand("train", "Train the process verifier");
  add_common(train, true, false);
  CLI::App* score = app.add_subcommand("score", "Score every trajectory");
  add_common(score, true, true);
  CLI::App* select =
      app.add_subcommand("select", "Pick one candidate per query");
  add_common(select, true, false);
  select->add_option("--checkpoint", opt.checkpoint_path,
                     "Verifier checkpoint JSON (needed for trajselector)");
  CLI::App* eval =
      app.add_subcommand("eval", "Best-of-N sweep over all methods");
  add_common(eval, true, true);
  CLI::App* rank = app.add_subcommand("rank", "Top-k records by score");
  add_common(rank, true, true);
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference gradient check");
  add_common(gradcheck, false, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const trajselect::RunConfig cfg = load_config(opt);
    if (opt.verbose) {
      std::cerr << "config hash " << trajselect::config_hash(cfg) << "\n";
    }
    if (synth->parsed()) {
      const auto out = trajselect::cmd_synth(cfg);
      std::cout << "wrote " << out.corpus.string() << "\n";
      std::cout << "wrote " << out.stats.string() << "\n";
    } else if (train->parsed()) {
      const auto out = trajselect::cmd_train(cfg, opt.corpus_path);
      std::cout << "wrote " << out.checkpoint.string() << "\n";
      std::cout << "wrote " << out.log.string() << "\n";
    } else if (score->parsed()) {
      const auto out =
          trajselect::cmd_score(cfg, opt.corpus_path, opt.checkpoint_path);
      std::cout << "wrote " << out.string() << "\n";
    } else if (select->parsed()) {
      if (cfg.method == trajselect::Method::trajselector &&
          opt.checkpoint_path.empty()) {
        throw trajselect::ConfigError(
            "method trajselector needs --checkpoint");
      }
      const auto out =
          trajselect::cmd_select(cfg, opt.corpus_path, opt.checkpoint_path);
      std::cout << "wrote " << out.string() << "\n";
    } else if (eval->parsed()) {
      const auto out =
          trajselect::cmd_eval(cfg, opt.corpus_path, opt.checkpoint_path);
      std::cout << "wrote " << out.results.string() << "\n";
    } else if (rank->parsed()) {
      const auto out =
          trajselect::cmd_rank(cfg, opt.corpus_path, opt.checkpoint_path);
      std::cout << "wrote " << out.string() << "\n";
    } else if (gradcheck->parsed()) {
      trajselect::cmd_gradcheck(cfg);
    }
  } catch (const trajselect::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const trajselect::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const trajselect::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
