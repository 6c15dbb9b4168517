#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "trajselect/corpus.hpp"
#include "trajselect/errors.hpp"
#include "trajselect/harness.hpp"
#include "trajselect/sampler.hpp"
#include "trajselect/selection.hpp"
#include "trajselect/trace.hpp"
#include "trajselect/training.hpp"
#include "trajselect/verifier.hpp"

namespace py = pybind11;
using namespace trajselect;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Best-of-N trajectory selection with a step-level process verifier";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericError>(m, "NumericError");

  // trace parsing
  m.def("extract_think_span", &extract_think_span, py::arg("response_text"));
  m.def("segment_steps", &segment_steps, py::arg("trace_text"));
  m.def("extract_answer", &extract_answer, py::arg("answer_text"));
  m.def("normalize_answer", &normalize_answer, py::arg("raw"));
  m.def("label_outcome", &label_outcome, py::arg("extracted"),
        py::arg("gold"));

  py::class_<StepText>(m, "StepText")
      .def_readonly("text", &StepText::text)
      .def_readonly("final_token_index", &StepText::final_token_index);

  py::class_<ReasoningTrace>(m, "ReasoningTrace")
      .def_readonly("raw_text", &ReasoningTrace::raw_text)
      .def_readonly("steps", &ReasoningTrace::steps)
      .def_readonly("answer_text", &ReasoningTrace::answer_text);

  py::class_<TrajectoryRecord>(m, "TrajectoryRecord")
      .def_readonly("query_id", &TrajectoryRecord::query_id)
      .def_readonly("trace", &TrajectoryRecord::trace)
      .def_readonly("step_hiddens", &TrajectoryRecord::step_hiddens)
      .def_readonly("extracted_answer", &TrajectoryRecord::extracted_answer)
      .def_readonly("outcome", &TrajectoryRecord::outcome);

  py::class_<Query>(m, "Query")
      .def_readonly("id", &Query::id)
      .def_readonly("text", &Query::text)
      .def_readonly("gold_answer", &Query::gold_answer);

  // corpus
  py::class_<Corpus>(m, "Corpus")
      .def_readonly("records", &Corpus::records)
      .def_readonly("queries", &Corpus::queries)
      .def_readonly("seed", &Corpus::seed)
      .def("__len__", [](const Corpus& c) { return c.records.size(); });

  py::class_<CorpusStats>(m, "CorpusStats")
      .def_readonly("n_total", &CorpusStats::n_total)
      .def_readonly("n_pos", &CorpusStats::n_pos)
      .def_readonly("n_neg", &CorpusStats::n_neg)
      .def_readonly("step_count_histogram", &CorpusStats::step_count_histogram)
      .def_readonly("single_step_fraction", &CorpusStats::single_step_fraction);

  m.def("balance_downsample", &balance_downsample, py::arg("corpus"),
        py::arg("seed"));
  m.def("shuffle_corpus", &shuffle_corpus, py::arg("corpus"), py::arg("seed"));
  m.def("compute_stats", &compute_stats, py::arg("corpus"));
  m.def("load_jsonl", &load_jsonl, py::arg("path"));
  m.def("save_jsonl", &save_jsonl, py::arg("corpus"), py::arg("path"));

  // synthetic sampler
  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_queries", &SynthConfig::n_queries)
      .def_readwrite("candidates_per_query", &SynthConfig::candidates_per_query)
      .def_readwrite("steps_min", &SynthConfig::steps_min)
      .def_readwrite("steps_max", &SynthConfig::steps_max)
      .def_readwrite("signal_strength", &SynthConfig::signal_strength)
      .def_readwrite("noise_std", &SynthConfig::noise_std)
      .def_readwrite("base_correct_rate", &SynthConfig::base_correct_rate)
      .def_readwrite("d_sampler", &SynthConfig::d_sampler)
      .def_readwrite("vocab_size", &SynthConfig::vocab_size)
      .def_readwrite("seed", &SynthConfig::seed);

  m.def("generate_corpus", &generate_corpus, py::arg("config"));

  // verifier
  py::class_<VerifierConfig>(m, "VerifierConfig")
      .def(py::init<>())
      .def_readwrite("d_sampler", &VerifierConfig::d_sampler)
      .def_readwrite("d_model", &VerifierConfig::d_model)
      .def_readwrite("n_layers", &VerifierConfig::n_layers)
      .def_readwrite("n_heads", &VerifierConfig::n_heads)
      .def_readwrite("d_head_hidden", &VerifierConfig::d_head_hidden)
      .def_readwrite("max_steps", &VerifierConfig::max_steps)
      .def_readwrite("n_score_classes", &VerifierConfig::n_score_classes);

  py::class_<StepDistribution>(m, "StepDistribution")
      .def(py::init([](double r, double w, double b) {
             return StepDistribution{r, w, b};
           }),
           py::arg("p_right"), py::arg("p_wrong"), py::arg("p_buffer"))
      .def_readonly("p_right", &StepDistribution::p_right)
      .def_readonly("p_wrong", &StepDistribution::p_wrong)
      .def_readonly("p_buffer", &StepDistribution::p_buffer);

  py::class_<VerifierParams>(m, "VerifierParams");
  m.def("init_params", &init_params, py::arg("config"), py::arg("seed"));
  m.def("count_params", &count_params, py::arg("params"));
  m.def("forward", &forward, py::arg("params"), py::arg("config"),
        py::arg("step_hiddens"));
  m.def("step_scores", &step_scores, py::arg("distributions"));
  m.def("score_trajectory", &score_trajectory, py::arg("params"),
        py::arg("config"), py::arg("step_hiddens"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("params"),
        py::arg("config"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  // training
  py::enum_<LossKind>(m, "LossKind")
      .value("buffer", LossKind::buffer)
      .value("binary_bce", LossKind::binary_bce);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("grad_accum", &TrainConfig::grad_accum)
      .def_readwrite("adam_beta1", &TrainConfig::adam_beta1)
      .def_readwrite("adam_beta2", &TrainConfig::adam_beta2)
      .def_readwrite("adam_eps", &TrainConfig::adam_eps)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("loss_kind", &TrainConfig::loss_kind);

  py::class_<TrainLogRow>(m, "TrainLogRow")
      .def_readonly("step", &TrainLogRow::step)
      .def_readonly("epoch", &TrainLogRow::epoch)
      .def_readonly("loss", &TrainLogRow::loss)
      .def_readonly("grad_norm", &TrainLogRow::grad_norm)
      .def_readonly("wall_ms", &TrainLogRow::wall_ms);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("log", &TrainResult::log);

  m.def("make_pseudo_labels", &make_pseudo_labels, py::arg("outcome"),
        py::arg("n_steps"));
  m.def("buffer_loss", &buffer_loss, py::arg("distributions"),
        py::arg("labels"));
  m.def("binary_bce_loss", &binary_bce_loss, py::arg("distributions"),
        py::arg("labels"));
  m.def("train", &train, py::arg("corpus"), py::arg("train_config"),
        py::arg("verifier_config"));

  // selection
  py::class_<BenchmarkResult>(m, "BenchmarkResult")
      .def(py::init([](std::string name, int c, int t) {
             return BenchmarkResult{std::move(name), c, t};
           }),
           py::arg("name"), py::arg("n_correct"), py::arg("n_total"))
      .def_readonly("name", &BenchmarkResult::name)
      .def_readonly("n_correct", &BenchmarkResult::n_correct)
      .def_readonly("n_total", &BenchmarkResult::n_total);

  m.def("aggregate_mean", &aggregate_mean, py::arg("step_scores"));
  m.def("best_of_n", &best_of_n, py::arg("scores"));
  m.def("majority_vote", &majority_vote, py::arg("answers"));
  m.def("random_select", &random_select, py::arg("n"), py::arg("seed"),
        py::arg("query_id"));
  m.def("pass_at_n", &pass_at_n, py::arg("outcomes"));
  m.def("macro_average", &macro_average, py::arg("results"));

  // harness
  py::class_<EvalRow>(m, "EvalRow")
      .def_readonly("method", &EvalRow::method)
      .def_readonly("n", &EvalRow::n)
      .def_readonly("accuracy_pct", &EvalRow::accuracy_pct);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("rows", &EvalReport::rows)
      .def_readonly("skipped_n", &EvalReport::skipped_n);

  m.def("evaluate", &evaluate, py::arg("corpus"), py::arg("params"),
        py::arg("verifier_config"), py::arg("n_values"),
        py::arg("selection_seed"), py::arg("n_benchmarks") = 4);
}
