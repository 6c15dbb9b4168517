#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "trajselect/corpus.hpp"
#include "trajselect/verifier.hpp"

namespace trajselect {

enum class LossKind { buffer, binary_bce };

LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 3;
  double weight_decay = 0.1;
  int batch_size = 2;
  int grad_accum = 4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  LossKind loss_kind = LossKind::buffer;
};

void validate(const TrainConfig& cfg);

// Outcome label copied to every step. Throws EmptyTrajectoryError for T = 0.
std::vector<int> make_pseudo_labels(int outcome, std::size_t n_steps);

// -(1/T) sum_t [y~ log(p_r + p_b + eps) + (1 - y~) log(p_w + p_b + eps)],
// eps = 1e-12.
double buffer_loss(const std::vector<StepDistribution>& dists,
                   const std::vector<int>& labels);

// Mean binary cross-entropy over steps for the two-class head, probabilities
// clamped at eps inside the log.
double binary_bce_loss(const std::vector<StepDistribution>& dists,
                       const std::vector<int>& labels);

struct TrainExample {
  Eigen::MatrixXd hiddens;  // T x d_sampler
  int outcome = 0;
};

// Records converted for training: steps past max_steps are dropped, records
// with no steps are skipped.
std::vector<TrainExample> build_examples(const Corpus& corpus,
                                         const VerifierConfig& cfg);

double batch_loss(const VerifierParams& params, const VerifierConfig& cfg,
                  const std::vector<TrainExample>& batch, LossKind kind);

struct GradResult {
  VerifierParams grads;
  double loss = 0.0;
};

// Exact reverse-mode gradient of the mean loss over the batch.
GradResult grad(const VerifierParams& params, const VerifierConfig& cfg,
                const std::vector<TrainExample>& batch, LossKind kind);

// Central finite difference of the batch loss along one flat coordinate.
double fd_gradient_at(const VerifierParams& params, const VerifierConfig& cfg,
                      const std::vector<TrainExample>& batch, LossKind kind,
                      std::size_t flat_coordinate, double delta);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t n_coords = 0;
  std::string worst_tensor;
  std::size_t worst_offset = 0;
};

// Compares a candidate gradient against central finite differences on
// n_coords sampled coordinates (all of them when n_coords covers the
// parameter count). Throws GradCheckError past the tolerance.
GradCheckReport check_gradient(const VerifierParams& params,
                               const VerifierConfig& cfg,
                               const std::vector<TrainExample>& batch,
                               LossKind kind, VerifierParams& candidate_grads,
                               double tolerance, std::size_t n_coords,
                               std::uint64_t seed);

// check_gradient applied to the analytic gradient.
GradCheckReport grad_check(const VerifierParams& params,
                           const VerifierConfig& cfg,
                           const std::vector<TrainExample>& batch,
                           LossKind kind, double tolerance,
                           std::size_t n_coords, std::uint64_t seed);

struct AdamWState {
  VerifierParams m;
  VerifierParams v;
  long step = 0;
};

AdamWState init_adamw(const VerifierConfig& cfg);

// One decoupled-weight-decay step on a flat tensor; exposed for direct tests.
void adamw_update(Eigen::Ref<Eigen::VectorXd> param,
                  const Eigen::Ref<const Eigen::VectorXd>& gradient,
                  Eigen::Ref<Eigen::VectorXd> m, Eigen::Ref<Eigen::VectorXd> v,
                  long step, const TrainConfig& cfg);

void adamw_step(VerifierParams& params, const VerifierParams& grads,
                AdamWState& state, const TrainConfig& cfg);

struct TrainLogRow {
  long step = 0;
  int epoch = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  VerifierParams params;
  std::vector<TrainLogRow> log;
};

// Full loop: seeded epoch shuffling, batching, gradient accumulation, AdamW.
// Hidden states are inputs only; nothing outside the verifier parameters is
// updated. Deterministic in the seeds.
TrainResult train(const Corpus& corpus, const TrainConfig& cfg,
                  const VerifierConfig& vcfg);

}  // namespace trajselect
