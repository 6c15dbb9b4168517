#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace trajselect {

struct VerifierConfig {
  int d_sampler = 32;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_head_hidden = 64;  // score-head hidden width
  int max_steps = 256;
  int n_score_classes = 3;  // 2 selects the plain binary head
};

void validate(const VerifierConfig& cfg);

// Per-step probability triple on the 3-simplex. The binary-head variant puts
// all mass on (p_right, p_wrong) and leaves p_buffer at zero.
struct StepDistribution {
  double p_right = 0.0;
  double p_wrong = 0.0;
  double p_buffer = 0.0;
};

struct LayerParams {
  Eigen::VectorXd ln1_gain, ln1_bias;
  Eigen::MatrixXd wq, wk, wv, wo;  // d_model x d_model, y = x * W + b
  Eigen::VectorXd bq, bk, bv, bo;
  Eigen::VectorXd ln2_gain, ln2_bias;
  Eigen::MatrixXd ff1, ff2;  // d_model x 4*d_model, 4*d_model x d_model
  Eigen::VectorXd ff1_bias, ff2_bias;
};

struct VerifierParams {
  Eigen::MatrixXd projection;  // d_sampler x d_model
  Eigen::VectorXd projection_bias;
  std::vector<LayerParams> layers;
  Eigen::VectorXd final_ln_gain, final_ln_bias;
  Eigen::MatrixXd head1;  // d_model x d_head_hidden
  Eigen::VectorXd head1_bias;
  Eigen::MatrixXd head2;  // d_head_hidden x n_score_classes
  Eigen::VectorXd head2_bias;
};

// Flat view over one parameter tensor; params and gradients share the same
// layout, so optimizer and checkpoint code walk them in lockstep.
struct TensorView {
  std::string name;
  double* data;
  long rows;
  long cols;
  long size() const { return rows * cols; }
};

std::vector<TensorView> tensor_views(VerifierParams& params);
std::size_t count_params(const VerifierParams& params);

// Glorot-normal weights (variance 2 / (fan_in + fan_out)), zero biases, unit
// layer-norm gains. Deterministic in the seed.
VerifierParams init_params(const VerifierConfig& cfg, std::uint64_t seed);
VerifierParams zeros_like(const VerifierConfig& cfg);

// Everything the backward pass needs, kept per trajectory.
struct LayerCache {
  Eigen::MatrixXd input;          // T x d, residual stream entering the layer
  Eigen::MatrixXd ln1_xhat;       // normalized pre-gain
  Eigen::VectorXd ln1_inv_std;    // per-row 1 / sqrt(var + eps)
  Eigen::MatrixXd ln1_out;
  Eigen::MatrixXd q, k, v;        // post-bias; q, k before rotation
  Eigen::MatrixXd q_rot, k_rot;
  std::vector<Eigen::MatrixXd> attn;  // per head, row i holds weights over j <= i
  Eigen::MatrixXd attn_concat;    // heads concatenated, before wo
  Eigen::MatrixXd attn_resid;     // residual stream after attention
  Eigen::MatrixXd ln2_xhat;
  Eigen::VectorXd ln2_inv_std;
  Eigen::MatrixXd ln2_out;
  Eigen::MatrixXd ff_pre;         // T x 4d
  Eigen::MatrixXd ff_act;         // gelu(ff_pre)
  Eigen::MatrixXd out;            // residual stream after feed-forward
};

struct ForwardCache {
  Eigen::MatrixXd input;        // T x d_sampler
  Eigen::MatrixXd projected;    // T x d, before rms normalization
  Eigen::VectorXd rms_inv;      // per-row 1 / rms
  Eigen::MatrixXd normed;
  std::vector<LayerCache> layers;
  Eigen::MatrixXd final_xhat;
  Eigen::VectorXd final_inv_std;
  Eigen::MatrixXd final_out;
  Eigen::MatrixXd head_pre;     // T x d_head_hidden
  Eigen::MatrixXd head_act;     // relu(head_pre)
  Eigen::MatrixXd logits;       // T x n_classes
  Eigen::MatrixXd probs;        // softmax rows
};

// Rotates each head's (even, odd) coordinate pairs by the per-position
// angles; inverse undoes the rotation (used by the backward pass).
void rotary_apply(Eigen::MatrixXd& x, int n_heads, bool inverse);

// Full forward pass with intermediates retained; step_hiddens is T x
// d_sampler. Throws SequenceTooLongError past max_steps and
// DimensionMismatchError on a wrong input width.
ForwardCache forward_cached(const VerifierParams& params,
                            const VerifierConfig& cfg,
                            const Eigen::MatrixXd& step_hiddens);

std::vector<StepDistribution> forward(
    const VerifierParams& params, const VerifierConfig& cfg,
    const std::vector<std::vector<double>>& step_hiddens);

std::vector<double> step_scores(const std::vector<StepDistribution>& dists);

// Mean p_right over steps; the Best-of-N selection key. Empty input scores 0.
double score_trajectory(const VerifierParams& params, const VerifierConfig& cfg,
                        const std::vector<std::vector<double>>& step_hiddens);

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows,
                          int expected_cols);

// JSON checkpoint holding the config and named flat tensors; exact value
// round trip.
void save_checkpoint(const VerifierParams& params, const VerifierConfig& cfg,
                     const std::filesystem::path& path);
std::pair<VerifierParams, VerifierConfig> load_checkpoint(
    const std::filesystem::path& path);

}  // namespace trajselect
