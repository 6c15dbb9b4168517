#include "trajselect/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <set>

#include "trajselect/errors.hpp"
#include "trajselect/parallel.hpp"
#include "trajselect/rng.hpp"

namespace trajselect {

namespace {

constexpr double kLossEps = 1e-12;

// Threshold below which per-batch parallelism costs more than it saves.
constexpr std::size_t kParallelBatch = 16;

double norm_cdf(double x) {
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double gelu_grad(double x) { return norm_cdf(x) + x * norm_pdf(x); }

void ensure_compatible(LossKind kind, const VerifierConfig& cfg) {
  const int wanted = kind == LossKind::buffer ? 3 : 2;
  if (cfg.n_score_classes != wanted) {
    throw ConfigError("loss " + to_string(kind) + " needs a " +
                      std::to_string(wanted) + "-class score head, config has " +
                      std::to_string(cfg.n_score_classes));
  }
}

std::vector<StepDistribution> dists_from_probs(const Eigen::MatrixXd& probs,
                                               int n_classes) {
  std::vector<StepDistribution> dists;
  dists.reserve(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    dists.push_back(StepDistribution{probs(i, 0), probs(i, 1),
                                     n_classes == 3 ? probs(i, 2) : 0.0});
  }
  return dists;
}

double trajectory_loss(const std::vector<StepDistribution>& dists,
                       const std::vector<int>& labels, LossKind kind) {
  return kind == LossKind::buffer ? buffer_loss(dists, labels)
                                  : binary_bce_loss(dists, labels);
}

// d(loss)/d(logits) for one trajectory, already scaled by coef (the batch and
// step normalizers).
Eigen::MatrixXd loss_logit_grad(const Eigen::MatrixXd& probs, int label,
                                LossKind kind, double coef) {
  const Eigen::Index t_steps = probs.rows();
  const Eigen::Index nc = probs.cols();
  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(t_steps, nc);
  if (kind == LossKind::buffer) {
    // group = (p_right + p_buffer) for label 1, (p_wrong + p_buffer) for 0
    for (Eigen::Index t = 0; t < t_steps; ++t) {
      const double s =
          (label == 1 ? probs(t, 0) : probs(t, 1)) + probs(t, 2);
      for (Eigen::Index k = 0; k < nc; ++k) {
        const double g =
            (k == 2 || (label == 1 ? k == 0 : k == 1)) ? 1.0 : 0.0;
        dz(t, k) = -coef * probs(t, k) * (g - s) / (s + kLossEps);
      }
    }
  } else {
    for (Eigen::Index t = 0; t < t_steps; ++t) {
      const Eigen::Index target = label == 1 ? 0 : 1;
      if (probs(t, target) < kLossEps) continue;  // clamp active, flat loss
      for (Eigen::Index k = 0; k < nc; ++k) {
        dz(t, k) = coef * (probs(t, k) - (k == target ? 1.0 : 0.0));
      }
    }
  }
  return dz;
}

// dgain/dbias accumulate; returns gradient w.r.t. the layer-norm input.
Eigen::MatrixXd ln_backward(const Eigen::MatrixXd& dy,
                            const Eigen::MatrixXd& xhat,
                            const Eigen::VectorXd& inv_std,
                            const Eigen::VectorXd& gain,
                            Eigen::VectorXd& dgain, Eigen::VectorXd& dbias) {
  Eigen::MatrixXd dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    dgain += (dy.row(i).array() * xhat.row(i).array()).matrix().transpose();
    dbias += dy.row(i).transpose();
    const Eigen::ArrayXd dxhat =
        dy.row(i).transpose().array() * gain.array();
    const double m1 = dxhat.mean();
    const double m2 = (dxhat * xhat.row(i).transpose().array()).mean();
    dx.row(i) = (inv_std[i] *
                 (dxhat - m1 - xhat.row(i).transpose().array() * m2))
                    .matrix()
                    .transpose();
  }
  return dx;
}

void backward_trajectory(const VerifierParams& p, const VerifierConfig& cfg,
                         const ForwardCache& cache,
                         const Eigen::MatrixXd& dlogits, VerifierParams& g) {
  const Eigen::Index t_steps = cache.input.rows();
  const int n_heads = cfg.n_heads;
  const Eigen::Index d_head = cfg.d_model / n_heads;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(d_head));

  // score head
  g.head2 += cache.head_act.transpose() * dlogits;
  g.head2_bias += dlogits.colwise().sum().transpose();
  Eigen::MatrixXd dact = dlogits * p.head2.transpose();
  Eigen::MatrixXd dpre =
      ((cache.head_pre.array() > 0.0).cast<double>() * dact.array()).matrix();
  g.head1 += cache.final_out.transpose() * dpre;
  g.head1_bias += dpre.colwise().sum().transpose();
  const Eigen::MatrixXd dfinal_out = dpre * p.head1.transpose();

  Eigen::MatrixXd dx =
      ln_backward(dfinal_out, cache.final_xhat, cache.final_inv_std,
                  p.final_ln_gain, g.final_ln_gain, g.final_ln_bias);

  for (std::size_t l = cache.layers.size(); l-- > 0;) {
    const LayerParams& lp = p.layers[l];
    const LayerCache& lc = cache.layers[l];
    LayerParams& lg = g.layers[l];

    // feed-forward residual
    const Eigen::MatrixXd& dff_out = dx;
    lg.ff2 += lc.ff_act.transpose() * dff_out;
    lg.ff2_bias += dff_out.colwise().sum().transpose();
    const Eigen::MatrixXd dff_act = dff_out * lp.ff2.transpose();
    const Eigen::MatrixXd dff_pre =
        (dff_act.array() *
         lc.ff_pre.unaryExpr([](double v) { return gelu_grad(v); }).array())
            .matrix();
    lg.ff1 += lc.ln2_out.transpose() * dff_pre;
    lg.ff1_bias += dff_pre.colwise().sum().transpose();
    const Eigen::MatrixXd dln2_out = dff_pre * lp.ff1.transpose();
    Eigen::MatrixXd dattn_resid =
        dx + ln_backward(dln2_out, lc.ln2_xhat, lc.ln2_inv_std, lp.ln2_gain,
                         lg.ln2_gain, lg.ln2_bias);

    // attention residual
    const Eigen::MatrixXd& dattn_out = dattn_resid;
    lg.wo += lc.attn_concat.transpose() * dattn_out;
    lg.bo += dattn_out.colwise().sum().transpose();
    const Eigen::MatrixXd dconcat = dattn_out * lp.wo.transpose();

    Eigen::MatrixXd dq_rot = Eigen::MatrixXd::Zero(t_steps, cfg.d_model);
    Eigen::MatrixXd dk_rot = Eigen::MatrixXd::Zero(t_steps, cfg.d_model);
    Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(t_steps, cfg.d_model);
    for (int h = 0; h < n_heads; ++h) {
      const Eigen::Index base = h * d_head;
      const Eigen::MatrixXd& w = lc.attn[static_cast<std::size_t>(h)];
      for (Eigen::Index i = 0; i < t_steps; ++i) {
        const auto dout = dconcat.row(i).segment(base, d_head);
        Eigen::VectorXd dw = Eigen::VectorXd::Zero(i + 1);
        for (Eigen::Index j = 0; j <= i; ++j) {
          dw[j] = dout.dot(lc.v.row(j).segment(base, d_head));
          dv.row(j).segment(base, d_head) += w(i, j) * dout;
        }
        double wdw = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) wdw += w(i, j) * dw[j];
        for (Eigen::Index j = 0; j <= i; ++j) {
          const double ds = w(i, j) * (dw[j] - wdw);
          dq_rot.row(i).segment(base, d_head) +=
              attn_scale * ds * lc.k_rot.row(j).segment(base, d_head);
          dk_rot.row(j).segment(base, d_head) +=
              attn_scale * ds * lc.q_rot.row(i).segment(base, d_head);
        }
      }
    }
    rotary_apply(dq_rot, n_heads, /*inverse=*/true);
    rotary_apply(dk_rot, n_heads, /*inverse=*/true);

    lg.wq += lc.ln1_out.transpose() * dq_rot;
    lg.bq += dq_rot.colwise().sum().transpose();
    lg.wk += lc.ln1_out.transpose() * dk_rot;
    lg.bk += dk_rot.colwise().sum().transpose();
    lg.wv += lc.ln1_out.transpose() * dv;
    lg.bv += dv.colwise().sum().transpose();
    const Eigen::MatrixXd dln1_out = dq_rot * lp.wq.transpose() +
                                     dk_rot * lp.wk.transpose() +
                                     dv * lp.wv.transpose();
    dx = dattn_resid + ln_backward(dln1_out, lc.ln1_xhat, lc.ln1_inv_std,
                                   lp.ln1_gain, lg.ln1_gain, lg.ln1_bias);
  }

  // rms normalization of the projected inputs
  Eigen::MatrixXd dproj(t_steps, cfg.d_model);
  const double d = static_cast<double>(cfg.d_model);
  for (Eigen::Index i = 0; i < t_steps; ++i) {
    const auto x = cache.projected.row(i);
    const auto dy = dx.row(i);
    const double inv = cache.rms_inv[i];
    dproj.row(i) = inv * dy - x * (x.dot(dy) * inv * inv * inv / d);
  }
  g.projection += cache.input.transpose() * dproj;
  g.projection_bias += dproj.colwise().sum().transpose();
}

void add_params(VerifierParams& acc, VerifierParams& delta) {
  auto a = tensor_views(acc);
  auto b = tensor_views(delta);
  for (std::size_t i = 0; i < a.size(); ++i) {
    Eigen::Map<Eigen::VectorXd>(a[i].data, a[i].size()) +=
        Eigen::Map<const Eigen::VectorXd>(b[i].data, b[i].size());
  }
}

void scale_params(VerifierParams& p, double s) {
  for (auto& view : tensor_views(p)) {
    Eigen::Map<Eigen::VectorXd>(view.data, view.size()) *= s;
  }
}

double params_norm(VerifierParams& p) {
  double sq = 0.0;
  for (auto& view : tensor_views(p)) {
    sq += Eigen::Map<const Eigen::VectorXd>(view.data, view.size())
              .squaredNorm();
  }
  return std::sqrt(sq);
}

}  // namespace

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "buffer") return LossKind::buffer;
  if (name == "binary_bce") return LossKind::binary_bce;
  throw ConfigError("unknown loss kind: " + name);
}

std::string to_string(LossKind kind) {
  return kind == LossKind::buffer ? "buffer" : "binary_bce";
}

void validate(const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.grad_accum < 1) throw ConfigError("grad_accum must be >= 1");
  if (cfg.adam_beta1 < 0.0 || cfg.adam_beta1 >= 1.0 || cfg.adam_beta2 < 0.0 ||
      cfg.adam_beta2 >= 1.0) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (cfg.adam_eps <= 0.0) throw ConfigError("adam_eps must be > 0");
}

std::vector<int> make_pseudo_labels(int outcome, std::size_t n_steps) {
  if (n_steps == 0) {
    throw EmptyTrajectoryError("cannot label a trajectory with no steps");
  }
  return std::vector<int>(n_steps, outcome);
}

double buffer_loss(const std::vector<StepDistribution>& dists,
                   const std::vector<int>& labels) {
  if (dists.size() != labels.size()) {
    throw LengthMismatchError("got " + std::to_string(dists.size()) +
                              " distributions for " +
                              std::to_string(labels.size()) + " labels");
  }
  if (dists.empty()) {
    throw EmptyTrajectoryError("loss needs at least one step");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < dists.size(); ++t) {
    const double s = (labels[t] == 1 ? dists[t].p_right : dists[t].p_wrong) +
                     dists[t].p_buffer;
    sum -= std::log(s + kLossEps);
  }
  return sum / static_cast<double>(dists.size());
}

double binary_bce_loss(const std::vector<StepDistribution>& dists,
                       const std::vector<int>& labels) {
  if (dists.size() != labels.size()) {
    throw LengthMismatchError("got " + std::to_string(dists.size()) +
                              " distributions for " +
                              std::to_string(labels.size()) + " labels");
  }
  if (dists.empty()) {
    throw EmptyTrajectoryError("loss needs at least one step");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < dists.size(); ++t) {
    const double p = labels[t] == 1 ? dists[t].p_right : dists[t].p_wrong;
    sum -= std::log(std::max(p, kLossEps));
  }
  return sum / static_cast<double>(dists.size());
}

std::vector<TrainExample> build_examples(const Corpus& corpus,
                                         const VerifierConfig& cfg) {
  std::vector<TrainExample> examples;
  examples.reserve(corpus.records.size());
  for (const auto& record : corpus.records) {
    if (record.step_hiddens.empty()) continue;  // nothing to score
    const std::size_t t_steps =
        std::min(record.step_hiddens.size(),
                 static_cast<std::size_t>(cfg.max_steps));
    TrainExample ex;
    ex.outcome = record.outcome;
    ex.hiddens = to_matrix(
        std::vector<std::vector<double>>(record.step_hiddens.begin(),
                                         record.step_hiddens.begin() +
                                             static_cast<std::ptrdiff_t>(t_steps)),
        cfg.d_sampler);
    examples.push_back(std::move(ex));
  }
  return examples;
}

double batch_loss(const VerifierParams& params, const VerifierConfig& cfg,
                  const std::vector<TrainExample>& batch, LossKind kind) {
  ensure_compatible(kind, cfg);
  if (batch.empty()) throw DataError("empty batch");
  double sum = 0.0;
  for (const auto& ex : batch) {
    const ForwardCache cache = forward_cached(params, cfg, ex.hiddens);
    const auto dists = dists_from_probs(cache.probs, cfg.n_score_classes);
    sum += trajectory_loss(
        dists, make_pseudo_labels(ex.outcome, dists.size()), kind);
  }
  return sum / static_cast<double>(batch.size());
}

GradResult grad(const VerifierParams& params, const VerifierConfig& cfg,
                const std::vector<TrainExample>& batch, LossKind kind) {
  ensure_compatible(kind, cfg);
  if (batch.empty()) throw DataError("empty batch");
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  const auto example_grad = [&](const TrainExample& ex) {
    GradResult r{zeros_like(cfg), 0.0};
    const ForwardCache cache = forward_cached(params, cfg, ex.hiddens);
    const auto dists = dists_from_probs(cache.probs, cfg.n_score_classes);
    const auto labels = make_pseudo_labels(ex.outcome, dists.size());
    r.loss = trajectory_loss(dists, labels, kind);
    const double coef =
        inv_batch / static_cast<double>(cache.probs.rows());
    const Eigen::MatrixXd dlogits =
        loss_logit_grad(cache.probs, ex.outcome, kind, coef);
    backward_trajectory(params, cfg, cache, dlogits, r.grads);
    return r;
  };

  GradResult total{zeros_like(cfg), 0.0};
  if (batch.size() >= kParallelBatch) {
    std::vector<GradResult> slots(batch.size());
    parallel_for(batch.size(),
                 [&](std::size_t i) { slots[i] = example_grad(batch[i]); });
    for (auto& slot : slots) {
      add_params(total.grads, slot.grads);
      total.loss += slot.loss;
    }
  } else {
    for (const auto& ex : batch) {
      GradResult r = example_grad(ex);
      add_params(total.grads, r.grads);
      total.loss += r.loss;
    }
  }
  total.loss *= inv_batch;
  return total;
}

double fd_gradient_at(const VerifierParams& params, const VerifierConfig& cfg,
                      const std::vector<TrainExample>& batch, LossKind kind,
                      std::size_t flat_coordinate, double delta) {
  VerifierParams perturbed = params;
  auto views = tensor_views(perturbed);
  std::size_t offset = flat_coordinate;
  for (auto& view : views) {
    if (offset < static_cast<std::size_t>(view.size())) {
      const double original = view.data[offset];
      view.data[offset] = original + delta;
      const double up = batch_loss(perturbed, cfg, batch, kind);
      view.data[offset] = original - delta;
      const double down = batch_loss(perturbed, cfg, batch, kind);
      view.data[offset] = original;
      return (up - down) / (2.0 * delta);
    }
    offset -= static_cast<std::size_t>(view.size());
  }
  throw DataError("flat coordinate out of range");
}

GradCheckReport check_gradient(const VerifierParams& params,
                               const VerifierConfig& cfg,
                               const std::vector<TrainExample>& batch,
                               LossKind kind, VerifierParams& candidate,
                               double tolerance, std::size_t n_coords,
                               std::uint64_t seed) {
  constexpr double kDelta = 1e-5;
  auto views = tensor_views(candidate);
  std::size_t total = 0;
  for (const auto& v : views) total += static_cast<std::size_t>(v.size());

  std::set<std::size_t> coords;
  if (n_coords >= total) {
    for (std::size_t i = 0; i < total; ++i) coords.insert(i);
  } else {
    rng::Stream stream(rng::derive_key(seed, "gradcheck"));
    while (coords.size() < n_coords) {
      coords.insert(static_cast<std::size_t>(stream.next_below(total)));
    }
  }

  GradCheckReport report;
  report.n_coords = coords.size();
  for (const std::size_t c : coords) {
    const double fd = fd_gradient_at(params, cfg, batch, kind, c, kDelta);
    std::size_t offset = c;
    double analytic = 0.0;
    std::string tensor;
    for (const auto& v : views) {
      if (offset < static_cast<std::size_t>(v.size())) {
        analytic = v.data[offset];
        tensor = v.name;
        break;
      }
      offset -= static_cast<std::size_t>(v.size());
    }
    const double rel = std::abs(fd - analytic) /
                       std::max({std::abs(fd), std::abs(analytic), 1e-6});
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_tensor = tensor;
      report.worst_offset = offset;
    }
  }
  if (report.max_rel_error > tolerance) {
    throw GradCheckError("max relative error " +
                         std::to_string(report.max_rel_error) + " at " +
                         report.worst_tensor + "[" +
                         std::to_string(report.worst_offset) +
                         "] exceeds tolerance " + std::to_string(tolerance));
  }
  return report;
}

GradCheckReport grad_check(const VerifierParams& params,
                           const VerifierConfig& cfg,
                           const std::vector<TrainExample>& batch,
                           LossKind kind, double tolerance,
                           std::size_t n_coords, std::uint64_t seed) {
  GradResult analytic = grad(params, cfg, batch, kind);
  return check_gradient(params, cfg, batch, kind, analytic.grads, tolerance,
                        n_coords, seed);
}

AdamWState init_adamw(const VerifierConfig& cfg) {
  return AdamWState{zeros_like(cfg), zeros_like(cfg), 0};
}

void adamw_update(Eigen::Ref<Eigen::VectorXd> param,
                  const Eigen::Ref<const Eigen::VectorXd>& gradient,
                  Eigen::Ref<Eigen::VectorXd> m, Eigen::Ref<Eigen::VectorXd> v,
                  long step, const TrainConfig& cfg) {
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  m = b1 * m + (1.0 - b1) * gradient;
  v = (b2 * v.array() + (1.0 - b2) * gradient.array().square()).matrix();
  const double mhat_scale =
      1.0 / (1.0 - std::pow(b1, static_cast<double>(step)));
  const double vhat_scale =
      1.0 / (1.0 - std::pow(b2, static_cast<double>(step)));
  param.array() -=
      cfg.learning_rate *
      ((m.array() * mhat_scale) /
           ((v.array() * vhat_scale).sqrt() + cfg.adam_eps) +
       cfg.weight_decay * param.array());
}

void adamw_step(VerifierParams& params, const VerifierParams& grads,
                AdamWState& state, const TrainConfig& cfg) {
  state.step += 1;
  auto pv = tensor_views(params);
  auto gv = tensor_views(const_cast<VerifierParams&>(grads));
  auto mv = tensor_views(state.m);
  auto vv = tensor_views(state.v);
  for (std::size_t i = 0; i < pv.size(); ++i) {
    adamw_update(Eigen::Map<Eigen::VectorXd>(pv[i].data, pv[i].size()),
                 Eigen::Map<const Eigen::VectorXd>(gv[i].data, gv[i].size()),
                 Eigen::Map<Eigen::VectorXd>(mv[i].data, mv[i].size()),
                 Eigen::Map<Eigen::VectorXd>(vv[i].data, vv[i].size()),
                 state.step, cfg);
  }
}

TrainResult train(const Corpus& corpus, const TrainConfig& cfg,
                  const VerifierConfig& vcfg) {
  validate(cfg);
  validate(vcfg);
  ensure_compatible(cfg.loss_kind, vcfg);

  const std::vector<TrainExample> examples = build_examples(corpus, vcfg);
  if (examples.empty()) {
    throw DataError("corpus has no trainable records");
  }

  TrainResult result{init_params(vcfg, cfg.seed), {}};
  AdamWState state = init_adamw(vcfg);

  std::vector<std::size_t> order(examples.size());
  long step_idx = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng::Stream stream(rng::derive_key(
        cfg.seed, "epoch-order", static_cast<std::uint64_t>(epoch)));
    rng::shuffle(order, stream);

    const std::size_t batch_size = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t n_batches =
        (examples.size() + batch_size - 1) / batch_size;
    std::size_t batch_idx = 0;
    while (batch_idx < n_batches) {
      const auto window_start = std::chrono::steady_clock::now();
      VerifierParams acc = zeros_like(vcfg);
      double loss_sum = 0.0;
      int accumulated = 0;
      for (int a = 0; a < cfg.grad_accum && batch_idx < n_batches;
           ++a, ++batch_idx) {
        const std::size_t begin = batch_idx * batch_size;
        const std::size_t end = std::min(begin + batch_size, examples.size());
        std::vector<TrainExample> batch;
        batch.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
          batch.push_back(examples[order[i]]);
        }
        GradResult r = grad(result.params, vcfg, batch, cfg.loss_kind);
        add_params(acc, r.grads);
        loss_sum += r.loss;
        ++accumulated;
      }
      scale_params(acc, 1.0 / accumulated);
      const double loss = loss_sum / accumulated;
      if (!std::isfinite(loss)) {
        throw NonFiniteError("loss diverged at step " +
                             std::to_string(step_idx + 1));
      }
      adamw_step(result.params, acc, state, cfg);
      const double wall_ms =
          std::chrono::duration<double, std::milli>(
              std::chrono::steady_clock::now() - window_start)
              .count();
      result.log.push_back(
          TrainLogRow{++step_idx, epoch, loss, params_norm(acc), wall_ms});
    }
  }
  return result;
}

}  // namespace trajselect
