#include "trajselect/verifier.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "trajselect/errors.hpp"
#include "trajselect/rng.hpp"

namespace trajselect {

namespace {

using nlohmann::json;

constexpr double kRmsEps = 1e-8;
constexpr double kLnEps = 1e-5;
constexpr double kRopeBase = 10000.0;

// Per-row products keep every position's arithmetic independent of the
// sequence length, which makes causal outputs prefix-stable bit for bit.
Eigen::MatrixXd linear(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
                       const Eigen::VectorXd& b) {
  Eigen::MatrixXd y(x.rows(), w.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    y.row(i) = x.row(i) * w + b.transpose();
  }
  return y;
}

void layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                const Eigen::VectorXd& bias, Eigen::MatrixXd& xhat,
                Eigen::VectorXd& inv_std, Eigen::MatrixXd& out) {
  const auto d = static_cast<double>(x.cols());
  xhat.resize(x.rows(), x.cols());
  out.resize(x.rows(), x.cols());
  inv_std.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().sum() / d;
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    inv_std[i] = inv;
    xhat.row(i) = (x.row(i).array() - mean) * inv;
    out.row(i) = xhat.row(i).array() * gain.transpose().array() +
                 bias.transpose().array();
  }
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

void softmax_row_prefix(Eigen::MatrixXd& m, Eigen::Index row,
                        Eigen::Index count) {
  double max_v = m(row, 0);
  for (Eigen::Index j = 1; j < count; ++j) max_v = std::max(max_v, m(row, j));
  double sum = 0.0;
  for (Eigen::Index j = 0; j < count; ++j) {
    m(row, j) = std::exp(m(row, j) - max_v);
    sum += m(row, j);
  }
  for (Eigen::Index j = 0; j < count; ++j) m(row, j) /= sum;
}

void glorot_fill(Eigen::MatrixXd& w, std::uint64_t seed,
                 const std::string& name) {
  rng::Stream stream(rng::derive_key(seed, name));
  const double stddev =
      std::sqrt(2.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      w(r, c) = stddev * stream.next_normal();
    }
  }
}

}  // namespace

void validate(const VerifierConfig& cfg) {
  if (cfg.d_sampler < 1 || cfg.d_model < 1 || cfg.n_layers < 1 ||
      cfg.n_heads < 1 || cfg.d_head_hidden < 1 || cfg.max_steps < 1) {
    throw ConfigError("verifier dimensions must be >= 1");
  }
  if (cfg.d_model % cfg.n_heads != 0) {
    throw ConfigError("d_model must be divisible by n_heads");
  }
  if ((cfg.d_model / cfg.n_heads) % 2 != 0) {
    throw ConfigError("head dimension must be even for rotary encoding");
  }
  if (cfg.n_score_classes != 2 && cfg.n_score_classes != 3) {
    throw ConfigError("n_score_classes must be 2 or 3");
  }
}

std::vector<TensorView> tensor_views(VerifierParams& p) {
  std::vector<TensorView> views;
  const auto add_m = [&](const std::string& name, Eigen::MatrixXd& m) {
    views.push_back({name, m.data(), m.rows(), m.cols()});
  };
  const auto add_v = [&](const std::string& name, Eigen::VectorXd& v) {
    views.push_back({name, v.data(), v.rows(), 1});
  };
  add_m("projection.weight", p.projection);
  add_v("projection.bias", p.projection_bias);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string base = "layers." + std::to_string(l) + ".";
    LayerParams& lp = p.layers[l];
    add_v(base + "ln1.gain", lp.ln1_gain);
    add_v(base + "ln1.bias", lp.ln1_bias);
    add_m(base + "attn.wq", lp.wq);
    add_v(base + "attn.bq", lp.bq);
    add_m(base + "attn.wk", lp.wk);
    add_v(base + "attn.bk", lp.bk);
    add_m(base + "attn.wv", lp.wv);
    add_v(base + "attn.bv", lp.bv);
    add_m(base + "attn.wo", lp.wo);
    add_v(base + "attn.bo", lp.bo);
    add_v(base + "ln2.gain", lp.ln2_gain);
    add_v(base + "ln2.bias", lp.ln2_bias);
    add_m(base + "ff.w1", lp.ff1);
    add_v(base + "ff.b1", lp.ff1_bias);
    add_m(base + "ff.w2", lp.ff2);
    add_v(base + "ff.b2", lp.ff2_bias);
  }
  add_v("final_ln.gain", p.final_ln_gain);
  add_v("final_ln.bias", p.final_ln_bias);
  add_m("score_head.w1", p.head1);
  add_v("score_head.b1", p.head1_bias);
  add_m("score_head.w2", p.head2);
  add_v("score_head.b2", p.head2_bias);
  return views;
}

std::size_t count_params(const VerifierParams& params) {
  std::size_t n = 0;
  auto& mutable_params = const_cast<VerifierParams&>(params);
  for (const auto& v : tensor_views(mutable_params)) {
    n += static_cast<std::size_t>(v.size());
  }
  return n;
}

VerifierParams zeros_like(const VerifierConfig& cfg) {
  validate(cfg);
  const int d = cfg.d_model;
  VerifierParams p;
  p.projection = Eigen::MatrixXd::Zero(cfg.d_sampler, d);
  p.projection_bias = Eigen::VectorXd::Zero(d);
  p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& lp : p.layers) {
    lp.ln1_gain = Eigen::VectorXd::Zero(d);
    lp.ln1_bias = Eigen::VectorXd::Zero(d);
    lp.wq = Eigen::MatrixXd::Zero(d, d);
    lp.wk = Eigen::MatrixXd::Zero(d, d);
    lp.wv = Eigen::MatrixXd::Zero(d, d);
    lp.wo = Eigen::MatrixXd::Zero(d, d);
    lp.bq = Eigen::VectorXd::Zero(d);
    lp.bk = Eigen::VectorXd::Zero(d);
    lp.bv = Eigen::VectorXd::Zero(d);
    lp.bo = Eigen::VectorXd::Zero(d);
    lp.ln2_gain = Eigen::VectorXd::Zero(d);
    lp.ln2_bias = Eigen::VectorXd::Zero(d);
    lp.ff1 = Eigen::MatrixXd::Zero(d, 4 * d);
    lp.ff1_bias = Eigen::VectorXd::Zero(4 * d);
    lp.ff2 = Eigen::MatrixXd::Zero(4 * d, d);
    lp.ff2_bias = Eigen::VectorXd::Zero(d);
  }
  p.final_ln_gain = Eigen::VectorXd::Zero(d);
  p.final_ln_bias = Eigen::VectorXd::Zero(d);
  p.head1 = Eigen::MatrixXd::Zero(d, cfg.d_head_hidden);
  p.head1_bias = Eigen::VectorXd::Zero(cfg.d_head_hidden);
  p.head2 = Eigen::MatrixXd::Zero(cfg.d_head_hidden, cfg.n_score_classes);
  p.head2_bias = Eigen::VectorXd::Zero(cfg.n_score_classes);
  return p;
}

VerifierParams init_params(const VerifierConfig& cfg, std::uint64_t seed) {
  VerifierParams p = zeros_like(cfg);
  glorot_fill(p.projection, seed, "projection.weight");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string base = "layers." + std::to_string(l) + ".";
    LayerParams& lp = p.layers[l];
    lp.ln1_gain.setOnes();
    lp.ln2_gain.setOnes();
    glorot_fill(lp.wq, seed, base + "attn.wq");
    glorot_fill(lp.wk, seed, base + "attn.wk");
    glorot_fill(lp.wv, seed, base + "attn.wv");
    glorot_fill(lp.wo, seed, base + "attn.wo");
    glorot_fill(lp.ff1, seed, base + "ff.w1");
    glorot_fill(lp.ff2, seed, base + "ff.w2");
  }
  p.final_ln_gain.setOnes();
  glorot_fill(p.head1, seed, "score_head.w1");
  glorot_fill(p.head2, seed, "score_head.w2");
  return p;
}

void rotary_apply(Eigen::MatrixXd& x, int n_heads, bool inverse) {
  const Eigen::Index d_head = x.cols() / n_heads;
  for (Eigen::Index pos = 0; pos < x.rows(); ++pos) {
    for (int h = 0; h < n_heads; ++h) {
      const Eigen::Index base = h * d_head;
      for (Eigen::Index pair = 0; pair < d_head / 2; ++pair) {
        const double freq =
            std::pow(kRopeBase, -2.0 * static_cast<double>(pair) /
                                    static_cast<double>(d_head));
        const double angle =
            (inverse ? -1.0 : 1.0) * static_cast<double>(pos) * freq;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double a = x(pos, base + 2 * pair);
        const double b = x(pos, base + 2 * pair + 1);
        x(pos, base + 2 * pair) = a * c - b * s;
        x(pos, base + 2 * pair + 1) = a * s + b * c;
      }
    }
  }
}

ForwardCache forward_cached(const VerifierParams& params,
                            const VerifierConfig& cfg,
                            const Eigen::MatrixXd& step_hiddens) {
  const Eigen::Index t_steps = step_hiddens.rows();
  if (t_steps > cfg.max_steps) {
    throw SequenceTooLongError("trajectory has " + std::to_string(t_steps) +
                               " steps, max_steps is " +
                               std::to_string(cfg.max_steps));
  }
  if (step_hiddens.cols() != cfg.d_sampler) {
    throw DimensionMismatchError(
        "hidden width " + std::to_string(step_hiddens.cols()) +
        " does not match d_sampler " + std::to_string(cfg.d_sampler));
  }
  const int n_heads = cfg.n_heads;
  const Eigen::Index d_head = cfg.d_model / n_heads;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(d_head));

  ForwardCache cache;
  cache.input = step_hiddens;
  cache.projected = linear(step_hiddens, params.projection,
                           params.projection_bias);

  // Sampler hidden scale is unconstrained; rms normalization keeps the stack
  // well-conditioned for inputs of any magnitude.
  cache.rms_inv.resize(t_steps);
  cache.normed.resize(t_steps, cfg.d_model);
  for (Eigen::Index i = 0; i < t_steps; ++i) {
    const double ms = cache.projected.row(i).squaredNorm() /
                      static_cast<double>(cfg.d_model);
    cache.rms_inv[i] = 1.0 / std::sqrt(ms + kRmsEps);
    cache.normed.row(i) = cache.projected.row(i) * cache.rms_inv[i];
  }

  Eigen::MatrixXd x = cache.normed;
  cache.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (std::size_t l = 0; l < cache.layers.size(); ++l) {
    const LayerParams& lp = params.layers[l];
    LayerCache& lc = cache.layers[l];
    lc.input = x;
    layer_norm(x, lp.ln1_gain, lp.ln1_bias, lc.ln1_xhat, lc.ln1_inv_std,
               lc.ln1_out);
    lc.q = linear(lc.ln1_out, lp.wq, lp.bq);
    lc.k = linear(lc.ln1_out, lp.wk, lp.bk);
    lc.v = linear(lc.ln1_out, lp.wv, lp.bv);
    lc.q_rot = lc.q;
    lc.k_rot = lc.k;
    rotary_apply(lc.q_rot, n_heads, false);
    rotary_apply(lc.k_rot, n_heads, false);

    lc.attn.assign(static_cast<std::size_t>(n_heads),
                   Eigen::MatrixXd::Zero(t_steps, t_steps));
    lc.attn_concat.setZero(t_steps, cfg.d_model);
    for (int h = 0; h < n_heads; ++h) {
      Eigen::MatrixXd& w = lc.attn[static_cast<std::size_t>(h)];
      const Eigen::Index base = h * d_head;
      for (Eigen::Index i = 0; i < t_steps; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
          w(i, j) = attn_scale * lc.q_rot.row(i).segment(base, d_head).dot(
                                     lc.k_rot.row(j).segment(base, d_head));
        }
        softmax_row_prefix(w, i, i + 1);
        for (Eigen::Index j = 0; j <= i; ++j) {
          lc.attn_concat.row(i).segment(base, d_head) +=
              w(i, j) * lc.v.row(j).segment(base, d_head);
        }
      }
    }
    lc.attn_resid = lc.input + linear(lc.attn_concat, lp.wo, lp.bo);
    layer_norm(lc.attn_resid, lp.ln2_gain, lp.ln2_bias, lc.ln2_xhat,
               lc.ln2_inv_std, lc.ln2_out);
    lc.ff_pre = linear(lc.ln2_out, lp.ff1, lp.ff1_bias);
    lc.ff_act = lc.ff_pre.unaryExpr([](double v) { return gelu(v); });
    lc.out = lc.attn_resid + linear(lc.ff_act, lp.ff2, lp.ff2_bias);
    x = lc.out;
  }

  layer_norm(x, params.final_ln_gain, params.final_ln_bias, cache.final_xhat,
             cache.final_inv_std, cache.final_out);
  cache.head_pre = linear(cache.final_out, params.head1, params.head1_bias);
  cache.head_act =
      cache.head_pre.unaryExpr([](double v) { return v > 0.0 ? v : 0.0; });
  cache.logits = linear(cache.head_act, params.head2, params.head2_bias);
  cache.probs = cache.logits;
  for (Eigen::Index i = 0; i < t_steps; ++i) {
    softmax_row_prefix(cache.probs, i, cache.probs.cols());
  }
  return cache;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows,
                          int expected_cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), expected_cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != expected_cols) {
      throw DimensionMismatchError(
          "hidden width " + std::to_string(rows[i].size()) +
          " does not match d_sampler " + std::to_string(expected_cols));
    }
    for (int c = 0; c < expected_cols; ++c) {
      m(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
    }
  }
  return m;
}

std::vector<StepDistribution> forward(
    const VerifierParams& params, const VerifierConfig& cfg,
    const std::vector<std::vector<double>>& step_hiddens) {
  if (step_hiddens.empty()) return {};
  const ForwardCache cache =
      forward_cached(params, cfg, to_matrix(step_hiddens, cfg.d_sampler));
  std::vector<StepDistribution> dists;
  dists.reserve(step_hiddens.size());
  for (Eigen::Index i = 0; i < cache.probs.rows(); ++i) {
    StepDistribution d;
    d.p_right = cache.probs(i, 0);
    d.p_wrong = cache.probs(i, 1);
    d.p_buffer = cfg.n_score_classes == 3 ? cache.probs(i, 2) : 0.0;
    dists.push_back(d);
  }
  return dists;
}

std::vector<double> step_scores(const std::vector<StepDistribution>& dists) {
  std::vector<double> scores;
  scores.reserve(dists.size());
  for (const auto& d : dists) scores.push_back(d.p_right);
  return scores;
}

double score_trajectory(const VerifierParams& params,
                        const VerifierConfig& cfg,
                        const std::vector<std::vector<double>>& step_hiddens) {
  const auto scores = step_scores(forward(params, cfg, step_hiddens));
  if (scores.empty()) return 0.0;
  double sum = 0.0;
  for (const double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

void save_checkpoint(const VerifierParams& params, const VerifierConfig& cfg,
                     const std::filesystem::path& path) {
  json j;
  j["format"] = "trajselect-checkpoint-v1";
  j["config"] = {{"d_sampler", cfg.d_sampler},
                 {"d_model", cfg.d_model},
                 {"n_layers", cfg.n_layers},
                 {"n_heads", cfg.n_heads},
                 {"d_head_hidden", cfg.d_head_hidden},
                 {"max_steps", cfg.max_steps},
                 {"n_score_classes", cfg.n_score_classes}};
  json tensors;
  auto& mutable_params = const_cast<VerifierParams&>(params);
  for (const auto& view : tensor_views(mutable_params)) {
    json data = json::array();
    // Row-major flattening.
    for (long r = 0; r < view.rows; ++r) {
      for (long c = 0; c < view.cols; ++c) {
        data.push_back(view.data[c * view.rows + r]);
      }
    }
    tensors[view.name] = {{"shape", {view.rows, view.cols}},
                          {"data", std::move(data)}};
  }
  j["tensors"] = std::move(tensors);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << j.dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

std::pair<VerifierParams, VerifierConfig> load_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "trajselect-checkpoint-v1") {
      throw DataError("unknown checkpoint format");
    }
    const auto& jc = j.at("config");
    VerifierConfig cfg;
    cfg.d_sampler = jc.at("d_sampler").get<int>();
    cfg.d_model = jc.at("d_model").get<int>();
    cfg.n_layers = jc.at("n_layers").get<int>();
    cfg.n_heads = jc.at("n_heads").get<int>();
    cfg.d_head_hidden = jc.at("d_head_hidden").get<int>();
    cfg.max_steps = jc.at("max_steps").get<int>();
    cfg.n_score_classes = jc.at("n_score_classes").get<int>();

    VerifierParams params = zeros_like(cfg);
    const auto& tensors = j.at("tensors");
    for (auto& view : tensor_views(params)) {
      const auto& jt = tensors.at(view.name);
      const auto shape = jt.at("shape").get<std::vector<long>>();
      if (shape.size() != 2 || shape[0] != view.rows || shape[1] != view.cols) {
        throw DataError("tensor " + view.name + " has unexpected shape");
      }
      const auto& data = jt.at("data");
      if (static_cast<long>(data.size()) != view.size()) {
        throw DataError("tensor " + view.name + " has unexpected size");
      }
      std::size_t flat = 0;
      for (long r = 0; r < view.rows; ++r) {
        for (long c = 0; c < view.cols; ++c) {
          view.data[c * view.rows + r] = data.at(flat++).get<double>();
        }
      }
    }
    return {std::move(params), cfg};
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace trajselect
