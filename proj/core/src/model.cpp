#include "mapf/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mapf/errors.hpp"

namespace mapf {
namespace {

constexpr double kInitStd = 0.02;
constexpr double kLnEps = 1e-5;
// tanh approximation of GELU: 0.5 x (1 + tanh(c (x + a x^3)))
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

template <typename S>
S gelu_value(S x) {
  const S c = static_cast<S>(kGeluC);
  const S a = static_cast<S>(kGeluA);
  return S(0.5) * x * (S(1) + std::tanh(c * (x + a * x * x * x)));
}

template <typename S>
S gelu_slope(S x) {
  const S c = static_cast<S>(kGeluC);
  const S a = static_cast<S>(kGeluA);
  const S t = std::tanh(c * (x + a * x * x * x));
  return S(0.5) * (S(1) + t) + S(0.5) * x * (S(1) - t * t) * c * (S(1) + S(3) * a * x * x);
}

// y = xhat * gain + bias row-wise, with xhat and 1/std kept for the backward
// pass. eps sits inside the square root.
template <typename S>
void layer_norm(const MatX<S>& x, const VecX<S>& gain, const VecX<S>& bias, MatX<S>& xhat,
                VecX<S>& rstd, MatX<S>& y) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index d = x.cols();
  xhat.resize(rows, d);
  rstd.resize(rows);
  y.resize(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const S mean = x.row(r).mean();
    const S var = (x.row(r).array() - mean).square().sum() / static_cast<S>(d);
    const S rs = S(1) / std::sqrt(var + static_cast<S>(kLnEps));
    xhat.row(r) = ((x.row(r).array() - mean) * rs).matrix();
    y.row(r) = (xhat.row(r).array() * gain.transpose().array() + bias.transpose().array()).matrix();
    rstd(r) = rs;
  }
}

// dgain and dbias accumulate; dx is overwritten.
template <typename S>
void layer_norm_backward(const MatX<S>& dy, const MatX<S>& xhat, const VecX<S>& rstd,
                         const VecX<S>& gain, MatX<S>& dx, VecX<S>& dgain, VecX<S>& dbias) {
  const Eigen::Index rows = dy.rows();
  const Eigen::Index d = dy.cols();
  dx.resize(rows, d);
  Eigen::Array<S, 1, Eigen::Dynamic> dxhat(d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    auto dyr = dy.row(r).array();
    auto xh = xhat.row(r).array();
    dxhat = dyr * gain.transpose().array();
    const S m1 = dxhat.mean();
    const S m2 = (dxhat * xh).mean();
    dx.row(r) = (rstd(r) * (dxhat - m1 - xh * m2)).matrix();
    dgain.array() += (dyr * xh).transpose();
    dbias.array() += dyr.transpose();
  }
}

// Rebuilds the layer-norm output from its cached normalized input; cheaper
// than storing it through the forward pass.
template <typename S>
MatX<S> denormalize(const MatX<S>& xhat, const VecX<S>& gain, const VecX<S>& bias) {
  return ((xhat.array().rowwise() * gain.transpose().array()).rowwise() +
          bias.transpose().array())
      .matrix();
}

template <typename S>
struct BlockCache {
  MatX<S> xhat1;               // first norm, normalized input
  VecX<S> rstd1;
  MatX<S> q, k, v;             // projections, (B*T) x d
  std::vector<MatX<S>> probs;  // per (batch, head) attention weights, T x T
  MatX<S> att;                 // heads re-concatenated, pre output projection
  MatX<S> xhat2;               // second norm
  VecX<S> rstd2;
  MatX<S> fc;                  // MLP pre-activation, (B*T) x 4d
  MatX<S> act;                 // gelu(fc)
};

template <typename S>
struct ForwardCache {
  std::vector<BlockCache<S>> blocks;
  MatX<S> xhatf;  // final norm
  VecX<S> rstdf;
  MatX<S> xf;     // final norm output, all positions
  MatX<S> logits;
};

template <typename S>
void softmax_rows(MatX<S>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r).array();
    row -= row.maxCoeff();
    row = row.exp();
    row /= row.sum();
  }
}

template <typename S>
void run_forward(const ModelConfig& cfg, const ModelParams<S>& p, std::span<const TokenSeq> batch,
                 ForwardCache<S>& cache) {
  check_model_config(cfg);
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index T = cfg.context;
  const Eigen::Index d = cfg.d_embed;
  const Eigen::Index H = cfg.n_heads;
  const Eigen::Index hs = d / H;
  const S scale = S(1) / std::sqrt(static_cast<S>(hs));

  MatX<S> x(B * T, d);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index t = 0; t < T; ++t) {
      const int id = batch[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)];
      if (id >= cfg.vocab_size)
        throw InvalidToken("forward: token id " + std::to_string(id) +
                           " outside vocabulary of size " + std::to_string(cfg.vocab_size));
      x.row(b * T + t) = p.token_embedding.row(id) + p.position_embedding.row(t);
    }
  }

  cache.blocks.resize(static_cast<std::size_t>(cfg.n_layers));
  MatX<S> h1, h2;
  for (int l = 0; l < cfg.n_layers; ++l) {
    BlockCache<S>& bc = cache.blocks[static_cast<std::size_t>(l)];
    const auto& w = p.blocks[static_cast<std::size_t>(l)];
    layer_norm(x, w.ln1_gain, w.ln1_bias, bc.xhat1, bc.rstd1, h1);
    bc.q.noalias() = h1 * w.wq;
    bc.k.noalias() = h1 * w.wk;
    bc.v.noalias() = h1 * w.wv;
    bc.att.resize(B * T, d);
    bc.probs.assign(static_cast<std::size_t>(B * H), MatX<S>());
    for (Eigen::Index b = 0; b < B; ++b) {
      for (Eigen::Index h = 0; h < H; ++h) {
        auto qb = bc.q.block(b * T, h * hs, T, hs);
        auto kb = bc.k.block(b * T, h * hs, T, hs);
        auto vb = bc.v.block(b * T, h * hs, T, hs);
        MatX<S>& prob = bc.probs[static_cast<std::size_t>(b * H + h)];
        prob.noalias() = qb * kb.transpose();
        prob *= scale;
        softmax_rows(prob);
        bc.att.block(b * T, h * hs, T, hs).noalias() = prob * vb;
      }
    }
    x.noalias() += bc.att * w.wo;  // attention residual
    layer_norm(x, w.ln2_gain, w.ln2_bias, bc.xhat2, bc.rstd2, h2);
    bc.fc.noalias() = h2 * w.w_fc;
    bc.act = bc.fc.unaryExpr([](S v) { return gelu_value(v); });
    x.noalias() += bc.act * w.w_proj;  // MLP residual
    if (!x.allFinite())
      throw NumericalError("forward: non-finite activations after block " + std::to_string(l));
  }
  layer_norm(x, p.lnf_gain, p.lnf_bias, cache.xhatf, cache.rstdf, cache.xf);

  cache.logits.resize(B, cfg.n_actions);
  for (Eigen::Index b = 0; b < B; ++b)
    cache.logits.row(b).noalias() = cache.xf.row(b * T) * p.head;
  if (!cache.logits.allFinite())
    throw NumericalError("forward: non-finite logits after the final norm");
}

}  // namespace

ModelConfig model_preset(std::string_view name) {
  ModelConfig cfg;
  if (name == "pico") {
    cfg.n_layers = 2, cfg.n_heads = 2, cfg.d_embed = 64;
  } else if (name == "mini") {
    cfg.n_layers = 4, cfg.n_heads = 4, cfg.d_embed = 128;
  } else if (name == "base160") {
    cfg.n_layers = 5, cfg.n_heads = 5, cfg.d_embed = 160;
  } else if (name == "base256") {
    cfg.n_layers = 8, cfg.n_heads = 8, cfg.d_embed = 256;
  } else if (name == "base768") {
    cfg.n_layers = 12, cfg.n_heads = 12, cfg.d_embed = 768;
  } else {
    throw InvalidConfig("model_preset: unknown preset \"" + std::string(name) +
                        "\" (pico, mini, base160, base256, base768)");
  }
  return cfg;
}

void check_model_config(const ModelConfig& cfg) {
  if (cfg.n_layers < 1) throw InvalidConfig("model config: n_layers must be >= 1");
  if (cfg.n_heads < 1) throw InvalidConfig("model config: n_heads must be >= 1");
  if (cfg.d_embed < 1) throw InvalidConfig("model config: d_embed must be >= 1");
  if (cfg.d_embed % cfg.n_heads != 0)
    throw InvalidConfig("model config: d_embed must be divisible by n_heads");
  if (cfg.vocab_size < 1) throw InvalidConfig("model config: vocab_size must be >= 1");
  if (cfg.context != kSampleTokens)
    throw InvalidConfig("model config: context must equal the sample length " +
                        std::to_string(kSampleTokens));
  if (cfg.n_actions < 2) throw InvalidConfig("model config: n_actions must be >= 2");
}

std::int64_t parameter_count(const ModelConfig& cfg) {
  check_model_config(cfg);
  const std::int64_t d = cfg.d_embed;
  const std::int64_t per_block = 4 * d + 12 * d * d;  // two norms + QKVO + 4x MLP
  return cfg.vocab_size * d + cfg.context * d + cfg.n_layers * per_block + 2 * d +
         d * cfg.n_actions;
}

template <typename Scalar>
ModelParams<Scalar> zero_params(const ModelConfig& cfg) {
  check_model_config(cfg);
  const Eigen::Index d = cfg.d_embed;
  ModelParams<Scalar> p;
  p.token_embedding = MatX<Scalar>::Zero(cfg.vocab_size, d);
  p.position_embedding = MatX<Scalar>::Zero(cfg.context, d);
  p.blocks.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& b : p.blocks) {
    b.ln1_gain = VecX<Scalar>::Zero(d);
    b.ln1_bias = VecX<Scalar>::Zero(d);
    b.wq = MatX<Scalar>::Zero(d, d);
    b.wk = MatX<Scalar>::Zero(d, d);
    b.wv = MatX<Scalar>::Zero(d, d);
    b.wo = MatX<Scalar>::Zero(d, d);
    b.ln2_gain = VecX<Scalar>::Zero(d);
    b.ln2_bias = VecX<Scalar>::Zero(d);
    b.w_fc = MatX<Scalar>::Zero(d, 4 * d);
    b.w_proj = MatX<Scalar>::Zero(4 * d, d);
  }
  p.lnf_gain = VecX<Scalar>::Zero(d);
  p.lnf_bias = VecX<Scalar>::Zero(d);
  p.head = MatX<Scalar>::Zero(d, cfg.n_actions);
  return p;
}

template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams<Scalar> p = zero_params<Scalar>(cfg);
  Rng rng(seed);
  for_each_tensor(p, [&](const char* name, auto m, bool decay) {
    if (decay) {
      for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<Scalar>(rng.normal() * kInitStd);
    } else if (std::string_view(name).ends_with("gain")) {
      m.setOnes();
    }  // biases stay zero
  });
  return p;
}

template <typename Scalar>
MatX<Scalar> forward(const ModelConfig& cfg, const ModelParams<Scalar>& params,
                     std::span<const TokenSeq> batch) {
  if (batch.empty()) return MatX<Scalar>(0, cfg.n_actions);
  ForwardCache<Scalar> cache;
  run_forward(cfg, params, batch, cache);
  return std::move(cache.logits);
}

template <typename Scalar>
LossResult<Scalar> loss_and_grads(const ModelConfig& cfg, const ModelParams<Scalar>& params,
                                  std::span<const TokenSeq> batch,
                                  std::span<const std::uint8_t> labels) {
  if (batch.empty()) throw InvalidConfig("loss_and_grads: empty batch");
  if (batch.size() != labels.size())
    throw ArityMismatch("loss_and_grads: " + std::to_string(batch.size()) + " samples vs " +
                        std::to_string(labels.size()) + " labels");
  for (std::uint8_t lab : labels)
    if (lab >= cfg.n_actions)
      throw InvalidConfig("loss_and_grads: label " + std::to_string(int(lab)) +
                          " outside the " + std::to_string(cfg.n_actions) + "-way head");

  ForwardCache<Scalar> cache;
  run_forward(cfg, params, batch, cache);

  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index T = cfg.context;
  const Eigen::Index d = cfg.d_embed;
  const Eigen::Index H = cfg.n_heads;
  const Eigen::Index hs = d / H;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hs));

  LossResult<Scalar> res;
  res.grads = zero_params<Scalar>(cfg);
  ModelParams<Scalar>& g = res.grads;

  // Softmax + cross-entropy on the logits, and its gradient.
  MatX<Scalar> dlogits = cache.logits;
  softmax_rows(dlogits);
  Scalar loss = 0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const Eigen::Index lab = labels[static_cast<std::size_t>(b)];
    loss -= std::log(dlogits(b, lab));
    dlogits(b, lab) -= Scalar(1);
  }
  loss /= static_cast<Scalar>(B);
  dlogits /= static_cast<Scalar>(B);
  if (!std::isfinite(static_cast<double>(loss)))
    throw NumericalError("loss_and_grads: non-finite loss");
  res.loss = loss;

  // Head reads the final-norm output at position 0 of each sample.
  MatX<Scalar> x_read(B, d);
  for (Eigen::Index b = 0; b < B; ++b) x_read.row(b) = cache.xf.row(b * T);
  g.head.noalias() = x_read.transpose() * dlogits;
  MatX<Scalar> dxf = MatX<Scalar>::Zero(B * T, d);
  for (Eigen::Index b = 0; b < B; ++b)
    dxf.row(b * T).noalias() = dlogits.row(b) * params.head.transpose();

  MatX<Scalar> dx;
  layer_norm_backward(dxf, cache.xhatf, cache.rstdf, params.lnf_gain, dx, g.lnf_gain, g.lnf_bias);

  MatX<Scalar> dmid, dh, dfc, dq, dk, dv, dh1, dprob, dscore;
  VecX<Scalar> rowsum;
  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const BlockCache<Scalar>& bc = cache.blocks[static_cast<std::size_t>(l)];
    const auto& w = params.blocks[static_cast<std::size_t>(l)];
    auto& gw = g.blocks[static_cast<std::size_t>(l)];

    // MLP half: x_out = x_mid + gelu(LN2(x_mid) * w_fc) * w_proj
    gw.w_proj.noalias() = bc.act.transpose() * dx;
    dh.noalias() = dx * w.w_proj.transpose();
    dfc = dh.cwiseProduct(bc.fc.unaryExpr([](Scalar v) { return gelu_slope(v); }));
    {
      MatX<Scalar> h2 = denormalize(bc.xhat2, w.ln2_gain, w.ln2_bias);
      gw.w_fc.noalias() = h2.transpose() * dfc;
    }
    dh.noalias() = dfc * w.w_fc.transpose();
    layer_norm_backward(dh, bc.xhat2, bc.rstd2, w.ln2_gain, dmid, gw.ln2_gain, gw.ln2_bias);
    dmid += dx;  // residual path

    // Attention half: x_mid = x_in + att * wo
    gw.wo.noalias() = bc.att.transpose() * dmid;
    dh.noalias() = dmid * w.wo.transpose();  // gradient at the concatenated heads
    dq.resize(B * T, d);
    dk.resize(B * T, d);
    dv.resize(B * T, d);
    for (Eigen::Index b = 0; b < B; ++b) {
      for (Eigen::Index hd = 0; hd < H; ++hd) {
        const MatX<Scalar>& prob = bc.probs[static_cast<std::size_t>(b * H + hd)];
        auto dy = dh.block(b * T, hd * hs, T, hs);
        auto qb = bc.q.block(b * T, hd * hs, T, hs);
        auto kb = bc.k.block(b * T, hd * hs, T, hs);
        auto vb = bc.v.block(b * T, hd * hs, T, hs);
        dprob.noalias() = dy * vb.transpose();
        dv.block(b * T, hd * hs, T, hs).noalias() = prob.transpose() * dy;
        rowsum = (dprob.array() * prob.array()).rowwise().sum();
        dscore = (prob.array() * (dprob.array().colwise() - rowsum.array())).matrix();
        dscore *= scale;
        dq.block(b * T, hd * hs, T, hs).noalias() = dscore * kb;
        dk.block(b * T, hd * hs, T, hs).noalias() = dscore.transpose() * qb;
      }
    }
    {
      MatX<Scalar> h1 = denormalize(bc.xhat1, w.ln1_gain, w.ln1_bias);
      gw.wq.noalias() = h1.transpose() * dq;
      gw.wk.noalias() = h1.transpose() * dk;
      gw.wv.noalias() = h1.transpose() * dv;
    }
    dh.noalias() = dq * w.wq.transpose();
    dh.noalias() += dk * w.wk.transpose();
    dh.noalias() += dv * w.wv.transpose();
    layer_norm_backward(dh, bc.xhat1, bc.rstd1, w.ln1_gain, dx, gw.ln1_gain, gw.ln1_bias);
    dx += dmid;  // residual path
  }

  // Scatter into the embedding tables.
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index t = 0; t < T; ++t) {
      const int id = batch[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)];
      g.token_embedding.row(id) += dx.row(b * T + t);
      g.position_embedding.row(t) += dx.row(b * T + t);
    }
  }
  return res;
}

template <typename Scalar>
OptimizerState<Scalar> init_optimizer(const ModelConfig& cfg) {
  OptimizerState<Scalar> s;
  s.m = zero_params<Scalar>(cfg);
  s.v = zero_params<Scalar>(cfg);
  return s;
}

template <typename Scalar>
void adamw_step(const ModelConfig& cfg, ModelParams<Scalar>& params,
                const ModelParams<Scalar>& grads, OptimizerState<Scalar>& state, double lr,
                const AdamWConfig& opt) {
  check_model_config(cfg);
  if (lr <= 0) throw InvalidConfig("adamw_step: lr must be positive");

  using Map = Eigen::Map<MatX<Scalar>>;
  using CMap = Eigen::Map<const MatX<Scalar>>;
  std::vector<Map> ps, ms, vs;
  std::vector<CMap> gs;
  std::vector<bool> decays;
  for_each_tensor(params, [&](const char*, Map m, bool decay) {
    ps.push_back(m);
    decays.push_back(decay);
  });
  for_each_tensor(grads, [&](const char*, CMap m, bool) { gs.push_back(m); });
  for_each_tensor(state.m, [&](const char*, Map m, bool) { ms.push_back(m); });
  for_each_tensor(state.v, [&](const char*, Map m, bool) { vs.push_back(m); });
  if (gs.size() != ps.size() || ms.size() != ps.size() || vs.size() != ps.size())
    throw InvalidConfig("adamw_step: tensor counts disagree");
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (gs[i].rows() != ps[i].rows() || gs[i].cols() != ps[i].cols() ||
        ms[i].rows() != ps[i].rows() || vs[i].rows() != ps[i].rows())
      throw InvalidConfig("adamw_step: tensor shapes disagree");

  double sq = 0;
  for (const auto& gm : gs) sq += gm.template cast<double>().squaredNorm();
  const double gnorm = std::sqrt(sq);
  const Scalar gscale =
      static_cast<Scalar>(opt.clip_norm > 0 && gnorm > opt.clip_norm ? opt.clip_norm / gnorm : 1.0);

  const std::int64_t t = state.iter + 1;
  const Scalar b1 = static_cast<Scalar>(opt.beta1);
  const Scalar b2 = static_cast<Scalar>(opt.beta2);
  const Scalar bc1 = static_cast<Scalar>(1.0 - std::pow(opt.beta1, static_cast<double>(t)));
  const Scalar bc2 = static_cast<Scalar>(1.0 - std::pow(opt.beta2, static_cast<double>(t)));
  const Scalar eps = static_cast<Scalar>(opt.eps);
  const Scalar step = static_cast<Scalar>(lr);

  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto gi = gs[i].array() * gscale;
    ms[i].array() = b1 * ms[i].array() + (Scalar(1) - b1) * gi;
    vs[i].array() = b2 * vs[i].array() + (Scalar(1) - b2) * gi.square();
    if (decays[i] && opt.weight_decay != 0)
      ps[i].array() *= Scalar(1) - step * static_cast<Scalar>(opt.weight_decay);
    ps[i].array() -= step * (ms[i].array() / bc1) / ((vs[i].array() / bc2).sqrt() + eps);
  }
  state.iter = t;
}

double lr_at(int iter, const LrSchedule& s) {
  if (iter < 0) throw InvalidConfig("lr_at: negative iteration");
  if (s.warmup < 0 || s.total < s.warmup)
    throw InvalidConfig("lr_at: schedule needs 0 <= warmup <= total");
  if (iter < s.warmup) return s.max_lr * iter / s.warmup;
  if (iter >= s.total) return s.min_lr;
  // Anchored so progress 0 yields exactly max_lr; the total end is exact via
  // the early return above.
  const double progress = static_cast<double>(iter - s.warmup) / (s.total - s.warmup);
  return s.max_lr + 0.5 * (s.min_lr - s.max_lr) * (1.0 - std::cos(std::numbers::pi * progress));
}

template <typename Scalar>
int sample_action(std::span<const Scalar> logits, Rng& rng) {
  if (logits.empty()) throw InvalidConfig("sample_action: empty logits");
  double mx = logits[0];
  for (Scalar v : logits) mx = std::max(mx, static_cast<double>(v));
  std::vector<double> weight(logits.size());
  double total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    weight[i] = std::exp(static_cast<double>(logits[i]) - mx);
    total += weight[i];
  }
  const double u = rng.uniform() * total;
  double acc = 0;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    acc += weight[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weight.size()) - 1;  // u == total under rounding
}

template ModelParams<float> zero_params<float>(const ModelConfig&);
template ModelParams<double> zero_params<double>(const ModelConfig&);
template ModelParams<float> init_params<float>(const ModelConfig&, std::uint64_t);
template ModelParams<double> init_params<double>(const ModelConfig&, std::uint64_t);
template MatX<float> forward<float>(const ModelConfig&, const ModelParams<float>&,
                                    std::span<const TokenSeq>);
template MatX<double> forward<double>(const ModelConfig&, const ModelParams<double>&,
                                      std::span<const TokenSeq>);
template LossResult<float> loss_and_grads<float>(const ModelConfig&, const ModelParams<float>&,
                                                 std::span<const TokenSeq>,
                                                 std::span<const std::uint8_t>);
template LossResult<double> loss_and_grads<double>(const ModelConfig&, const ModelParams<double>&,
                                                   std::span<const TokenSeq>,
                                                   std::span<const std::uint8_t>);
template OptimizerState<float> init_optimizer<float>(const ModelConfig&);
template OptimizerState<double> init_optimizer<double>(const ModelConfig&);
template void adamw_step<float>(const ModelConfig&, ModelParams<float>&, const ModelParams<float>&,
                                OptimizerState<float>&, double, const AdamWConfig&);
template void adamw_step<double>(const ModelConfig&, ModelParams<double>&,
                                 const ModelParams<double>&, OptimizerState<double>&, double,
                                 const AdamWConfig&);
template int sample_action<float>(std::span<const float>, Rng&);
template int sample_action<double>(std::span<const double>, Rng&);

}  // namespace mapf
