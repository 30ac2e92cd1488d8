#include "hbmtherm/mlp.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "hbmtherm/rng.hpp"

namespace hbmtherm {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr uint64_t kTagInit = 0x494e4954;  // INIT
constexpr uint64_t kTagDrop = 0x44524f50;  // DROP
}  // namespace

NetSpec make_net_spec(Arch arch, int input_width) {
  NetSpec s;
  s.arch = arch;
  s.input_width = input_width;
  switch (arch) {
    case Arch::OneNetTwoOut:
      s.hidden = {512, 256, 128, 64};
      s.t_tap = 1;
      s.p_head = true;
      s.dropout_after = 1;
      s.dropout_p = 0.2;
      break;
    case Arch::OneNetTwoOutBaseline:
      s.hidden = {512, 256, 128, 64};
      s.t_tap = 4;
      s.p_head = true;
      s.dropout_after = 1;
      s.dropout_p = 0.2;
      break;
    case Arch::TempNet:
      s.hidden = {512, 256, 128};
      s.t_tap = 3;
      s.p_head = false;
      break;
    case Arch::PosNet:
      s.hidden = {512, 256, 128, 64};
      s.t_tap = 0;
      s.p_head = true;
      s.dropout_after = 1;
      s.dropout_p = 0.2;
      break;
  }
  return s;
}

void validate(const NetSpec& spec) {
  if (spec.input_width < 1) throw std::invalid_argument("net spec: input width < 1");
  if (spec.hidden.empty()) throw std::invalid_argument("net spec: no hidden layers");
  for (int h : spec.hidden)
    if (h < 1) throw std::invalid_argument("net spec: hidden width < 1");
  if (spec.t_tap < 0 || spec.t_tap > int(spec.hidden.size()))
    throw std::invalid_argument("net spec: T head taps a missing layer");
  if (spec.t_tap == 0 && !spec.p_head)
    throw std::invalid_argument("net spec: no outputs");
  if (spec.dropout_after < 0 || spec.dropout_after > int(spec.hidden.size()))
    throw std::invalid_argument("net spec: dropout after a missing layer");
  if (spec.dropout_p < 0 || spec.dropout_p >= 1)
    throw std::invalid_argument("net spec: dropout probability outside [0, 1)");
  if (spec.p_head && spec.p_output_scale <= 0)
    throw std::invalid_argument("net spec: output scale must be > 0");
}

size_t param_count(const NetSpec& spec) {
  validate(spec);
  size_t count = 0;
  int fan_in = spec.input_width;
  for (int h : spec.hidden) {
    count += size_t(fan_in) * h + h;
    fan_in = h;
  }
  if (spec.t_tap > 0) count += size_t(spec.hidden[spec.t_tap - 1]) + 1;
  if (spec.p_head) count += size_t(spec.hidden.back()) + 1;
  return count;
}

NetParams init_params(const NetSpec& spec, uint64_t seed) {
  validate(spec);
  Rng rng(Rng::derive(seed, {kTagInit}));
  NetParams p;
  int fan_in = spec.input_width;
  for (int h : spec.hidden) {
    Eigen::MatrixXd w(h, fan_in);
    const double bound = std::sqrt(6.0 / fan_in);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.next_symmetric(bound);
    p.w.push_back(std::move(w));
    p.b.push_back(Eigen::VectorXd::Zero(h));
    fan_in = h;
  }
  if (spec.t_tap > 0) {
    const int width = spec.hidden[spec.t_tap - 1];
    const double bound = std::sqrt(6.0 / width);
    p.wt.resize(width);
    for (int c = 0; c < width; ++c) p.wt(c) = rng.next_symmetric(bound);
    p.bt = Eigen::VectorXd::Zero(1);
  }
  if (spec.p_head) {
    const int width = spec.hidden.back();
    const double bound = std::sqrt(6.0 / width);
    p.wp.resize(width);
    for (int c = 0; c < width; ++c) p.wp(c) = rng.next_symmetric(bound);
    p.bp = Eigen::VectorXd::Zero(1);
  }
  return p;
}

NetParams zeros_like(const NetParams& p) {
  NetParams z;
  for (const auto& w : p.w) z.w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : p.b) z.b.push_back(Eigen::VectorXd::Zero(b.size()));
  if (p.wt.size()) { z.wt = Eigen::RowVectorXd::Zero(p.wt.size()); z.bt = Eigen::VectorXd::Zero(1); }
  if (p.wp.size()) { z.wp = Eigen::RowVectorXd::Zero(p.wp.size()); z.bp = Eigen::VectorXd::Zero(1); }
  return z;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::MatrixXd dropout_mask(int rows, int cols, double p, const DropoutKey& key) {
  Eigen::MatrixXd mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (int r = 0; r < rows; ++r) {
    Rng rng(Rng::derive(key.seed, {kTagDrop, key.epoch, key.step, key.row_offset + r}));
    for (int c = 0; c < cols; ++c)
      mask(r, c) = rng.next_double() < p ? 0.0 : keep_scale;
  }
  return mask;
}

}  // namespace

ForwardResult forward(const NetSpec& spec, const NetParams& params,
                      const Eigen::MatrixXd& x, Mode mode, const DropoutKey& key,
                      ForwardCache* cache) {
  if (x.cols() != spec.input_width)
    throw std::invalid_argument("forward: batch width does not match input width");
  const int layers = int(spec.hidden.size());
  const bool dropout_active =
      mode == Mode::Train && spec.dropout_after > 0 && spec.dropout_p > 0;

  if (cache) {
    cache->z.assign(layers, {});
    cache->h.assign(layers, {});
    cache->mask.resize(0, 0);
    cache->dropped.resize(0, 0);
  }

  ForwardResult out;
  Eigen::MatrixXd a = x;  // chain input to the next layer
  Eigen::MatrixXd h_tap;  // pre-dropout activation the T head reads
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = (a * params.w[l].transpose()).rowwise() + params.b[l].transpose();
    Eigen::MatrixXd h = z.unaryExpr([](double v) { return gelu(v); });
    if (cache) {
      cache->z[l] = z;
      cache->h[l] = h;
    }
    if (spec.t_tap == l + 1) h_tap = h;
    if (spec.dropout_after == l + 1 && dropout_active) {
      Eigen::MatrixXd mask = dropout_mask(int(h.rows()), int(h.cols()), spec.dropout_p, key);
      a = h.cwiseProduct(mask);
      if (cache) {
        cache->mask = std::move(mask);
        cache->dropped = a;
      }
    } else {
      a = std::move(h);
    }
  }

  if (spec.t_tap > 0) out.t = h_tap * params.wt.transpose() + Eigen::VectorXd::Constant(x.rows(), params.bt(0));
  if (spec.p_head) {
    Eigen::VectorXd zp = a * params.wp.transpose() + Eigen::VectorXd::Constant(x.rows(), params.bp(0));
    if (cache) cache->zp = zp;
    out.p = zp.unaryExpr([&](double v) { return spec.p_output_scale * sigmoid(v); });
  }
  return out;
}

NetParams backward(const NetSpec& spec, const NetParams& params,
                   const Eigen::MatrixXd& x, const ForwardCache& cache,
                   const Eigen::VectorXd& d_t, const Eigen::VectorXd& d_p) {
  const int layers = int(spec.hidden.size());
  if (int(cache.z.size()) != layers)
    throw std::invalid_argument("backward: stale or missing forward cache");
  NetParams g = zeros_like(params);

  // Chain input of layer l (post-dropout where applicable).
  auto chain_input = [&](int l) -> const Eigen::MatrixXd& {
    if (l == 0) return x;
    if (spec.dropout_after == l && cache.mask.size()) return cache.dropped;
    return cache.h[l - 1];
  };

  Eigen::MatrixXd d_chain;  // gradient w.r.t. the chain activation after layer `layers`
  if (spec.p_head) {
    if (d_p.size() != x.rows())
      throw std::invalid_argument("backward: position gradient size mismatch");
    Eigen::VectorXd dzp(d_p.size());
    for (int i = 0; i < d_p.size(); ++i) {
      const double s = sigmoid(cache.zp(i));
      dzp(i) = d_p(i) * spec.p_output_scale * s * (1.0 - s);
    }
    g.wp = dzp.transpose() * chain_input(layers);
    g.bp(0) = dzp.sum();
    d_chain = dzp * params.wp;
  } else {
    d_chain = Eigen::MatrixXd::Zero(x.rows(), spec.hidden.back());
  }

  if (spec.t_tap > 0) {
    if (d_t.size() != x.rows())
      throw std::invalid_argument("backward: temperature gradient size mismatch");
    g.wt = d_t.transpose() * cache.h[spec.t_tap - 1];
    g.bt(0) = d_t.sum();
  }

  for (int l = layers - 1; l >= 0; --l) {
    // d_chain holds the gradient w.r.t. this layer's chain output; map it
    // through the dropout mask back to the raw activation when needed.
    Eigen::MatrixXd d_h;
    if (spec.dropout_after == l + 1 && cache.mask.size())
      d_h = d_chain.cwiseProduct(cache.mask);
    else
      d_h = std::move(d_chain);
    if (spec.t_tap == l + 1) d_h.noalias() += d_t * params.wt;  // tap reads pre-dropout
    Eigen::MatrixXd dz =
        d_h.cwiseProduct(cache.z[l].unaryExpr([](double v) { return gelu_derivative(v); }));
    g.w[l] = dz.transpose() * chain_input(l);
    g.b[l] = dz.colwise().sum().transpose();
    if (l > 0) d_chain.noalias() = dz * params.w[l];
  }
  return g;
}

LossParts mse_loss(const Eigen::VectorXd& pred_t, const Eigen::VectorXd& true_t,
                   const Eigen::VectorXd& pred_p, const Eigen::VectorXd& true_p,
                   double w_p) {
  const Eigen::Index n = std::max(pred_t.size(), pred_p.size());
  if (n == 0) throw std::invalid_argument("loss: empty batch");
  LossParts parts;
  if (pred_t.size()) {
    if (pred_t.size() != true_t.size())
      throw std::invalid_argument("loss: temperature lengths differ");
    parts.mse_t = (pred_t - true_t).squaredNorm() / double(pred_t.size());
  }
  if (pred_p.size()) {
    if (pred_p.size() != true_p.size())
      throw std::invalid_argument("loss: position lengths differ");
    parts.mse_p = (pred_p - true_p).squaredNorm() / double(pred_p.size());
  }
  parts.total = parts.mse_t + w_p * parts.mse_p;
  return parts;
}

AdamState make_adam_state(const NetSpec& spec) {
  NetParams shape = init_params(spec, 0);
  AdamState s;
  s.m = zeros_like(shape);
  s.v = zeros_like(shape);
  s.t = 0;
  return s;
}

void adam_step(NetParams& params, const NetParams& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(beta2, double(state.t));
  NetParams& m = state.m;
  NetParams& v = state.v;
  auto update = [&](double* p, const double* g, double* mp, double* vp, size_t n) {
    for (size_t i = 0; i < n; ++i) {
      mp[i] = beta1 * mp[i] + (1.0 - beta1) * g[i];
      vp[i] = beta2 * vp[i] + (1.0 - beta2) * g[i] * g[i];
      const double m_hat = mp[i] / bc1;
      const double v_hat = vp[i] / bc2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  };
  for (size_t l = 0; l < params.w.size(); ++l) {
    update(params.w[l].data(), grads.w[l].data(), m.w[l].data(), v.w[l].data(),
           size_t(params.w[l].size()));
    update(params.b[l].data(), grads.b[l].data(), m.b[l].data(), v.b[l].data(),
           size_t(params.b[l].size()));
  }
  if (params.wt.size()) {
    update(params.wt.data(), grads.wt.data(), m.wt.data(), v.wt.data(),
           size_t(params.wt.size()));
    update(params.bt.data(), grads.bt.data(), m.bt.data(), v.bt.data(), 1);
  }
  if (params.wp.size()) {
    update(params.wp.data(), grads.wp.data(), m.wp.data(), v.wp.data(),
           size_t(params.wp.size()));
    update(params.bp.data(), grads.bp.data(), m.bp.data(), v.bp.data(), 1);
  }
}

double step_lr(int epoch, const LrSchedule& schedule) {
  if (epoch < 0) throw std::invalid_argument("step_lr: negative epoch");
  if (schedule.kind == LrSchedule::Kind::Constant) return schedule.lr0;
  const int halvings = epoch / schedule.step_epochs;
  return schedule.lr0 * std::pow(schedule.gamma, double(halvings));
}

Prediction predict(const Checkpoint& ckpt, const SampleCase& c,
                   const PresetTable& presets, const GeometryConfig& geo) {
  const FeatureVector raw = encode_features(c, presets);
  const FeatureVector norm = normalize_features(raw, ckpt.norm);
  Eigen::MatrixXd x(1, kFeatureWidth);
  for (int i = 0; i < kFeatureWidth; ++i) x(0, i) = norm[i];

  double t_norm = 0, p_norm = 0;
  for (const auto& net : ckpt.nets) {
    ForwardResult r = forward(net.spec, net.params, x, Mode::Eval, {});
    if (r.t.size()) t_norm = r.t(0);
    if (r.p.size()) p_norm = r.p(0);
  }

  Prediction pred;
  pred.t_c = (t_norm - ckpt.norm.t_offset) / ckpt.norm.t_scale;
  pred.hotspot_z_um = (p_norm - ckpt.norm.z_offset) / ckpt.norm.z_scale;
  pred.hotspot_layer = build_stack(c, geo, presets).layer_of(pred.hotspot_z_um);
  return pred;
}

}  // namespace hbmtherm
