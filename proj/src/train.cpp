#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "hbmtherm/mlp.hpp"
#include "hbmtherm/rng.hpp"

namespace hbmtherm {

namespace {

constexpr uint64_t kTagEpoch = 0x45504f43;  // EPOC
constexpr int kBlockRows = 256;  // fixed block size keeps reductions ordered
                                 // and results independent of thread count

void accumulate(NetParams& into, const NetParams& from) {
  for (size_t l = 0; l < into.w.size(); ++l) {
    into.w[l] += from.w[l];
    into.b[l] += from.b[l];
  }
  if (into.wt.size()) { into.wt += from.wt; into.bt += from.bt; }
  if (into.wp.size()) { into.wp += from.wp; into.bp += from.bp; }
}

struct BlockOutput {
  NetParams grads;
  double sse_t = 0;
  double sse_p = 0;
};

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return int(std::clamp(hw, 1u, 8u));
}

// Evaluation-mode loss over a whole split, computed in fixed block order.
LossParts eval_loss(const NetSpec& spec, const NetParams& params,
                    const Eigen::MatrixXd& x, const Eigen::VectorXd& yt,
                    const Eigen::VectorXd& yp, double w_p) {
  const int n = int(x.rows());
  double sse_t = 0, sse_p = 0;
  for (int start = 0; start < n; start += kBlockRows) {
    const int rows = std::min(kBlockRows, n - start);
    ForwardResult r = forward(spec, params, x.middleRows(start, rows), Mode::Eval, {});
    if (r.t.size()) sse_t += (r.t - yt.segment(start, rows)).squaredNorm();
    if (r.p.size()) sse_p += (r.p - yp.segment(start, rows)).squaredNorm();
  }
  LossParts parts;
  parts.mse_t = spec.t_tap > 0 ? sse_t / n : 0;
  parts.mse_p = spec.p_head ? sse_p / n : 0;
  parts.total = parts.mse_t + w_p * parts.mse_p;
  return parts;
}

}  // namespace

TrainData prepare_train_data(const Dataset& dataset) {
  const auto& norm = dataset.norm;
  size_t n_train = 0, n_test = 0;
  for (const auto& row : dataset.rows) (row.split == 1 ? n_test : n_train) += 1;
  if (n_train == 0) throw std::invalid_argument("training data: no train rows");

  TrainData d;
  d.x_train.resize(n_train, kFeatureWidth);
  d.t_train.resize(n_train);
  d.p_train.resize(n_train);
  d.x_test.resize(n_test, kFeatureWidth);
  d.t_test.resize(n_test);
  d.p_test.resize(n_test);
  size_t it = 0, ie = 0;
  for (const auto& row : dataset.rows) {
    const FeatureVector f = normalize_features(row.raw, norm);
    const double t = row.t_max_c * norm.t_scale + norm.t_offset;
    const double p = row.hotspot_z_um * norm.z_scale + norm.z_offset;
    if (row.split == 1) {
      for (int c = 0; c < kFeatureWidth; ++c) d.x_test(ie, c) = f[c];
      d.t_test(ie) = t;
      d.p_test(ie) = p;
      ++ie;
    } else {
      for (int c = 0; c < kFeatureWidth; ++c) d.x_train(it, c) = f[c];
      d.t_train(it) = t;
      d.p_train(it) = p;
      ++it;
    }
  }
  return d;
}

TrainedNet train_net(const NetSpec& spec, const TrainData& data, const TrainConfig& cfg) {
  validate(spec);
  const int n = int(data.x_train.rows());
  if (n == 0) throw std::invalid_argument("train: empty training split");
  const int batch = std::clamp(cfg.batch_size, 1, n);
  const int threads = resolve_threads(cfg.threads);
  // The position weight belongs to the combined two-head loss; a lone
  // position net trains on its own plain MSE.
  const double w_p = (spec.p_head && spec.t_tap > 0) ? cfg.w_p : 1.0;

  TrainedNet net;
  net.spec = spec;
  net.params = init_params(spec, cfg.seed);
  net.adam = make_adam_state(spec);

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  Eigen::MatrixXd xb(batch, spec.input_width);
  Eigen::VectorXd tb(batch), pb(batch);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = step_lr(epoch, cfg.schedule);
    Rng shuffle_rng(Rng::derive(cfg.seed, {kTagEpoch, uint64_t(epoch)}));
    shuffle_rng.shuffle(order);

    double epoch_sse_t = 0, epoch_sse_p = 0;
    for (int offset = 0, step = 0; offset < n; offset += batch, ++step) {
      const int rows = std::min(batch, n - offset);
      for (int r = 0; r < rows; ++r) {
        const int src = order[offset + r];
        xb.row(r) = data.x_train.row(src);
        tb(r) = data.t_train(src);
        pb(r) = data.p_train(src);
      }

      const int blocks = (rows + kBlockRows - 1) / kBlockRows;
      std::vector<BlockOutput> outputs(blocks);
      auto run_block = [&](int blk) {
        const int start = blk * kBlockRows;
        const int brows = std::min(kBlockRows, rows - start);
        DropoutKey key{cfg.seed, uint64_t(epoch), uint64_t(step),
                       uint64_t(offset + start)};
        ForwardCache cache;
        ForwardResult fw = forward(spec, net.params, xb.middleRows(start, brows),
                                   Mode::Train, key, &cache);
        Eigen::VectorXd d_t, d_p;
        BlockOutput& out = outputs[blk];
        if (fw.t.size()) {
          Eigen::VectorXd err = fw.t - tb.segment(start, brows);
          out.sse_t = err.squaredNorm();
          d_t = (2.0 / rows) * err;
        }
        if (fw.p.size()) {
          Eigen::VectorXd err = fw.p - pb.segment(start, brows);
          out.sse_p = err.squaredNorm();
          d_p = (2.0 * w_p / rows) * err;
        }
        out.grads = backward(spec, net.params, xb.middleRows(start, brows), cache, d_t, d_p);
      };

      if (threads <= 1 || blocks == 1) {
        for (int blk = 0; blk < blocks; ++blk) run_block(blk);
      } else {
        std::vector<std::thread> pool;
        const int used = std::min(threads, blocks);
        for (int t = 0; t < used; ++t)
          pool.emplace_back([&, t] {
            for (int blk = t; blk < blocks; blk += used) run_block(blk);
          });
        for (auto& th : pool) th.join();
      }

      // Ordered reduction: identical result for any thread count.
      NetParams grads = std::move(outputs[0].grads);
      for (int blk = 1; blk < blocks; ++blk) accumulate(grads, outputs[blk].grads);
      for (const auto& out : outputs) {
        epoch_sse_t += out.sse_t;
        epoch_sse_p += out.sse_p;
      }
      adam_step(net.params, grads, net.adam, lr);
    }

    const double train_loss =
        epoch_sse_t / n + (spec.p_head ? w_p * epoch_sse_p / n : 0.0);
    if (!std::isfinite(train_loss))
      throw std::runtime_error("train: loss diverged (NaN) at epoch " +
                               std::to_string(epoch));
    if (epoch % cfg.history_every == 0 || epoch == cfg.epochs - 1) {
      HistoryRow row;
      row.epoch = epoch;
      row.lr = lr;
      row.train_loss = train_loss;
      row.test_loss = std::numeric_limits<double>::quiet_NaN();
      if (data.x_test.rows() > 0)
        row.test_loss =
            eval_loss(spec, net.params, data.x_test, data.t_test, data.p_test, w_p).total;
      net.history.push_back(row);
    }
  }
  return net;
}

Checkpoint train_model(const std::string& arch_label, const Dataset& dataset,
                       const TrainConfig& cfg, uint64_t config_hash) {
  TrainData data = prepare_train_data(dataset);
  Checkpoint ckpt;
  ckpt.arch_label = arch_label;
  ckpt.norm = dataset.norm;
  ckpt.config_hash = config_hash;

  auto customized = [&](Arch arch) {
    NetSpec spec = make_net_spec(arch);
    if (spec.dropout_after > 0) spec.dropout_p = cfg.dropout_p;
    spec.p_output_scale = cfg.p_output_scale;
    return spec;
  };

  if (arch_label == "1nn2out" || arch_label == "1nn2out_baseline") {
    const Arch arch = arch_label == "1nn2out" ? Arch::OneNetTwoOut
                                              : Arch::OneNetTwoOutBaseline;
    ckpt.nets.push_back(train_net(customized(arch), data, cfg));
  } else if (arch_label == "2nn2out") {
    TrainConfig cfg_t = cfg;
    cfg_t.batch_size = cfg.batch_size_two_net;
    cfg_t.epochs = cfg.epochs_t;
    cfg_t.schedule.kind = LrSchedule::Kind::Constant;
    cfg_t.seed = Rng::derive(cfg.seed, {0x544e4554ull});
    ckpt.nets.push_back(train_net(customized(Arch::TempNet), data, cfg_t));
    TrainConfig cfg_p = cfg;
    cfg_p.batch_size = cfg.batch_size_two_net;
    cfg_p.epochs = cfg.epochs_p;
    cfg_p.schedule.kind = LrSchedule::Kind::Constant;
    cfg_p.seed = Rng::derive(cfg.seed, {0x504e4554ull});
    ckpt.nets.push_back(train_net(customized(Arch::PosNet), data, cfg_p));
  } else {
    throw std::invalid_argument("unknown architecture: " + arch_label);
  }
  return ckpt;
}

}  // namespace hbmtherm
