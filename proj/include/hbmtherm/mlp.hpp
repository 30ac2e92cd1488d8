#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "hbmtherm/dataset.hpp"
#include "hbmtherm/stack_geometry.hpp"

namespace hbmtherm {

// Feed-forward net shapes used by the surrogate:
//   OneNetTwoOut          shared trunk 512-256-128-64; temperature head is a
//                         linear tap after hidden-1; position branch applies
//                         dropout after hidden-1 and exits after hidden-4
//                         through a bounded (scaled-sigmoid) activation.
//   OneNetTwoOutBaseline  both heads after hidden-4 (ablation variant).
//   TempNet / PosNet      the separate-network pair: 512-256-128 with linear
//                         output, and 512-256-128-64 with dropout + bounded
//                         output.
enum class Arch { OneNetTwoOut, OneNetTwoOutBaseline, TempNet, PosNet };

struct NetSpec {
  Arch arch = Arch::OneNetTwoOut;
  int input_width = kFeatureWidth;
  std::vector<int> hidden;
  int t_tap = 0;          // 1-based hidden layer feeding the T head; 0 = none
  bool p_head = false;
  int dropout_after = 0;  // 1-based hidden layer; 0 = no dropout
  double dropout_p = 0.0;
  double p_output_scale = 1.0;  // sigmoid output scaled to the valid z range
};

NetSpec make_net_spec(Arch arch, int input_width = kFeatureWidth);

void validate(const NetSpec& spec);

// Exact trainable parameter count (weights + biases).
size_t param_count(const NetSpec& spec);

// Hidden-layer weights/biases plus the two 1-wide heads. Head biases are
// kept as 1-vectors so every tensor can be visited uniformly.
struct NetParams {
  std::vector<Eigen::MatrixXd> w;  // w[l]: hidden[l] x fan_in
  std::vector<Eigen::VectorXd> b;
  Eigen::RowVectorXd wt;           // empty when the spec has no T head
  Eigen::VectorXd bt;
  Eigen::RowVectorXd wp;
  Eigen::VectorXd bp;
};

// Kaiming-style uniform fan-in init (bound sqrt(6/fan_in)), zero biases,
// fully determined by the seed.
NetParams init_params(const NetSpec& spec, uint64_t seed);

NetParams zeros_like(const NetParams& p);

// Visit every tensor's storage in a fixed order (weights/biases then heads).
template <typename Fn>
void for_each_tensor(NetParams& p, Fn&& fn) {
  for (auto& m : p.w) fn(m.data(), size_t(m.size()));
  for (auto& v : p.b) fn(v.data(), size_t(v.size()));
  if (p.wt.size()) fn(p.wt.data(), size_t(p.wt.size()));
  if (p.bt.size()) fn(p.bt.data(), size_t(p.bt.size()));
  if (p.wp.size()) fn(p.wp.data(), size_t(p.wp.size()));
  if (p.bp.size()) fn(p.bp.data(), size_t(p.bp.size()));
}

// Exact erf-based GELU, x * Phi(x), and its derivative.
double gelu(double x);
double gelu_derivative(double x);

enum class Mode { Train, Eval };

// Identifies the dropout stream: masks depend on (seed, epoch, step) and the
// row's global position in the epoch order, never on thread partitioning.
struct DropoutKey {
  uint64_t seed = 0;
  uint64_t epoch = 0;
  uint64_t step = 0;
  uint64_t row_offset = 0;  // global index of this block's first row
};

struct ForwardCache {
  std::vector<Eigen::MatrixXd> z;  // pre-activations per hidden layer
  std::vector<Eigen::MatrixXd> h;  // activations (pre-dropout) per layer
  Eigen::MatrixXd dropped;         // post-dropout activation of the dropout layer
  Eigen::MatrixXd mask;            // inverted-dropout mask (0 or 1/(1-p))
  Eigen::VectorXd zp;              // position head pre-activation
};

struct ForwardResult {
  Eigen::VectorXd t;  // one entry per row; empty when the spec has no T head
  Eigen::VectorXd p;
};

// Train mode applies inverted dropout (survivors scaled by 1/(1-p)) so eval
// needs no rescaling; eval ignores the key. Pass a cache to enable backward.
ForwardResult forward(const NetSpec& spec, const NetParams& params,
                      const Eigen::MatrixXd& x, Mode mode, const DropoutKey& key,
                      ForwardCache* cache = nullptr);

// Gradients of the loss w.r.t. every parameter given d(loss)/d(head outputs).
// The cache must come from a train-mode forward over the same x.
NetParams backward(const NetSpec& spec, const NetParams& params,
                   const Eigen::MatrixXd& x, const ForwardCache& cache,
                   const Eigen::VectorXd& d_t, const Eigen::VectorXd& d_p);

struct LossParts {
  double total = 0;
  double mse_t = 0;
  double mse_p = 0;
};

// total = mse_t + w_p * mse_p. Position terms are skipped when pred_p is
// empty (single-output nets). Throws on an empty batch.
LossParts mse_loss(const Eigen::VectorXd& pred_t, const Eigen::VectorXd& true_t,
                   const Eigen::VectorXd& pred_p, const Eigen::VectorXd& true_p,
                   double w_p);

struct AdamState {
  NetParams m, v;
  long long t = 0;
};

AdamState make_adam_state(const NetSpec& spec);

void adam_step(NetParams& params, const NetParams& grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

struct LrSchedule {
  enum class Kind { Constant, Step } kind = Kind::Step;
  double lr0 = 1e-3;
  double gamma = 0.5;
  int step_epochs = 5000;
};

double step_lr(int epoch, const LrSchedule& schedule);

struct TrainConfig {
  LrSchedule schedule;
  int batch_size = 2400;
  int batch_size_two_net = 1000;  // used by the TempNet/PosNet pair
  int epochs = 200000;      // OneNetTwoOut variants
  int epochs_t = 3000;      // TempNet when training the two-net pair
  int epochs_p = 100000;    // PosNet when training the two-net pair
  double w_p = 10.0;
  double dropout_p = 0.2;
  double p_output_scale = 1.0;
  uint64_t seed = 0;
  int history_every = 100;
  int threads = 0;          // 0 = hardware concurrency (capped at 8)
};

struct HistoryRow {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double test_loss = 0;  // NaN when there is no test split
};

struct TrainedNet {
  NetSpec spec;
  NetParams params;
  AdamState adam;
  std::vector<HistoryRow> history;
};

// Normalized tensors grouped by split.
struct TrainData {
  Eigen::MatrixXd x_train, x_test;
  Eigen::VectorXd t_train, t_test;  // normalized temperature labels
  Eigen::VectorXd p_train, p_test;  // normalized position labels
};

TrainData prepare_train_data(const Dataset& dataset);

// Mini-batch loop, shuffled per epoch under the seed; aborts on NaN loss.
// Deterministic for a (seed, data, config) triple regardless of thread count.
TrainedNet train_net(const NetSpec& spec, const TrainData& data, const TrainConfig& cfg);

// Self-contained inference artifact.
struct Checkpoint {
  std::string arch_label;          // "1nn2out", "1nn2out_baseline", "2nn2out"
  std::vector<TrainedNet> nets;    // one, or TempNet followed by PosNet
  NormalizationSpec norm;
  uint64_t config_hash = 0;
};

// arch_label must be one of the labels above.
Checkpoint train_model(const std::string& arch_label, const Dataset& dataset,
                       const TrainConfig& cfg, uint64_t config_hash);

// Versioned text container; save/load round-trips bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct Prediction {
  double t_c = 0;
  double hotspot_z_um = 0;
  int hotspot_layer = 0;
};

// Eval-mode forward plus denormalization; the hotspot layer comes from the
// case's stack geometry.
Prediction predict(const Checkpoint& ckpt, const SampleCase& c,
                   const PresetTable& presets, const GeometryConfig& geo);

}  // namespace hbmtherm
