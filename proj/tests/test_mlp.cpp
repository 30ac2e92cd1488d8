#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "hbmtherm/mlp.hpp"
#include "hbmtherm/rng.hpp"
#include "hbmtherm/text_io.hpp"

using namespace hbmtherm;

namespace {

const PresetTable& presets() {
  static PresetTable table =
      PresetTable::load(std::string(HBMTHERM_SOURCE_DIR) + "/data/tsv_presets.csv");
  return table;
}

NetSpec toy_spec(bool dropout) {
  NetSpec s;
  s.arch = Arch::OneNetTwoOut;
  s.input_width = 5;
  s.hidden = {8, 6, 5, 4};
  s.t_tap = 1;
  s.p_head = true;
  s.dropout_after = dropout ? 1 : 0;
  s.dropout_p = dropout ? 0.2 : 0.0;
  s.p_output_scale = 1.0;
  return s;
}

Eigen::MatrixXd random_batch(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) x(r, c) = rng.next_symmetric(1.0);
  return x;
}

// Loss of the toy two-head net for finite differencing.
double loss_of(const NetSpec& spec, const NetParams& params, const Eigen::MatrixXd& x,
               const Eigen::VectorXd& yt, const Eigen::VectorXd& yp, double w_p) {
  const ForwardResult fw = forward(spec, params, x, Mode::Eval, {});
  return mse_loss(fw.t, yt, fw.p, yp, w_p).total;
}

// Simpson quadrature of the standard normal density on [0, x].
double normal_cdf_quadrature(double x) {
  const int n = 2000;
  const double h = x / n;
  auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2 * 3.14159265358979323846); };
  double acc = pdf(0) + pdf(x);
  for (int i = 1; i < n; ++i) acc += pdf(i * h) * (i % 2 ? 4.0 : 2.0);
  return 0.5 + acc * h / 3.0;
}

Dataset one_row_dataset() {
  ParameterSpace space;
  SamplePlan plan;
  plan.seed = 500;
  plan.counts = {{4, 1}};
  const SampleCase c = lhs_sample(space, plan)[0];
  Dataset d;
  d.norm = default_normalization();
  DatasetRow row;
  row.case_id = c.case_id;
  row.raw = encode_features(c, presets());
  row.t_max_c = 90.0;
  row.hotspot_z_um = 420.0;
  row.split = 0;
  d.rows.push_back(row);
  return d;
}

}  // namespace

TEST_CASE("gelu") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(std::abs(gelu(10.0) - 10.0) < 1e-8);
  CHECK(std::abs(gelu(-10.0)) < 1e-8);
  // x * Phi(x) with Phi from an independent quadrature.
  for (double x : {0.3, 1.0, 1.7, -0.8}) {
    const double phi = x >= 0 ? normal_cdf_quadrature(x) : 1.0 - normal_cdf_quadrature(-x);
    CHECK(gelu(x) == doctest::Approx(x * phi).epsilon(1e-9));
  }
  CHECK(gelu(1.0) == doctest::Approx(0.8413447461).epsilon(1e-9));
  // Derivative by central differences.
  for (double x : {-2.0, -0.5, 0.0, 0.9, 3.0}) {
    const double h = 1e-6;
    const double fd = (gelu(x + h) - gelu(x - h)) / (2 * h);
    CHECK(gelu_derivative(x) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("parameter counts") {
  CHECK(param_count(make_net_spec(Arch::OneNetTwoOut, 28)) == 187906);

  NetSpec tiny;
  tiny.arch = Arch::TempNet;
  tiny.input_width = 2;
  tiny.hidden = {2};
  tiny.t_tap = 1;
  tiny.p_head = false;
  CHECK(param_count(tiny) == 9);  // 2*2 + 2 weights/biases, 2 + 1 head

  const size_t one_net = param_count(make_net_spec(Arch::OneNetTwoOut, 28));
  const size_t pair = param_count(make_net_spec(Arch::TempNet, 28)) +
                      param_count(make_net_spec(Arch::PosNet, 28));
  CHECK(one_net < pair);
}

TEST_CASE("forward basics") {
  const NetSpec spec = toy_spec(false);
  SUBCASE("zero parameters: linear head is zero, bounded head sits mid-range") {
    NetParams p = init_params(spec, 1);
    for_each_tensor(p, [](double* data, size_t n) { std::fill(data, data + n, 0.0); });
    const Eigen::MatrixXd x = random_batch(3, spec.input_width, 2);
    const ForwardResult fw = forward(spec, p, x, Mode::Eval, {});
    for (int i = 0; i < 3; ++i) {
      CHECK(fw.t(i) == 0.0);
      CHECK(fw.p(i) == doctest::Approx(0.5 * spec.p_output_scale));
    }
  }
  SUBCASE("train and eval agree when dropout is disabled") {
    const NetParams p = init_params(spec, 3);
    const Eigen::MatrixXd x = random_batch(4, spec.input_width, 4);
    const ForwardResult train_fw = forward(spec, p, x, Mode::Train, {1, 2, 3, 0});
    const ForwardResult eval_fw = forward(spec, p, x, Mode::Eval, {});
    CHECK((train_fw.t - eval_fw.t).cwiseAbs().maxCoeff() == 0.0);
    CHECK((train_fw.p - eval_fw.p).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("deterministic under a fixed key") {
    const NetSpec d = toy_spec(true);
    const NetParams p = init_params(d, 3);
    const Eigen::MatrixXd x = random_batch(4, d.input_width, 4);
    const ForwardResult a = forward(d, p, x, Mode::Train, {7, 1, 2, 16});
    const ForwardResult b = forward(d, p, x, Mode::Train, {7, 1, 2, 16});
    CHECK((a.p - b.p).cwiseAbs().maxCoeff() == 0.0);
    const ForwardResult other = forward(d, p, x, Mode::Train, {7, 1, 3, 16});
    CHECK((a.p - other.p).cwiseAbs().maxCoeff() > 0.0);
  }
  SUBCASE("width mismatch throws") {
    const NetParams p = init_params(spec, 3);
    CHECK_THROWS_AS(forward(spec, p, random_batch(2, 3, 5), Mode::Eval, {}),
                    std::invalid_argument);
  }
}

TEST_CASE("inverted dropout keeps the activation expectation") {
  NetSpec spec = toy_spec(true);
  const NetParams p = init_params(spec, 11);
  const Eigen::MatrixXd x = random_batch(1, spec.input_width, 12);

  // Raw first-layer activation (eval path).
  ForwardCache cache;
  forward(spec, p, x, Mode::Eval, {}, &cache);
  const Eigen::MatrixXd h1 = cache.h[0];

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(1, spec.hidden[0]);
  const int trials = 10000;
  for (int trial = 0; trial < trials; ++trial) {
    ForwardCache tc;
    forward(spec, p, x, Mode::Train, {99, uint64_t(trial), 0, 0}, &tc);
    mean += tc.dropped;
  }
  mean /= double(trials);
  for (int u = 0; u < spec.hidden[0]; ++u) {
    if (std::abs(h1(0, u)) < 0.05) continue;  // relative tolerance needs signal
    CHECK(mean(0, u) == doctest::Approx(h1(0, u)).epsilon(0.02));
  }
}

TEST_CASE("loss") {
  Eigen::VectorXd a(3), b(3);
  a << 1, 2, 3;
  b << 1, 2, 3;
  SUBCASE("perfect predictions") {
    const LossParts parts = mse_loss(a, b, a, b, 10.0);
    CHECK(parts.total == 0.0);
    CHECK(parts.mse_t == 0.0);
    CHECK(parts.mse_p == 0.0);
  }
  SUBCASE("weighted combination") {
    // mse_t = 0.2 and mse_p = 0.05 combine to 0.7 at weight 10.
    Eigen::VectorXd pt(1), tt(1), pp(1), tp(1);
    pt << std::sqrt(0.2);
    tt << 0;
    pp << std::sqrt(0.05);
    tp << 0;
    const LossParts parts = mse_loss(pt, tt, pp, tp, 10.0);
    CHECK(parts.total == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(parts.total == parts.mse_t + 10.0 * parts.mse_p);  // exact identity
  }
  SUBCASE("zero weight reduces to the temperature term") {
    Eigen::VectorXd pp(3);
    pp << 9, 9, 9;
    const LossParts parts = mse_loss(a, b, pp, b, 0.0);
    CHECK(parts.total == parts.mse_t);
  }
  SUBCASE("empty batch throws") {
    Eigen::VectorXd empty;
    CHECK_THROWS_AS(mse_loss(empty, empty, empty, empty, 1.0), std::invalid_argument);
  }
}

TEST_CASE("backward matches central finite differences") {
  const NetSpec spec = toy_spec(false);  // dropout off for differencing
  NetParams params = init_params(spec, 21);
  const int rows = 3;
  const Eigen::MatrixXd x = random_batch(rows, spec.input_width, 22);
  const Eigen::VectorXd yt = random_batch(rows, 1, 23).col(0);
  const Eigen::VectorXd yp = random_batch(rows, 1, 24).col(0) * 0.3 + Eigen::VectorXd::Constant(rows, 0.5);
  const double w_p = 10.0;

  ForwardCache cache;
  const ForwardResult fw = forward(spec, params, x, Mode::Train, {}, &cache);
  const Eigen::VectorXd d_t = (2.0 / rows) * (fw.t - yt);
  const Eigen::VectorXd d_p = (2.0 * w_p / rows) * (fw.p - yp);
  NetParams grads = backward(spec, params, x, cache, d_t, d_p);

  std::vector<std::pair<double*, size_t>> param_tensors, grad_tensors;
  for_each_tensor(params, [&](double* d, size_t n) { param_tensors.push_back({d, n}); });
  for_each_tensor(grads, [&](double* d, size_t n) { grad_tensors.push_back({d, n}); });
  REQUIRE(param_tensors.size() == grad_tensors.size());

  const double h = 1e-5;
  for (size_t t = 0; t < param_tensors.size(); ++t) {
    auto [data, n] = param_tensors[t];
    for (size_t i = 0; i < n; ++i) {
      const double save = data[i];
      data[i] = save + h;
      const double up = loss_of(spec, params, x, yt, yp, w_p);
      data[i] = save - h;
      const double down = loss_of(spec, params, x, yt, yp, w_p);
      data[i] = save;
      const double fd = (up - down) / (2 * h);
      const double an = grad_tensors[t].first[i];
      CHECK(std::abs(an - fd) <= 1e-4 * std::max(std::abs(fd), 1e-6));
    }
  }
}

TEST_CASE("backward edge behaviour") {
  const NetSpec spec = toy_spec(false);
  NetParams params = init_params(spec, 31);
  const Eigen::MatrixXd x = random_batch(2, spec.input_width, 32);
  ForwardCache cache;
  forward(spec, params, x, Mode::Train, {}, &cache);

  SUBCASE("zero loss gradient gives zero parameter gradients") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    NetParams grads = backward(spec, params, x, cache, zero, zero);
    for_each_tensor(grads, [](double* d, size_t n) {
      for (size_t i = 0; i < n; ++i) CHECK(d[i] == 0.0);
    });
  }
  SUBCASE("doubling the position weight doubles position-only gradients") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd d_p = random_batch(2, 1, 33).col(0);
    NetParams g1 = backward(spec, params, x, cache, zero, d_p);
    NetParams g2 = backward(spec, params, x, cache, zero, 2.0 * d_p);
    // Temperature head untouched, every other tensor exactly doubled.
    CHECK(g1.wt.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g2.wt.cwiseAbs().maxCoeff() == 0.0);
    for (size_t l = 0; l < g1.w.size(); ++l)
      CHECK((2.0 * g1.w[l] - g2.w[l]).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((2.0 * g1.wp - g2.wp).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("adam") {
  NetSpec spec;
  spec.arch = Arch::TempNet;
  spec.input_width = 2;
  spec.hidden = {3};
  spec.t_tap = 1;
  SUBCASE("zero gradients leave parameters unchanged") {
    NetParams p = init_params(spec, 41);
    const NetParams before = p;
    NetParams zero = zeros_like(p);
    AdamState state = make_adam_state(spec);
    adam_step(p, zero, state, 0.001);
    for (size_t l = 0; l < p.w.size(); ++l)
      CHECK((p.w[l] - before.w[l]).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("first step moves every parameter by about the learning rate") {
    NetParams p = init_params(spec, 42);
    const NetParams before = p;
    NetParams grads = zeros_like(p);
    Rng rng(43);
    for_each_tensor(grads, [&](double* d, size_t n) {
      for (size_t i = 0; i < n; ++i) d[i] = rng.next_symmetric(3.0);
    });
    AdamState state = make_adam_state(spec);
    const double lr = 0.01;
    adam_step(p, grads, state, lr);
    std::vector<std::pair<double*, size_t>> b, a, g;
    for_each_tensor(const_cast<NetParams&>(before), [&](double* d, size_t n) { b.push_back({d, n}); });
    for_each_tensor(p, [&](double* d, size_t n) { a.push_back({d, n}); });
    for_each_tensor(grads, [&](double* d, size_t n) { g.push_back({d, n}); });
    for (size_t t = 0; t < a.size(); ++t)
      for (size_t i = 0; i < a[t].second; ++i) {
        if (std::abs(g[t].first[i]) < 1e-3) continue;
        const double delta = std::abs(a[t].first[i] - b[t].first[i]);
        CHECK(delta == doctest::Approx(lr).epsilon(1e-4));
      }
  }
  SUBCASE("descends a quadratic bowl monotonically after warm-up") {
    NetParams p = init_params(spec, 44);
    AdamState state = make_adam_state(spec);
    auto value = [&] {
      double acc = 0;
      for_each_tensor(p, [&](double* d, size_t n) {
        for (size_t i = 0; i < n; ++i) acc += d[i] * d[i];
      });
      return acc;
    };
    double prev = value();
    double at10 = 0;
    for (int step = 0; step < 100; ++step) {
      NetParams grads = zeros_like(p);
      std::vector<double*> src;
      // gradient of 0.5*sum(p^2) is p itself
      std::vector<std::pair<double*, size_t>> pt, gt;
      for_each_tensor(p, [&](double* d, size_t n) { pt.push_back({d, n}); });
      for_each_tensor(grads, [&](double* d, size_t n) { gt.push_back({d, n}); });
      for (size_t t = 0; t < pt.size(); ++t)
        for (size_t i = 0; i < pt[t].second; ++i) gt[t].first[i] = pt[t].first[i];
      adam_step(p, grads, state, 0.01);
      const double now = value();
      if (step == 10) at10 = now;
      if (step > 10) CHECK(now < prev);
      prev = now;
    }
    CHECK(prev < at10);
  }
}

TEST_CASE("learning-rate schedule") {
  LrSchedule s;  // step, lr0 1e-3, gamma 0.5, every 5000
  CHECK(step_lr(0, s) == 0.001);
  CHECK(step_lr(4999, s) == 0.001);
  CHECK(step_lr(5000, s) == 0.0005);
  CHECK(step_lr(9999, s) == 0.0005);
  CHECK(step_lr(10000, s) == 0.00025);
  CHECK(step_lr(15000, s) == 0.000125);
  s.kind = LrSchedule::Kind::Constant;
  for (int e : {0, 1234, 99999}) CHECK(step_lr(e, s) == 0.001);
  CHECK_THROWS_AS(step_lr(-1, s), std::invalid_argument);
}

TEST_CASE("single-sample memorization") {
  Dataset d = one_row_dataset();
  TrainConfig cfg;
  cfg.schedule.kind = LrSchedule::Kind::Constant;
  cfg.schedule.lr0 = 1e-3;
  cfg.batch_size = 1;
  cfg.epochs = 3000;
  cfg.seed = 7;
  cfg.history_every = 500;
  cfg.threads = 1;
  const Checkpoint ckpt = train_model("1nn2out", d, cfg, 0);
  CHECK(ckpt.nets[0].history.back().train_loss < 1e-6);

  // Inference reproduces the memorized labels.
  GeometryConfig geo;
  const SampleCase c = decode_features(d.rows[0].raw, presets());
  const Prediction pred = predict(ckpt, c, presets(), geo);
  CHECK(std::abs(pred.t_c - 90.0) * d.norm.t_scale < 1e-3);
  CHECK(std::abs(pred.hotspot_z_um - 420.0) * d.norm.z_scale < 1e-3);
  CHECK(pred.hotspot_layer == build_stack(c, geo, presets()).layer_of(420.0));
}

TEST_CASE("training determinism across reruns and thread counts") {
  ParameterSpace space;
  SamplePlan plan;
  plan.seed = 600;
  plan.counts = {{2, 30}, {4, 30}};
  Dataset d;
  d.norm = default_normalization();
  Rng rng(601);
  for (const auto& c : lhs_sample(space, plan)) {
    DatasetRow row;
    row.case_id = c.case_id;
    row.raw = encode_features(c, presets());
    row.t_max_c = 40 + rng.next_double() * 100;
    row.hotspot_z_um = rng.next_double() * 800;
    d.rows.push_back(row);
  }
  shuffle_split(d, 602);

  TrainConfig cfg;
  cfg.batch_size = 24;  // several blocks per step once rows < 256 pad away
  cfg.epochs = 12;
  cfg.seed = 603;
  cfg.history_every = 4;
  const std::string a_path =
      (std::filesystem::temp_directory_path() / "hbmtherm_ckpt_a.txt").string();
  const std::string b_path =
      (std::filesystem::temp_directory_path() / "hbmtherm_ckpt_b.txt").string();

  cfg.threads = 1;
  save_checkpoint(train_model("1nn2out", d, cfg, 77), a_path);
  cfg.threads = 2;
  save_checkpoint(train_model("1nn2out", d, cfg, 77), b_path);
  CHECK(read_file(a_path) == read_file(b_path));

  // Round trip: loading and re-saving is byte-identical.
  const Checkpoint loaded = load_checkpoint(a_path);
  save_checkpoint(loaded, b_path);
  CHECK(read_file(a_path) == read_file(b_path));
  CHECK(loaded.norm.canonical_text() == d.norm.canonical_text());
}

TEST_CASE("divergence guard") {
  Dataset d = one_row_dataset();
  TrainConfig cfg;
  cfg.schedule.kind = LrSchedule::Kind::Constant;
  cfg.schedule.lr0 = 1e18;  // absurd step size forces non-finite loss
  cfg.batch_size = 1;
  cfg.epochs = 2000;
  cfg.seed = 1;
  cfg.threads = 1;
  CHECK_THROWS_AS(train_model("1nn2out", d, cfg, 0), std::runtime_error);
}
