#include "hbmtherm/pipeline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "hbmtherm/errors.hpp"
#include "hbmtherm/rng.hpp"
#include "hbmtherm/text_io.hpp"

namespace hbmtherm {

namespace {
constexpr uint64_t kTagGenerate = 0x47454e;   // GEN
constexpr uint64_t kTagSplit = 0x53504c;      // SPL
constexpr uint64_t kTagTrain = 0x545249;      // TRI
constexpr uint64_t kTagEnergy = 0x454e45;     // ENE
constexpr uint64_t kTagOracle = 0x4f5241;     // ORA
}  // namespace

VoxelGrid make_slab_grid(int nz, double thickness_um, double k, double q_w_m3,
                         double htc_bottom, double htc_top, double ambient_c) {
  VoxelGrid g;
  g.nx = 1;
  g.ny = 1;
  g.nz = nz;
  g.dx_um = 1000;
  g.dy_um = 1000;
  const double dz = thickness_um / nz;
  for (int i = 0; i < nz; ++i) {
    g.dz_um.push_back(dz);
    g.z_center_um.push_back((i + 0.5) * dz);
  }
  g.kx.assign(size_t(nz), k);
  g.ky.assign(size_t(nz), k);
  g.kz.assign(size_t(nz), k);
  g.source_w_m3.assign(size_t(nz), q_w_m3);
  g.zone_of_layer.assign(size_t(nz), 0);
  g.htc_bottom = htc_bottom;
  g.htc_top = htc_top;
  g.ambient_c = ambient_c;
  return g;
}

double analytic_slab_temperature(double z_um, double thickness_um, double k,
                                 double q_w_m3, double htc_bottom, double htc_top,
                                 double ambient_c) {
  const double length = thickness_um * 1e-6;
  const double z = z_um * 1e-6;
  // T(z) = -q z^2 / (2k) + c1 z + c2 with Robin closure at both faces.
  const double c1 = q_w_m3 * length * (1.0 + htc_top * length / (2.0 * k)) /
                    (k + htc_top * (length + k / htc_bottom));
  const double c2 = ambient_c + k * c1 / htc_bottom;
  return -q_w_m3 * z * z / (2.0 * k) + c1 * z + c2;
}

HbmStack make_reference_stack(const GeometryConfig& geo, const PresetTable& presets,
                              const MaterialSet& mats, bool formula_pairs) {
  auto pair_for = [&](const std::string& name) {
    const TsvPreset& p = presets.by_name(name);
    return formula_pairs ? homogenize(p.layout, mats) : p.k;
  };
  HbmStack s;
  s.layer_count = 8;
  s.bond_thickness_um = geo.bond_thickness_um;
  s.bond_k = geo.bond_k;
  s.htc_top = 4000;
  s.htc_bottom = 4000;
  s.ambient_c = geo.ambient_c;
  s.footprint_x_um = geo.footprint_x_um;
  s.footprint_y_um = geo.footprint_y_um;
  s.chip_budget_um = geo.chip_budget_um;
  s.substrate = {geo.substrate_thickness_um, pair_for("TSV_256"), 0.0, "TSV_256"};

  const double thicknesses[7] = {30, 50, 50, 30, 30, 30, 30};
  const char* chip_presets[7] = {"TSV_256", "TSV_64", "TSV_64", "TSV_256",
                                 "TSV_256", "TSV_256", "TSV_256"};
  const double powers[8] = {2, 2, 5, 8, 8, 5, 2, 2};
  double used = 0;
  for (int i = 0; i < 7; ++i) {
    s.chips.push_back({thicknesses[i], pair_for(chip_presets[i]), powers[i],
                       chip_presets[i]});
    used += thicknesses[i];
  }
  s.chips.push_back({geo.chip_budget_um - used, pair_for("pure_si"), powers[7],
                     "pure_si"});
  validate(s);
  return s;
}

std::vector<double> dense_solve(const LinearSystem& system) {
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(system.n, system.n);
  Eigen::VectorXd b(system.n);
  for (int r = 0; r < system.n; ++r) {
    b(r) = system.rhs[r];
    for (int p = system.row_ptr[r]; p < system.row_ptr[r + 1]; ++p)
      k(r, system.col[p]) = system.val[p];
  }
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("dense oracle: Cholesky factorization failed");
  Eigen::VectorXd x = llt.solve(b);
  return std::vector<double>(x.data(), x.data() + system.n);
}

namespace {

std::string rel_err_detail(double measured, double allowed) {
  return "relative error " + format_double(measured) + " (allowed " +
         format_double(allowed) + ")";
}

// Draws `n` cases across the configured families, proportional allocation.
std::vector<SampleCase> draw_cases(const RunConfig& config, size_t n, uint64_t tag) {
  ParameterSpace space;
  space.families = config.families;
  SamplePlan plan;
  plan.seed = Rng::derive(config.seed, {tag});
  plan.counts = allocate_counts(space, n);
  plan.dedupe = config.dedupe;
  return lhs_sample(space, plan);
}

struct CaseSolve {
  CaseOutcome outcome;
  double hotspot_z_um = 0;
  int iterations = 0;
  double seconds = 0;
};

CaseSolve solve_case(const SampleCase& c, const RunConfig& config,
                     const PresetTable& presets) {
  const auto t0 = std::chrono::steady_clock::now();
  HbmStack stack = build_stack(c, config.geometry, presets);
  VoxelGrid grid = to_grid(stack, make_grid_spec(stack, config.geometry),
                           config.geometry.source_face);
  SolveResult r = solve_grid(grid, config.solver);
  CaseSolve out;
  out.outcome.converged = r.converged;
  out.outcome.t_max_c = r.t_max;
  out.hotspot_z_um = r.hotspot_z_um;
  out.iterations = r.iterations;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// Solve all cases with a worker pool; results land in case order.
std::vector<CaseSolve> solve_cases(const std::vector<SampleCase>& cases,
                                   const RunConfig& config, const PresetTable& presets,
                                   std::ostream* log) {
  std::vector<CaseSolve> results(cases.size());
  const int workers = config.workers > 0
                          ? config.workers
                          : int(std::clamp(std::thread::hardware_concurrency(), 1u, 16u));
  std::atomic<size_t> next{0};
  std::mutex log_mutex;
  auto work = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cases.size()) return;
      results[i] = solve_case(cases[i], config, presets);
      if (log) {
        std::lock_guard<std::mutex> hold(log_mutex);
        *log << "case " << cases[i].case_id << " t_max "
             << format_double(results[i].outcome.t_max_c) << " C, "
             << results[i].iterations << " iters, "
             << format_double(results[i].seconds) << " s\n";
      }
    }
  };
  if (workers <= 1 || cases.size() <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return results;
}

}  // namespace

ValidationReport run_solver_validation(const RunConfig& config,
                                       const PresetTable& presets,
                                       bool write_artifacts) {
  ValidationReport report;

  {  // Analytic 1D slab, 64 cells.
    const double k = 148, q = 4.7e8, hb = 4000, ht = 4000, ambient = 25;
    const double thickness = 720;
    VoxelGrid grid = make_slab_grid(64, thickness, k, q, hb, ht, ambient);
    SolveResult r = solve_grid(grid, config.solver);
    double worst = 0;
    for (int i = 0; i < grid.nz; ++i) {
      const double exact = analytic_slab_temperature(grid.z_center_um[i], thickness, k,
                                                     q, hb, ht, ambient);
      worst = std::max(worst, std::abs(r.temperature_c[i] - exact) / std::abs(exact));
    }
    report.checks.push_back({"analytic_slab",
                             r.converged && worst <= config.analytic_max_rel_error,
                             rel_err_detail(worst, config.analytic_max_rel_error)});
  }

  {  // Iterative vs dense factorization on small mixed-family grids.
    SolverConfig oracle_cfg = config.solver;
    oracle_cfg.rel_tolerance = std::min(config.solver.rel_tolerance, 1e-12);
    double worst = 0;
    bool converged = true;
    ParameterSpace space;
    space.families = {1, 2, 4};
    SamplePlan plan;
    plan.seed = Rng::derive(config.seed, {kTagOracle});
    plan.counts = {{1, 2}, {2, 2}, {4, 2}};
    GeometryConfig small = config.geometry;
    small.nx = 3;
    small.ny = 3;
    small.chip_cell_um = 80;
    small.substrate_cells = 2;
    for (const auto& c : lhs_sample(space, plan)) {
      HbmStack stack = build_stack(c, small, presets);
      VoxelGrid grid = to_grid(stack, make_grid_spec(stack, small), small.source_face);
      LinearSystem sys = assemble(grid);
      SolveResult it = solve(sys, oracle_cfg);
      converged = converged && it.converged;
      const std::vector<double> direct = dense_solve(sys);
      double num = 0, den = 0;
      for (size_t i = 0; i < direct.size(); ++i) {
        num = std::max(num, std::abs(it.temperature_c[i] - direct[i]));
        den = std::max(den, std::abs(direct[i]));
      }
      worst = std::max(worst, num / den);
    }
    report.checks.push_back({"dense_oracle",
                             converged && worst <= config.oracle_max_rel_error,
                             rel_err_detail(worst, config.oracle_max_rel_error)});
  }

  {  // Energy balance on sampled cases.
    const auto cases = draw_cases(config, size_t(config.energy_cases), kTagEnergy);
    double worst = 0;
    bool converged = true;
    for (const auto& c : cases) {
      HbmStack stack = build_stack(c, config.geometry, presets);
      VoxelGrid grid = to_grid(stack, make_grid_spec(stack, config.geometry),
                               config.geometry.source_face);
      SolveResult r = solve_grid(grid, config.solver);
      converged = converged && r.converged;
      worst = std::max(worst, energy_balance(r, grid).relative_error());
    }
    report.checks.push_back({"energy_balance",
                             converged && worst <= config.energy_max_rel_error,
                             rel_err_detail(worst, config.energy_max_rel_error) + " over " +
                                 std::to_string(cases.size()) + " cases"});
  }

  {  // Homogenization fidelity: explicit pillars vs homogenized pairs.
    HbmStack stack = make_reference_stack(config.geometry, presets, config.materials,
                                          /*formula_pairs=*/true);
    LayeredGridSpec coarse_spec = make_grid_spec(stack, config.geometry);
    VoxelGrid coarse = to_grid(stack, coarse_spec, config.geometry.source_face);

    GeometryConfig fine_geo = config.geometry;
    fine_geo.nx = config.fine_nx;
    fine_geo.ny = config.fine_ny;
    LayeredGridSpec fine_spec = make_grid_spec(stack, fine_geo);
    VoxelGrid fine = to_grid_explicit_tsv(stack, fine_spec, presets, config.materials,
                                          config.geometry.source_face);

    SolveResult rc = solve_grid(coarse, config.solver);
    SolveResult rf = solve_grid(fine, config.solver);
    const double dt_rel = std::abs(rf.t_max - rc.t_max) / std::abs(rf.t_max);
    const double ratio = double(fine.cell_count()) / double(coarse.cell_count());
    const bool pass = rc.converged && rf.converged &&
                      dt_rel <= config.fidelity_max_dt_rel &&
                      rf.hotspot_layer == rc.hotspot_layer &&
                      ratio > config.fidelity_min_cell_ratio;
    std::ostringstream detail;
    detail << "t_max fine " << format_double(rf.t_max) << " C vs homogenized "
           << format_double(rc.t_max) << " C (" << rel_err_detail(dt_rel, config.fidelity_max_dt_rel)
           << "), hotspot layer " << rf.hotspot_layer << " vs " << rc.hotspot_layer
           << ", cells " << fine.cell_count() << " vs " << coarse.cell_count()
           << " (ratio " << format_double(ratio) << ", required > "
           << format_double(config.fidelity_min_cell_ratio) << ")";
    report.checks.push_back({"homogenization_fidelity", pass, detail.str()});

    if (write_artifacts) {
      std::filesystem::create_directories(config.out_dir);
      std::ostringstream dump;
      write_debug_dump(coarse, dump);
      write_file(config.out_dir + "/reference_grid.txt", dump.str());
      std::string residuals = "iteration,relative_residual\n";
      for (size_t i = 0; i < rc.residual_history.size(); ++i)
        residuals += std::to_string(i + 1) + "," +
                     format_double(rc.residual_history[i]) + "\n";
      write_file(config.out_dir + "/reference_residuals.csv", residuals);
    }
  }

  return report;
}

GenerateSummary cmd_generate(const RunConfig& config, const PresetTable& presets,
                             std::ostream& log) {
  const auto cases = draw_cases(config, config.sample_count, kTagGenerate);
  log << "sampled " << cases.size() << " cases\n";
  const auto solves = solve_cases(cases, config, presets, &log);

  std::vector<CaseOutcome> outcomes;
  outcomes.reserve(solves.size());
  for (const auto& s : solves) outcomes.push_back(s.outcome);
  const FilterResult filtered = filter_physical(cases, outcomes, config.t_max_threshold_c);

  GenerateSummary summary;
  summary.raw_count = cases.size();
  summary.kept_count = filtered.kept_indices.size();
  summary.excluded_count = filtered.excluded.size();
  summary.exclusion_rate =
      cases.empty() ? 0 : double(filtered.excluded.size()) / double(cases.size());

  std::filesystem::create_directories(config.out_dir);
  {
    std::string log_csv = "case_id,reason\n";
    for (const auto& e : filtered.excluded) log_csv += e.case_id + "," + e.reason + "\n";
    write_file(config.out_dir + "/exclusions.csv", log_csv);
  }
  if (summary.exclusion_rate > config.max_exclusion_rate) {
    std::map<std::string, size_t> reasons;
    for (const auto& e : filtered.excluded) reasons[e.reason] += 1;
    std::string detail;
    for (const auto& [reason, n] : reasons)
      detail += " " + reason + ":" + std::to_string(n);
    throw CheckFailure(
        "generate: exclusion rate " + format_double(summary.exclusion_rate) +
        " exceeds gate " + format_double(config.max_exclusion_rate) + ";" + detail +
        "; see " + config.out_dir + "/exclusions.csv");
  }

  Dataset dataset;
  dataset.norm = config.normalization();
  dataset.plan_seed = Rng::derive(config.seed, {kTagGenerate});
  dataset.solver_config_hash = config.solver_config_hash();
  dataset.config_hash = config.config_hash();
  dataset.raw_count = summary.raw_count;
  dataset.excluded_count = summary.excluded_count;
  for (size_t i : filtered.kept_indices) {
    DatasetRow row;
    row.case_id = cases[i].case_id;
    row.raw = encode_features(cases[i], presets);
    row.t_max_c = solves[i].outcome.t_max_c;
    row.hotspot_z_um = solves[i].hotspot_z_um;
    dataset.rows.push_back(std::move(row));
  }
  shuffle_split(dataset, Rng::derive(config.seed, {kTagSplit}));

  const auto parent = std::filesystem::path(config.dataset).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  persist(dataset, config.dataset);
  summary.dataset_path = config.dataset;
  log << "kept " << summary.kept_count << " of " << summary.raw_count
      << " cases (excluded " << summary.excluded_count << ", rate "
      << format_double(summary.exclusion_rate) << ")\n";
  log << "dataset written to " << config.dataset << "\n";
  return summary;
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  Dataset dataset = load_dataset(config.dataset);
  TrainConfig cfg = config.train;
  cfg.seed = Rng::derive(config.seed, {kTagTrain});
  cfg.dropout_p = config.dropout_p;
  cfg.p_output_scale = config.p_output_scale;
  log << "training " << config.arch << " on " << dataset.rows.size() << " rows\n";
  const auto t0 = std::chrono::steady_clock::now();
  Checkpoint ckpt = train_model(config.arch, dataset, cfg, config.config_hash());
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto parent = std::filesystem::path(config.checkpoint).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  save_checkpoint(ckpt, config.checkpoint);

  std::string history = "# config_hash = " + to_hex(config.config_hash()) + "\n";
  history += "net,epoch,lr,train_loss,test_loss\n";
  for (size_t n = 0; n < ckpt.nets.size(); ++n)
    for (const auto& row : ckpt.nets[n].history)
      history += std::to_string(n) + "," + std::to_string(row.epoch) + "," +
                 format_double(row.lr) + "," + format_double(row.train_loss) + "," +
                 format_double(row.test_loss) + "\n";
  write_file(config.checkpoint + ".history.csv", history);
  log << "trained in " << format_double(seconds) << " s; checkpoint written to "
      << config.checkpoint << "\n";
}

namespace {

void run_generalization_probe(const RunConfig& config, const PresetTable& presets,
                              const Checkpoint& ckpt, const Dataset& dataset,
                              std::ostream& log) {
  // Fixed stacks from the head of the test split, re-solved at an
  // off-level boundary coefficient and compared against the surrogate.
  std::vector<SampleCase> probes;
  for (const auto& row : dataset.rows) {
    if (row.split != 1) continue;
    SampleCase c = decode_features(row.raw, presets);
    c.htc_top = config.generalization_htc;
    c.htc_bottom = config.generalization_htc;
    c.case_id = compute_case_id(c);
    probes.push_back(std::move(c));
    if (int(probes.size()) >= config.generalization_cases) break;
  }
  std::string csv = "# config_hash = " + to_hex(config.config_hash()) + "\n";
  csv += "case_id,t_solver_c,t_pred_c,z_solver_um,z_pred_um,t_between,z_between\n";
  std::vector<double> pred_t, true_t, pred_z, true_z;
  size_t t_between_ok = 0, z_between_ok = 0;
  for (const auto& probe : probes) {
    CaseSolve solved = solve_case(probe, config, presets);
    Prediction pred = predict(ckpt, probe, presets, config.geometry);

    // Predictions at the neighbouring trained levels bracket the off-level
    // prediction when the surrogate interpolates monotonically.
    SampleCase lo = probe, hi = probe;
    lo.htc_top = lo.htc_bottom = 200;
    hi.htc_top = hi.htc_bottom = 4000;
    const Prediction pred_lo = predict(ckpt, lo, presets, config.geometry);
    const Prediction pred_hi = predict(ckpt, hi, presets, config.geometry);
    const bool t_between = (pred.t_c - std::min(pred_lo.t_c, pred_hi.t_c)) >= 0 &&
                           (std::max(pred_lo.t_c, pred_hi.t_c) - pred.t_c) >= 0;
    const bool z_between =
        (pred.hotspot_z_um - std::min(pred_lo.hotspot_z_um, pred_hi.hotspot_z_um)) >= -1e-9 &&
        (std::max(pred_lo.hotspot_z_um, pred_hi.hotspot_z_um) - pred.hotspot_z_um) >= -1e-9;
    t_between_ok += t_between;
    z_between_ok += z_between;

    pred_t.push_back(pred.t_c);
    true_t.push_back(solved.outcome.t_max_c);
    pred_z.push_back(pred.hotspot_z_um);
    true_z.push_back(solved.hotspot_z_um);
    csv += probe.case_id + "," + format_double(solved.outcome.t_max_c) + "," +
           format_double(pred.t_c) + "," + format_double(solved.hotspot_z_um) + "," +
           format_double(pred.hotspot_z_um) + "," + (t_between ? "1" : "0") + "," +
           (z_between ? "1" : "0") + "\n";
  }
  const TargetMetrics mt = compute_metrics(pred_t, true_t);
  const TargetMetrics mz = compute_metrics(pred_z, true_z);
  csv += "summary,mar_t," + format_double(mt.mar) + ",mar_z," + format_double(mz.mar) +
         ",t_between," + std::to_string(t_between_ok) + "/" + std::to_string(pred_t.size()) +
         ",z_between," + std::to_string(z_between_ok) + "/" + std::to_string(pred_z.size()) +
         "\n";
  write_file(config.report_dir + "/generalization.csv", csv);
  log << "generalization probe at htc " << format_double(config.generalization_htc)
      << ": T MAR " << format_double(mt.mar) << ", z MAR " << format_double(mz.mar)
      << "\n";
}

}  // namespace

EvalSummary cmd_eval(const RunConfig& config, const PresetTable& presets,
                     std::ostream& log) {
  Dataset dataset = load_dataset(config.dataset);
  Checkpoint ckpt = load_checkpoint(config.checkpoint);
  if (ckpt.norm.canonical_text() != dataset.norm.canonical_text())
    throw CheckFailure("eval: checkpoint and dataset normalization specs differ");

  std::filesystem::create_directories(config.report_dir);
  EvalVectors ev = evaluate_on_split(ckpt, dataset, presets, config.geometry, 1);
  EvalSummary summary;
  summary.report = compute_report(ev.families, ev.pred_t, ev.true_t, ev.pred_z, ev.true_z);
  std::vector<const HbmStack*> stacks;
  for (const auto& s : ev.stacks) stacks.push_back(&s);
  summary.bins = bin_position_errors(ev.pred_z, ev.true_z, stacks);
  export_report(summary.report, summary.bins, config.config_hash(), ev.families,
                ev.pred_t, ev.true_t, ev.pred_z, ev.true_z, config.report_dir);
  log << "test rows: " << ev.families.size() << ", T MAR "
      << format_double(summary.report.t_overall.mar) << ", z MAR "
      << format_double(summary.report.p_overall.mar) << ", within 7.5 um "
      << format_double(summary.bins.within_7_5) << ", misplaced "
      << format_double(summary.bins.misplaced) << "\n";

  if (config.run_batch_sweep) {
    TrainConfig cfg = config.train;
    cfg.seed = Rng::derive(config.seed, {0x5357ull});
    cfg.epochs = config.sweep_epochs;
    cfg.epochs_t = config.sweep_epochs;
    cfg.epochs_p = config.sweep_epochs;
    batch_size_sweep(dataset, config.arch, cfg, config.batch_sweep_sizes, presets,
                     config.geometry, config.report_dir);
    log << "batch sweep written to " << config.report_dir << "/batch_sweep.csv\n";
  }

  if (config.run_partial_study) {
    // Retrain on a subsample of the training split, evaluate on the same
    // held-out rows, and report both models side by side.
    Dataset partial = dataset;
    std::vector<size_t> train_rows;
    for (size_t i = 0; i < partial.rows.size(); ++i)
      if (partial.rows[i].split == 0) train_rows.push_back(i);
    Rng rng(Rng::derive(config.seed, {0x5041ull}));
    rng.shuffle(train_rows);
    const size_t keep = std::min(config.partial_rows, train_rows.size());
    std::vector<DatasetRow> rows;
    for (size_t i = 0; i < keep; ++i) rows.push_back(partial.rows[train_rows[i]]);
    for (const auto& row : partial.rows)
      if (row.split == 1) rows.push_back(row);
    partial.rows = std::move(rows);

    TrainConfig cfg = config.train;
    cfg.seed = Rng::derive(config.seed, {kTagTrain});
    Checkpoint partial_ckpt = train_model(config.arch, partial, cfg, config.config_hash());
    EvalVectors pv = evaluate_on_split(partial_ckpt, partial, presets, config.geometry, 1);
    const TargetMetrics pt = compute_metrics(pv.pred_t, pv.true_t);
    const TargetMetrics pz = compute_metrics(pv.pred_z, pv.true_z);
    std::string csv = "# config_hash = " + to_hex(config.config_hash()) + "\n";
    csv += "model,train_rows,mar_t,mar_p,mean_mar\n";
    const double full_mean =
        0.5 * (summary.report.t_overall.mar + summary.report.p_overall.mar);
    csv += "full," + std::to_string(train_rows.size()) + "," +
           format_double(summary.report.t_overall.mar) + "," +
           format_double(summary.report.p_overall.mar) + "," +
           format_double(full_mean) + "\n";
    csv += "partial," + std::to_string(keep) + "," + format_double(pt.mar) + "," +
           format_double(pz.mar) + "," + format_double(0.5 * (pt.mar + pz.mar)) + "\n";
    write_file(config.report_dir + "/partial_vs_full.csv", csv);
    log << "partial study: full mean MAR " << format_double(full_mean)
        << ", partial mean MAR " << format_double(0.5 * (pt.mar + pz.mar)) << "\n";
  }

  if (config.run_generalization)
    run_generalization_probe(config, presets, ckpt, dataset, log);

  return summary;
}

InferResult cmd_infer(const RunConfig& config, const PresetTable& presets,
                      const SampleCase& c) {
  const Checkpoint ckpt = load_checkpoint(config.checkpoint);
  InferResult result;
  result.prediction = predict(ckpt, c, presets, config.geometry);  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  result.prediction = predict(ckpt, c, presets, config.geometry);
  result.latency_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ParameterSpace space;
  space.families = config.families;
  result.off_level = !case_on_levels(space, c);
  return result;
}

bool case_on_levels(const ParameterSpace& space, const SampleCase& c) {
  if (std::find(space.families.begin(), space.families.end(), c.family) ==
      space.families.end())
    return false;
  const auto dims = dimensions_for(space, c.family);
  for (const auto& d : dims) {
    bool on = false;
    switch (d.kind) {
      case Dimension::Kind::Thickness:
        for (double v : d.numeric_levels) on |= v == c.thicknesses_um[d.slot];
        break;
      case Dimension::Kind::Preset:
        for (const auto& v : d.string_levels) on |= v == c.presets[d.slot];
        break;
      case Dimension::Kind::Power:
        for (double v : d.numeric_levels) on |= v == c.powers_w[d.slot];
        break;
      case Dimension::Kind::Htc:
        for (double v : d.numeric_levels)
          on |= v == (d.slot == 0 ? c.htc_top : c.htc_bottom);
        break;
    }
    if (!on) return false;
  }
  return true;
}

}  // namespace hbmtherm
