#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hbmtherm/evaluation.hpp"
#include "hbmtherm/run_config.hpp"

namespace hbmtherm {

// Uniform single-column slab grid (1 x 1 x nz), used by the analytic
// validation case and the refinement study.
VoxelGrid make_slab_grid(int nz, double thickness_um, double k, double q_w_m3,
                         double htc_bottom, double htc_top, double ambient_c);

// Closed-form steady profile of that slab, evaluated at height z.
double analytic_slab_temperature(double z_um, double thickness_um, double k,
                                 double q_w_m3, double htc_bottom, double htc_top,
                                 double ambient_c);

// Reference eight-layer stack used for the homogenization-fidelity check:
// logic die with a 256-pillar array, chips at (30,50,50,30,30,30,30) um with
// pillar counts (256,64,64,256,256,256,256), a silicon top chip absorbing the
// budget, powers (2,2,5,8,8,5,2,2) W and both boundary coefficients at
// 4000 W/m^2-K. With formula_pairs the conductivities come from the
// homogenization formulas (matching the explicit-pillar comparison grid),
// otherwise from the canonical preset table.
HbmStack make_reference_stack(const GeometryConfig& geo, const PresetTable& presets,
                              const MaterialSet& mats, bool formula_pairs);

// Dense Cholesky solve of an assembled system (the independent oracle for
// the iterative path).
std::vector<double> dense_solve(const LinearSystem& system);

struct ValidationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

// Analytic-slab, dense-oracle, energy-balance and homogenization-fidelity
// checks at the tolerances in config. Optionally dumps the reference
// homogenized grid and its residual history under config.out_dir.
ValidationReport run_solver_validation(const RunConfig& config,
                                       const PresetTable& presets,
                                       bool write_artifacts = false);

struct GenerateSummary {
  size_t raw_count = 0;
  size_t kept_count = 0;
  size_t excluded_count = 0;
  double exclusion_rate = 0;
  std::string dataset_path;
};

// Sample, solve (parallel across cases, results in plan order), filter,
// encode, split, persist. Aborts when the exclusion rate exceeds the
// configured gate.
GenerateSummary cmd_generate(const RunConfig& config, const PresetTable& presets,
                             std::ostream& log);

// Train the configured architecture on the persisted dataset; writes the
// checkpoint and a per-net loss-history CSV next to it.
void cmd_train(const RunConfig& config, std::ostream& log);

struct EvalSummary {
  MetricsReport report;
  PositionErrorBins bins;
};

EvalSummary cmd_eval(const RunConfig& config, const PresetTable& presets,
                     std::ostream& log);

struct InferResult {
  Prediction prediction;
  bool off_level = false;   // any feature away from the trained levels
  double latency_s = 0;     // single-call latency, measured
};

InferResult cmd_infer(const RunConfig& config, const PresetTable& presets,
                      const SampleCase& c);

// True when every sampled value sits on a trained level of the space.
bool case_on_levels(const ParameterSpace& space, const SampleCase& c);

}  // namespace hbmtherm
