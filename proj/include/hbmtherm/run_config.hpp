#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hbmtherm/dataset.hpp"
#include "hbmtherm/fvm_solver.hpp"
#include "hbmtherm/mlp.hpp"
#include "hbmtherm/stack_geometry.hpp"

namespace hbmtherm {

// Sectioned key = value configuration ("[section]" headers, '#' comments).
// Unknown keys are rejected; the seed is mandatory. See configs/default.ini
// for the annotated reference.
struct RunConfig {
  // [run]
  uint64_t seed = 0;
  std::string out_dir = "out";
  int workers = 0;  // case-solving fan-out; 0 = hardware concurrency

  // [paths]
  std::string preset_table = "data/tsv_presets.csv";
  std::string dataset;     // default: <out_dir>/dataset.csv
  std::string checkpoint;  // default: <out_dir>/checkpoint.txt
  std::string report_dir;  // default: <out_dir>/report

  GeometryConfig geometry;  // [geometry]
  MaterialSet materials;    // [materials]

  // [solver]
  SolverConfig solver;
  double t_max_threshold_c = 300;  // cases hotter than this are non-physical

  // [sampling]
  size_t sample_count = 2000;
  std::vector<int> families = {1, 2, 4, 8};
  bool dedupe = true;
  double max_exclusion_rate = 0.15;

  // [normalization] divisors; normalized = raw / divisor
  double layers_divisor = 10;
  double thickness_divisor = 100;
  double preset_divisor = 2;
  double power_divisor = 10;
  double htc_divisor = 10000;
  double temperature_divisor = 200;
  double position_divisor = 1000;

  // [model]
  std::string arch = "1nn2out";  // 1nn2out | 1nn2out_baseline | 2nn2out
  double dropout_p = 0.2;
  double p_output_scale = 1.0;

  // [train]
  TrainConfig train;

  // [eval]
  bool run_batch_sweep = false;
  std::vector<int> batch_sweep_sizes = {400, 1400, 2400};
  int sweep_epochs = 2000;
  bool run_partial_study = false;
  size_t partial_rows = 400;
  bool run_generalization = false;
  double generalization_htc = 1000;
  int generalization_cases = 8;

  // [validation]
  double analytic_max_rel_error = 0.005;
  double oracle_max_rel_error = 1e-8;
  double energy_max_rel_error = 1e-3;
  int energy_cases = 10;
  double fidelity_max_dt_rel = 0.01;
  double fidelity_min_cell_ratio = 10;
  int fine_nx = 128;
  int fine_ny = 128;

  NormalizationSpec normalization() const;

  // Deterministic serialization of every resolved field; config_hash() and
  // solver_config_hash() are FNV-1a digests over the relevant parts.
  std::string canonical_dump() const;
  uint64_t config_hash() const;
  uint64_t solver_config_hash() const;

  // Apply path defaults derived from out_dir and check referenced inputs.
  void finalize();

  static RunConfig from_file(const std::string& path);
};

}  // namespace hbmtherm
