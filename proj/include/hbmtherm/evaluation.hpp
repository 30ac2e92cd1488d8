#pragma once

#include <map>
#include <string>
#include <vector>

#include "hbmtherm/mlp.hpp"

namespace hbmtherm {

// max-E / MAE / MAR for one target. MAR is the mean of |err|/|true| over
// samples with a nonzero true value; the skipped count is reported.
struct TargetMetrics {
  double max_e = 0;
  double mae = 0;
  double mar = 0;
  size_t count = 0;
  size_t mar_excluded = 0;
};

TargetMetrics compute_metrics(const std::vector<double>& preds,
                              const std::vector<double>& labels);

struct MetricsReport {
  TargetMetrics t_overall, p_overall;
  std::map<int, TargetMetrics> t_family, p_family;  // keyed by layer count
  std::map<int, size_t> family_counts;
};

MetricsReport compute_report(const std::vector<int>& families,
                             const std::vector<double>& pred_t,
                             const std::vector<double>& true_t,
                             const std::vector<double>& pred_z,
                             const std::vector<double>& true_z);

// Position-error buckets. The 7.5 um edge is half the minimum spacing
// between adjacent top-surface layers, 25 um matches the minimum spacing of
// the remaining chips; misplacement means the predicted height falls in a
// different chip zone than the true height.
struct PositionErrorBins {
  double within_7_5 = 0;
  double within_25 = 0;   // 7.5 < |err| <= 25
  double beyond_25 = 0;
  double misplaced = 0;
  size_t count = 0;
};

// layer lookups: one stack-geometry zone resolver per sample.
PositionErrorBins bin_position_errors(const std::vector<double>& pred_z,
                                      const std::vector<double>& true_z,
                                      const std::vector<const HbmStack*>& stacks);

// Files written by export_report under `dir` (all deterministic):
//   metrics.csv        one row per (target, family-or-overall)
//   summary.txt        human-readable digest
//   scatter.csv        per-sample predicted vs simulated values
//   error_hist.csv     binned error histograms for both targets
//   family_table.csv   per-family MAE/MAR table, one column per family
void export_report(const MetricsReport& report, const PositionErrorBins& bins,
                   uint64_t config_hash, const std::vector<int>& families,
                   const std::vector<double>& pred_t, const std::vector<double>& true_t,
                   const std::vector<double>& pred_z, const std::vector<double>& true_z,
                   const std::string& dir);

// Reads back metrics.csv (for round-trip checks and downstream tooling).
std::map<std::string, TargetMetrics> load_metrics_csv(const std::string& path);

// Test-split predictions of a checkpoint, denormalized, plus the per-sample
// stack geometry needed for layer lookups.
struct EvalVectors {
  std::vector<int> families;
  std::vector<double> pred_t, true_t;
  std::vector<double> pred_z, true_z;
  std::vector<HbmStack> stacks;
};

EvalVectors evaluate_on_split(const Checkpoint& ckpt, const Dataset& dataset,
                              const PresetTable& presets, const GeometryConfig& geo,
                              int split);

struct SweepRow {
  int batch_size = 0;
  double mar_t = 0;
  double mar_p = 0;
  double mean_mar = 0;
};

// Short identical-seed training runs across batch sizes; returns one row per
// size and writes batch_sweep.csv when dir is non-empty.
std::vector<SweepRow> batch_size_sweep(const Dataset& dataset, const std::string& arch_label,
                                       const TrainConfig& base_cfg,
                                       const std::vector<int>& sizes,
                                       const PresetTable& presets,
                                       const GeometryConfig& geo,
                                       const std::string& dir);

}  // namespace hbmtherm
