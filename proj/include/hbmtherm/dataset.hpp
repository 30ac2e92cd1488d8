#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hbmtherm/doe_sampler.hpp"
#include "hbmtherm/tsv_homogenization.hpp"

namespace hbmtherm {

// Fixed-width raw feature layout (padding value -1 for absent slots):
//   [0]      layer count
//   [1..8]   thicknesses, um: logic die then chips 1..7
//   [9..16]  conductivity preset codes: logic die then chips 1..7
//   [17..25] powers, W: logic die then chips 1..8
//   [26]     htc_top   [27] htc_bottom
inline constexpr int kFeatureWidth = 28;
inline constexpr double kPaddingValue = -1.0;

using FeatureVector = std::array<double, kFeatureWidth>;

// Per-feature and per-label affine maps, normalized = raw * scale + offset.
// Every transform is invertible (scale != 0). The published scaling-factor
// table is recorded verbatim in dataset metadata for traceability.
struct NormalizationSpec {
  int version = 1;
  FeatureVector feature_scale{};
  FeatureVector feature_offset{};
  double t_scale = 1, t_offset = 0;  // junction temperature, degC
  double z_scale = 1, z_offset = 0;  // hotspot height, um

  std::string canonical_text() const;            // byte-stable serialization
  static NormalizationSpec from_canonical_text(const std::string& block);
};

// Divisors chosen so every feature and label lands in [-1, 1.5]:
// layers/10, thickness/100, preset code/2, power/10, HTC/10000,
// temperature/200, position/1000.
NormalizationSpec default_normalization();

FeatureVector encode_features(const SampleCase& c, const PresetTable& presets);

// Inverse of encode_features for the non-padded slots.
SampleCase decode_features(const FeatureVector& raw, const PresetTable& presets);

FeatureVector normalize_features(const FeatureVector& raw, const NormalizationSpec& n);
FeatureVector denormalize_features(const FeatureVector& norm, const NormalizationSpec& n);

struct DatasetRow {
  std::string case_id;
  FeatureVector raw{};
  double t_max_c = 0;
  double hotspot_z_um = 0;
  int split = 0;  // 0 train, 1 test
};

struct Dataset {
  std::vector<DatasetRow> rows;
  NormalizationSpec norm;
  // Provenance: the dataset can be regenerated from these.
  uint64_t plan_seed = 0;
  uint64_t solver_config_hash = 0;
  uint64_t config_hash = 0;
  uint64_t raw_count = 0;       // sampled cases before exclusions
  uint64_t excluded_count = 0;
};

// Seed-deterministic shuffle and 8:2 split, stratified per family so the
// test set's family mix tracks the overall mix to within one row each.
// Requires at least 10 rows.
void shuffle_split(Dataset& dataset, uint64_t seed);

// CSV (header + one row per case, shortest-exact floats) plus a "<path>.meta"
// sidecar with provenance and the normalization block. load() restores the
// dataset bitwise; malformed input reports row/column positions.
void persist(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace hbmtherm
