#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hbmtherm {

// One point of the discrete design space. Sequences are ordered
// [logic die, chip1, chip2, ...]; the top chip's thickness (filled to the
// 720 um budget) and its conductivity (pure silicon) are derived, so they do
// not appear here. Powers cover logic die plus every chip including the top.
struct SampleCase {
  int family = 0;                        // stacked layer count: 1, 2, 4 or 8
  std::vector<double> thicknesses_um;    // family entries
  std::vector<std::string> presets;      // family entries
  std::vector<double> powers_w;          // family + 1 entries
  double htc_top = 0;                    // W/m^2-K
  double htc_bottom = 0;
  std::string case_id;
};

// Discrete level lists. Power levels differ per family: the single-layer
// family sweeps its chip power over the integers 2..8 W with the logic die
// pinned at 2 W (matching the published combination count), the other
// families use {2, 5, 8} W everywhere.
struct ParameterSpace {
  std::vector<int> families = {1, 2, 4, 8};
  std::vector<double> thickness_levels_um = {10, 30, 50};
  std::vector<std::string> preset_levels = {"TSV_64", "TSV_256", "TSV_400"};
  std::vector<double> power_levels_w = {2, 5, 8};
  std::vector<double> power_levels_single_w = {2, 3, 4, 5, 6, 7, 8};
  std::vector<double> logic_power_levels_single_w = {2};
  std::vector<double> htc_levels = {200, 4000, 10000};
};

// One sampling dimension: a named list of levels.
struct Dimension {
  enum class Kind { Thickness, Preset, Power, Htc };
  Kind kind;
  int slot;  // index within its sequence in SampleCase
  std::vector<double> numeric_levels;       // all kinds except Preset
  std::vector<std::string> string_levels;   // Preset only
  size_t level_count() const {
    return kind == Kind::Preset ? string_levels.size() : numeric_levels.size();
  }
};

// Ordered dimension list for one family:
// thicknesses (family), presets (family), powers (family+1), htc_top, htc_bottom.
std::vector<Dimension> dimensions_for(const ParameterSpace& space, int family);

// Exact size of the full factorial for one family.
uint64_t enumerate_count(const ParameterSpace& space, int family);

struct SamplePlan {
  uint64_t seed = 0;
  std::map<int, size_t> counts;  // requested samples per family
  bool dedupe = true;
};

// Distribute a total sample budget over the families in the reference
// proportions 504 : 5832 : 3391 : 3767 (largest-remainder rounding).
std::map<int, size_t> allocate_counts(const ParameterSpace& space, size_t total);

// Stratified draw: per dimension, level occurrences are balanced to within
// one across the requested count; duplicates are repaired by marginal-
// preserving swaps. Deterministic under plan.seed. Throws when a family's
// request exceeds its enumeration or the dedupe budget is exhausted.
std::vector<SampleCase> lhs_sample(const ParameterSpace& space, const SamplePlan& plan);

// Stable id: family-prefixed zero-padded decimal hash of the case contents.
std::string compute_case_id(const SampleCase& c);

struct Exclusion {
  std::string case_id;
  std::string reason;  // "non-converged" or "t_max_above_threshold"
};

struct CaseOutcome {
  bool converged = false;
  double t_max_c = 0;
};

struct FilterResult {
  std::vector<size_t> kept_indices;
  std::vector<Exclusion> excluded;
};

// Drops cases whose solve failed to converge or exceeded the temperature
// threshold (non-physical operating point).
FilterResult filter_physical(const std::vector<SampleCase>& cases,
                             const std::vector<CaseOutcome>& outcomes,
                             double t_max_threshold_c);

}  // namespace hbmtherm
