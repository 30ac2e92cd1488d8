#pragma once

#include <string>
#include <vector>

namespace hbmtherm {

// Copper-pillar array inside a silicon die. Lengths in micrometres.
struct TsvLayout {
  int count = 0;          // number of pillars, 0 = pure silicon
  double radius_um = 0;   // pillar radius, > 0 when count > 0
  double die_width_um = 0;
  double die_depth_um = 0;
};

// Bulk conductivities in W/m-K.
struct MaterialSet {
  double k_si = 148.0;
  double k_cu = 400.0;
  double k_tsv = 400.0;
};

// Homogenized pair: in-plane (x = y) and vertical conductivity, W/m-K.
struct AnisotropicConductivity {
  double k_xy = 0;
  double k_z = 0;
};

void validate(const TsvLayout& layout);
void validate(const MaterialSet& mats);

// Pillar area fraction N*pi*r^2 / (A*B). Throws when the layout is
// geometrically impossible (fraction > 1).
double areal_density(const TsvLayout& layout);

// Edge length of the square region owned by each pillar, sqrt(A*B/N).
// Throws for count == 0 (degenerate layout; callers bypass homogenization).
double cell_edge_um(const TsvLayout& layout);

// In-plane conductivity from the series-parallel unit-cell model: within one
// cell of edge c the pillar is replaced by an equal-area square band of width
// a = c*sqrt(rho); the band (copper and silicon in parallel) is in series
// with the remaining silicon.
double k_inplane(const TsvLayout& layout, const MaterialSet& mats);

// Vertical conductivity: area-weighted parallel combination
// rho*k_tsv + (1-rho)*k_si.
double k_vertical(const TsvLayout& layout, const MaterialSet& mats);

// Both directions at once; count == 0 yields isotropic silicon.
AnisotropicConductivity homogenize(const TsvLayout& layout, const MaterialSet& mats);

// One row of the shipped preset table. k holds the published canonical pair,
// which is intentionally not recomputed from the formulas (the published
// pairs are not mutually consistent with any single material set).
struct TsvPreset {
  std::string name;       // e.g. "TSV_256", "pure_si"
  int code = 0;           // ordinal by fill fraction: 0 = pure_si
  TsvLayout layout;
  double fill_fraction = 0;  // published value
  AnisotropicConductivity k; // published canonical pair
};

class PresetTable {
 public:
  static PresetTable load(const std::string& path);

  const TsvPreset* find(const std::string& name) const;
  const TsvPreset& by_name(const std::string& name) const;  // throws if unknown
  const TsvPreset& by_code(int code) const;
  const std::vector<TsvPreset>& all() const { return presets_; }
  int version() const { return version_; }

 private:
  std::vector<TsvPreset> presets_;
  int version_ = 0;
};

}  // namespace hbmtherm
