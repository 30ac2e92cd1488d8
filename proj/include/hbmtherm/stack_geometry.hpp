#pragma once

#include <string>
#include <vector>

#include "hbmtherm/doe_sampler.hpp"
#include "hbmtherm/tsv_homogenization.hpp"

namespace hbmtherm {

struct ChipLayer {
  double thickness_um = 0;
  AnisotropicConductivity k;   // homogenized pair, W/m-K
  double power_w = 0;
  std::string preset_name;     // "" when no pillar array (plain material)
};

// Fixed geometric defaults plus discretization policy. Everything here is
// configurable from the run configuration file.
struct GeometryConfig {
  double footprint_x_um = 10000;
  double footprint_y_um = 10000;
  double substrate_thickness_um = 100;   // used when a case does not sample it
  double substrate_k = 130;              // isotropic, W/m-K
  double bond_thickness_um = 10;         // per bonding layer
  AnisotropicConductivity bond_k = {0.70, 15.19};
  double chip_budget_um = 720;           // total of all stacked chips
  double ambient_c = 25;
  enum class SourceFace { Bottom, Top } source_face = SourceFace::Bottom;
  // Grid resolution policy.
  int nx = 16;
  int ny = 16;
  double chip_cell_um = 10;  // target z cell height inside chips
  int substrate_cells = 4;
  int bond_cells = 1;
};

// Fully resolved parametric stack: substrate (the logic die), then for each
// chip a bonding layer followed by the chip, bottom to top.
struct HbmStack {
  int layer_count = 0;
  ChipLayer substrate;
  std::vector<ChipLayer> chips;  // size layer_count, bottom -> top
  double bond_thickness_um = 10;
  AnisotropicConductivity bond_k = {0.70, 15.19};
  double htc_top = 0;
  double htc_bottom = 0;
  double ambient_c = 25;
  double footprint_x_um = 10000;
  double footprint_y_um = 10000;
  double chip_budget_um = 720;

  struct Slab {
    enum class Kind { Substrate, Bond, Chip } kind;
    int chip_index;      // 1-based for Kind::Chip and the bond below it, else 0
    double z_lo_um, z_hi_um;
    const ChipLayer* layer;  // null for bonds
  };

  // Substrate, then (bond, chip) per stacked layer, bottom to top.
  std::vector<Slab> slabs() const;

  double total_height_um() const;

  // Zone index for a height: 0 inside the substrate or the first bond,
  // i from the bottom of chip i up to the bottom of chip i+1.
  int layer_of(double z_um) const;

  // Lower/upper zone boundaries used by layer_of, for diagnostics.
  std::vector<double> chip_zone_bottoms_um() const;
};

// Resolve a sampled case into a stack: the logic-die dimensions land on the
// substrate, chips 1..n-1 take the sampled values, the top chip is pure
// silicon and absorbs the remaining thickness budget. Conductivities come
// from the canonical preset table. Throws on unknown presets or a
// non-positive top-chip remainder.
HbmStack build_stack(const SampleCase& c, const GeometryConfig& geo,
                     const PresetTable& presets);

void validate(const HbmStack& stack);

}  // namespace hbmtherm
