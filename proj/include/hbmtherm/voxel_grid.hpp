#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "hbmtherm/stack_geometry.hpp"

namespace hbmtherm {

// Structured layered grid carrying the discretized field problem. Lateral
// spacing is uniform; z spacing varies per layer. Conductivities are per
// cell, sources are volumetric (W/m^3), the top and bottom faces carry Robin
// (convective) coefficients and all side walls are adiabatic.
struct VoxelGrid {
  int nx = 0, ny = 0, nz = 0;
  double dx_um = 0, dy_um = 0;
  std::vector<double> dz_um;        // nz entries
  std::vector<double> z_center_um;  // nz entries, height above stack bottom
  std::vector<double> kx, ky, kz;   // per cell, W/m-K
  std::vector<double> source_w_m3;  // per cell
  std::vector<int> zone_of_layer;   // nz entries: chip zone id (0 = substrate)
  double htc_top = 0, htc_bottom = 0;
  double ambient_c = 25;

  size_t cell_count() const { return size_t(nx) * ny * nz; }
  size_t idx(int i, int j, int k) const {
    return size_t(i) + size_t(nx) * (size_t(j) + size_t(ny) * size_t(k));
  }
};

// z-discretization: an ordered list of bands, one or more grid layers each,
// spanning the stack's slabs exactly.
struct LayeredGridSpec {
  int nx = 0, ny = 0;
  struct Band {
    int slab_index = 0;     // into HbmStack::slabs()
    int cells = 0;          // >= 1
    double cell_height_um = 0;
  };
  std::vector<Band> z_partition;
};

// Default discretization policy driven by GeometryConfig: fixed cell counts
// for the substrate and bonds, chips split to roughly chip_cell_um.
LayeredGridSpec make_grid_spec(const HbmStack& stack, const GeometryConfig& geo);

// Lower the stack onto the grid with homogenized per-slab conductivities,
// then deposit the heat sources and attach the boundary coefficients.
VoxelGrid to_grid(const HbmStack& stack, const LayeredGridSpec& spec,
                  GeometryConfig::SourceFace source_face = GeometryConfig::SourceFace::Bottom);

// Same discretization but pillar arrays resolved cell by cell: cells whose
// centers fall inside a pillar become solid copper columns, the rest plain
// silicon. Used for homogenization-fidelity validation.
VoxelGrid to_grid_explicit_tsv(const HbmStack& stack, const LayeredGridSpec& spec,
                               const PresetTable& presets, const MaterialSet& mats,
                               GeometryConfig::SourceFace source_face =
                                   GeometryConfig::SourceFace::Bottom);

// Deposit each powered slab's total power uniformly over the single grid
// layer at its active plane. Chips use source_face; the substrate's active
// plane is its top face (device side). Returns the grid with sources set.
VoxelGrid deposit_power(const HbmStack& stack, VoxelGrid grid,
                        GeometryConfig::SourceFace source_face);

// Total injected power, W (integral of the source field).
double integrated_source_w(const VoxelGrid& grid);

// Plain-text cell table for inspection.
void write_debug_dump(const VoxelGrid& grid, std::ostream& out);

}  // namespace hbmtherm
