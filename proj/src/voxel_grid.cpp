#include "hbmtherm/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "hbmtherm/text_io.hpp"

namespace hbmtherm {

namespace {

struct BandRange {
  int slab_index;
  int first_layer;  // z-layer index of the band's first cell layer
  int last_layer;
};

std::vector<BandRange> band_ranges(const LayeredGridSpec& spec) {
  std::vector<BandRange> out;
  int layer = 0;
  for (const auto& band : spec.z_partition) {
    out.push_back({band.slab_index, layer, layer + band.cells - 1});
    layer += band.cells;
  }
  return out;
}

VoxelGrid grid_skeleton(const HbmStack& stack, const LayeredGridSpec& spec) {
  if (spec.nx < 1 || spec.ny < 1 || spec.z_partition.empty())
    throw std::invalid_argument("grid spec: dims must be >= 1");
  const auto slabs = stack.slabs();
  VoxelGrid g;
  g.nx = spec.nx;
  g.ny = spec.ny;
  g.dx_um = stack.footprint_x_um / spec.nx;
  g.dy_um = stack.footprint_y_um / spec.ny;
  double z = 0;
  size_t next_slab = 0;
  for (const auto& band : spec.z_partition) {
    if (band.cells < 1 || band.cell_height_um <= 0)
      throw std::invalid_argument("grid spec: bands need >= 1 cells of positive height");
    if (band.slab_index < 0 || band.slab_index >= int(slabs.size()))
      throw std::invalid_argument("grid spec: band references a missing slab");
    if (size_t(band.slab_index) != next_slab)
      throw std::invalid_argument("grid spec: bands must walk the slabs in order");
    const auto& slab = slabs[band.slab_index];
    const double band_height = band.cells * band.cell_height_um;
    const double slab_height = slab.z_hi_um - slab.z_lo_um;
    if (std::abs(band_height - slab_height) > 1e-6)
      throw std::invalid_argument("grid spec: band does not span its slab");
    for (int c = 0; c < band.cells; ++c) {
      g.dz_um.push_back(band.cell_height_um);
      g.z_center_um.push_back(z + (c + 0.5) * band.cell_height_um);
    }
    z += band_height;
    ++next_slab;
  }
  if (next_slab != slabs.size())
    throw std::invalid_argument("grid spec: bands do not cover every slab");
  g.nz = int(g.dz_um.size());
  const size_t n = g.cell_count();
  g.kx.assign(n, 0);
  g.ky.assign(n, 0);
  g.kz.assign(n, 0);
  g.source_w_m3.assign(n, 0);
  g.zone_of_layer.resize(g.nz);
  for (int k = 0; k < g.nz; ++k)
    g.zone_of_layer[k] = stack.layer_of(g.z_center_um[k]);
  g.htc_top = stack.htc_top;
  g.htc_bottom = stack.htc_bottom;
  g.ambient_c = stack.ambient_c;
  return g;
}

void fill_band(VoxelGrid& g, const BandRange& range, const AnisotropicConductivity& k) {
  for (int layer = range.first_layer; layer <= range.last_layer; ++layer)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const size_t c = g.idx(i, j, layer);
        g.kx[c] = k.k_xy;
        g.ky[c] = k.k_xy;
        g.kz[c] = k.k_z;
      }
}

AnisotropicConductivity slab_conductivity(const HbmStack& stack,
                                          const HbmStack::Slab& slab) {
  return slab.kind == HbmStack::Slab::Kind::Bond ? stack.bond_k : slab.layer->k;
}

}  // namespace

LayeredGridSpec make_grid_spec(const HbmStack& stack, const GeometryConfig& geo) {
  LayeredGridSpec spec;
  spec.nx = geo.nx;
  spec.ny = geo.ny;
  const auto slabs = stack.slabs();
  for (size_t s = 0; s < slabs.size(); ++s) {
    const double h = slabs[s].z_hi_um - slabs[s].z_lo_um;
    int cells = 1;
    switch (slabs[s].kind) {
      case HbmStack::Slab::Kind::Substrate: cells = geo.substrate_cells; break;
      case HbmStack::Slab::Kind::Bond: cells = geo.bond_cells; break;
      case HbmStack::Slab::Kind::Chip:
        cells = std::max(1, int(std::lround(h / geo.chip_cell_um)));
        break;
    }
    spec.z_partition.push_back({int(s), cells, h / cells});
  }
  return spec;
}

VoxelGrid deposit_power(const HbmStack& stack, VoxelGrid grid,
                        GeometryConfig::SourceFace source_face) {
  std::fill(grid.source_w_m3.begin(), grid.source_w_m3.end(), 0.0);
  const auto slabs = stack.slabs();
  const double area_m2 = stack.footprint_x_um * stack.footprint_y_um * 1e-12;

  // Locate each slab's grid layers from the z centers (grids built by
  // grid_skeleton walk the slabs in order, so a contiguous scan suffices).
  int layer = 0;
  for (const auto& slab : slabs) {
    int first = layer;
    while (layer < grid.nz &&
           grid.z_center_um[layer] > slab.z_lo_um &&
           grid.z_center_um[layer] < slab.z_hi_um)
      ++layer;
    int last = layer - 1;
    if (slab.layer == nullptr || slab.layer->power_w <= 0) continue;
    if (last < first)
      throw std::invalid_argument("deposit_power: slab has no grid layers");
    // Active plane: chips dissipate at source_face; the substrate (logic
    // die) at its top face, where its devices sit.
    int target;
    if (slab.kind == HbmStack::Slab::Kind::Substrate)
      target = last;
    else
      target = source_face == GeometryConfig::SourceFace::Bottom ? first : last;
    const double q_w_m3 = slab.layer->power_w / (area_m2 * grid.dz_um[target] * 1e-6);
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i)
        grid.source_w_m3[grid.idx(i, j, target)] += q_w_m3;
  }
  return grid;
}

VoxelGrid to_grid(const HbmStack& stack, const LayeredGridSpec& spec,
                  GeometryConfig::SourceFace source_face) {
  VoxelGrid g = grid_skeleton(stack, spec);
  const auto slabs = stack.slabs();
  for (const auto& range : band_ranges(spec))
    fill_band(g, range, slab_conductivity(stack, slabs[range.slab_index]));
  return deposit_power(stack, std::move(g), source_face);
}

VoxelGrid to_grid_explicit_tsv(const HbmStack& stack, const LayeredGridSpec& spec,
                               const PresetTable& presets, const MaterialSet& mats,
                               GeometryConfig::SourceFace source_face) {
  VoxelGrid g = grid_skeleton(stack, spec);
  const auto slabs = stack.slabs();
  for (const auto& range : band_ranges(spec)) {
    const auto& slab = slabs[range.slab_index];
    if (slab.kind == HbmStack::Slab::Kind::Bond) {
      fill_band(g, range, stack.bond_k);
      continue;
    }
    const std::string& preset_name = slab.layer->preset_name;
    const TsvPreset* preset = preset_name.empty() ? nullptr : presets.find(preset_name);
    if (preset == nullptr || preset->layout.count == 0) {
      // No pillar array: plain material. Named presets resolve to silicon.
      fill_band(g, range, preset ? AnisotropicConductivity{mats.k_si, mats.k_si}
                                 : slab.layer->k);
      continue;
    }
    const int n = preset->layout.count;
    const int per_side = int(std::lround(std::sqrt(double(n))));
    if (per_side * per_side != n)
      throw std::invalid_argument("explicit TSV grid needs a square pillar count, got " +
                                  std::to_string(n));
    // Pitch over the stack footprint; radius chosen to keep the preset's
    // fill fraction regardless of footprint.
    const double rho = areal_density(preset->layout);
    const double pitch_x = stack.footprint_x_um / per_side;
    const double pitch_y = stack.footprint_y_um / per_side;
    const double r2 = rho * pitch_x * pitch_y / 3.14159265358979323846;
    for (int layer = range.first_layer; layer <= range.last_layer; ++layer)
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const double x = (i + 0.5) * g.dx_um;
          const double y = (j + 0.5) * g.dy_um;
          const double cx = (std::floor(x / pitch_x) + 0.5) * pitch_x;
          const double cy = (std::floor(y / pitch_y) + 0.5) * pitch_y;
          const double dx = x - cx, dy = y - cy;
          const bool copper = dx * dx + dy * dy <= r2;
          const double k = copper ? mats.k_cu : mats.k_si;
          const size_t c = g.idx(i, j, layer);
          g.kx[c] = k;
          g.ky[c] = k;
          g.kz[c] = copper ? mats.k_tsv : mats.k_si;
        }
  }
  return deposit_power(stack, std::move(g), source_face);
}

double integrated_source_w(const VoxelGrid& grid) {
  const double cell_area_m2 = grid.dx_um * grid.dy_um * 1e-12;
  double total = 0;
  for (int k = 0; k < grid.nz; ++k) {
    const double vol_m3 = cell_area_m2 * grid.dz_um[k] * 1e-6;
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i)
        total += grid.source_w_m3[grid.idx(i, j, k)] * vol_m3;
  }
  return total;
}

void write_debug_dump(const VoxelGrid& grid, std::ostream& out) {
  out << "# voxel grid dump: nx=" << grid.nx << " ny=" << grid.ny
      << " nz=" << grid.nz << " htc_top=" << format_double(grid.htc_top)
      << " htc_bottom=" << format_double(grid.htc_bottom)
      << " ambient_c=" << format_double(grid.ambient_c) << "\n";
  out << "i,j,k,x_um,y_um,z_um,kx,ky,kz,q_w_m3,zone\n";
  for (int k = 0; k < grid.nz; ++k)
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        const size_t c = grid.idx(i, j, k);
        out << i << ',' << j << ',' << k << ','
            << format_double((i + 0.5) * grid.dx_um) << ','
            << format_double((j + 0.5) * grid.dy_um) << ','
            << format_double(grid.z_center_um[k]) << ','
            << format_double(grid.kx[c]) << ',' << format_double(grid.ky[c]) << ','
            << format_double(grid.kz[c]) << ','
            << format_double(grid.source_w_m3[c]) << ','
            << grid.zone_of_layer[k] << "\n";
      }
}

}  // namespace hbmtherm
