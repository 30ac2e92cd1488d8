#include "hbmtherm/stack_geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace hbmtherm {

std::vector<HbmStack::Slab> HbmStack::slabs() const {
  std::vector<Slab> out;
  double z = 0;
  out.push_back({Slab::Kind::Substrate, 0, z, z + substrate.thickness_um, &substrate});
  z += substrate.thickness_um;
  for (int i = 0; i < layer_count; ++i) {
    out.push_back({Slab::Kind::Bond, i + 1, z, z + bond_thickness_um, nullptr});
    z += bond_thickness_um;
    out.push_back({Slab::Kind::Chip, i + 1, z, z + chips[i].thickness_um, &chips[i]});
    z += chips[i].thickness_um;
  }
  return out;
}

double HbmStack::total_height_um() const {
  double z = substrate.thickness_um + layer_count * bond_thickness_um;
  for (const auto& c : chips) z += c.thickness_um;
  return z;
}

std::vector<double> HbmStack::chip_zone_bottoms_um() const {
  std::vector<double> bottoms;
  double z = substrate.thickness_um;
  for (int i = 0; i < layer_count; ++i) {
    z += bond_thickness_um;
    bottoms.push_back(z);  // bottom face of chip i+1
    z += chips[i].thickness_um;
  }
  return bottoms;
}

int HbmStack::layer_of(double z_um) const {
  const auto bottoms = chip_zone_bottoms_um();
  int zone = 0;
  for (size_t i = 0; i < bottoms.size(); ++i)
    if (z_um >= bottoms[i]) zone = int(i) + 1;
  return zone;
}

void validate(const HbmStack& stack) {
  if (stack.layer_count < 1) throw std::invalid_argument("stack: layer_count < 1");
  if (int(stack.chips.size()) != stack.layer_count)
    throw std::invalid_argument("stack: chips length must equal layer_count");
  double chip_sum = 0;
  for (const auto& c : stack.chips) {
    if (c.thickness_um <= 0) throw std::invalid_argument("stack: chip thickness <= 0");
    if (c.power_w < 0) throw std::invalid_argument("stack: negative chip power");
    if (c.k.k_xy <= 0 || c.k.k_z <= 0)
      throw std::invalid_argument("stack: chip conductivity must be > 0");
    chip_sum += c.thickness_um;
  }
  if (std::abs(chip_sum - stack.chip_budget_um) > 1e-9 * stack.chip_budget_um)
    throw std::invalid_argument("stack: chip thicknesses do not close the budget");
  if (stack.substrate.thickness_um <= 0)
    throw std::invalid_argument("stack: substrate thickness <= 0");
  if (stack.htc_top <= 0 || stack.htc_bottom <= 0)
    throw std::invalid_argument("stack: heat transfer coefficients must be > 0");
  if (stack.footprint_x_um <= 0 || stack.footprint_y_um <= 0)
    throw std::invalid_argument("stack: footprint must be > 0");
}

HbmStack build_stack(const SampleCase& c, const GeometryConfig& geo,
                     const PresetTable& presets) {
  if (int(c.thicknesses_um.size()) != c.family ||
      int(c.presets.size()) != c.family ||
      int(c.powers_w.size()) != c.family + 1)
    throw std::invalid_argument("sample case: sequence lengths do not match family");

  HbmStack s;
  s.layer_count = c.family;
  s.bond_thickness_um = geo.bond_thickness_um;
  s.bond_k = geo.bond_k;
  s.htc_top = c.htc_top;
  s.htc_bottom = c.htc_bottom;
  s.ambient_c = geo.ambient_c;
  s.footprint_x_um = geo.footprint_x_um;
  s.footprint_y_um = geo.footprint_y_um;
  s.chip_budget_um = geo.chip_budget_um;

  // Logic die: sampled thickness/preset/power land on the substrate slab.
  s.substrate.thickness_um = c.thicknesses_um[0];
  s.substrate.preset_name = c.presets[0];
  s.substrate.k = presets.by_name(c.presets[0]).k;
  s.substrate.power_w = c.powers_w[0];

  s.chips.resize(c.family);
  double used = 0;
  for (int i = 1; i < c.family; ++i) {
    ChipLayer& chip = s.chips[i - 1];
    chip.thickness_um = c.thicknesses_um[i];
    chip.preset_name = c.presets[i];
    chip.k = presets.by_name(c.presets[i]).k;
    chip.power_w = c.powers_w[i];
    used += chip.thickness_um;
  }
  // Top chip: pure silicon, fills the remaining budget.
  ChipLayer& top = s.chips[c.family - 1];
  top.thickness_um = geo.chip_budget_um - used;
  if (top.thickness_um <= 0)
    throw std::invalid_argument("stack: sampled chip thicknesses leave no room "
                                "for the top chip within the budget");
  top.preset_name = "pure_si";
  top.k = presets.by_name("pure_si").k;
  top.power_w = c.powers_w[c.family];

  validate(s);
  return s;
}

}  // namespace hbmtherm
