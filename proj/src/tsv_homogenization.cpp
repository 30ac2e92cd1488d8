#include "hbmtherm/tsv_homogenization.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hbmtherm/text_io.hpp"

namespace hbmtherm {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void validate(const TsvLayout& layout) {
  if (layout.count < 0) throw std::invalid_argument("tsv layout: count < 0");
  if (layout.count > 0 && layout.radius_um <= 0)
    throw std::invalid_argument("tsv layout: radius must be > 0 when count > 0");
  if (layout.die_width_um <= 0 || layout.die_depth_um <= 0)
    throw std::invalid_argument("tsv layout: die dimensions must be > 0");
}

void validate(const MaterialSet& mats) {
  if (mats.k_si <= 0 || mats.k_cu <= 0 || mats.k_tsv <= 0)
    throw std::invalid_argument("materials: conductivities must be > 0");
}

double areal_density(const TsvLayout& layout) {
  validate(layout);
  if (layout.count == 0) return 0.0;
  const double pillar_area = layout.count * kPi * layout.radius_um * layout.radius_um;
  const double rho = pillar_area / (layout.die_width_um * layout.die_depth_um);
  if (rho > 1.0)
    throw std::invalid_argument("tsv layout: fill fraction exceeds 1 (impossible geometry)");
  return rho;
}

double cell_edge_um(const TsvLayout& layout) {
  validate(layout);
  if (layout.count == 0)
    throw std::domain_error("tsv layout: degenerate (count == 0), no per-pillar cell");
  return std::sqrt(layout.die_width_um * layout.die_depth_um / layout.count);
}

double k_inplane(const TsvLayout& layout, const MaterialSet& mats) {
  validate(mats);
  const double rho = areal_density(layout);
  const double c = cell_edge_um(layout);  // throws for count == 0
  const double a = c * std::sqrt(rho);    // equal-area square band width
  // Band: copper and silicon side by side (parallel, width-weighted).
  const double band = (a * mats.k_cu + (c - a) * mats.k_si) / c;
  // Cell: band in series with the remaining silicon along the flux direction.
  return c * band * mats.k_si / (a * mats.k_si + (c - a) * band);
}

double k_vertical(const TsvLayout& layout, const MaterialSet& mats) {
  validate(mats);
  const double rho = areal_density(layout);
  return rho * mats.k_tsv + (1.0 - rho) * mats.k_si;
}

AnisotropicConductivity homogenize(const TsvLayout& layout, const MaterialSet& mats) {
  validate(mats);
  if (layout.count == 0) {
    validate(layout);
    return {mats.k_si, mats.k_si};
  }
  return {k_inplane(layout, mats), k_vertical(layout, mats)};
}

PresetTable PresetTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open preset table: " + path);
  PresetTable table;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (starts_with(line, "#")) {
      // First comment carries the format version: "# ... v<N>"
      size_t pos = line.rfind(" v");
      if (table.version_ == 0 && pos != std::string::npos)
        table.version_ = int(parse_int(line.substr(pos + 2)));
      continue;
    }
    if (!header_seen) {  // column header row
      header_seen = true;
      continue;
    }
    auto f = split_csv(line);
    if (f.size() != 9)
      throw std::runtime_error("preset table " + path + ": line " +
                               std::to_string(line_no) + ": expected 9 fields");
    TsvPreset p;
    p.name = trim(f[0]);
    p.code = int(parse_int(trim(f[1])));
    p.layout.count = int(parse_int(trim(f[2])));
    p.layout.radius_um = parse_double(trim(f[3]));
    p.layout.die_width_um = parse_double(trim(f[4]));
    p.layout.die_depth_um = parse_double(trim(f[5]));
    p.fill_fraction = parse_double(trim(f[6]));
    p.k.k_xy = parse_double(trim(f[7]));
    p.k.k_z = parse_double(trim(f[8]));
    validate(p.layout);
    table.presets_.push_back(std::move(p));
  }
  if (table.presets_.empty())
    throw std::runtime_error("preset table " + path + ": no entries");
  return table;
}

const TsvPreset* PresetTable::find(const std::string& name) const {
  for (const auto& p : presets_)
    if (p.name == name) return &p;
  return nullptr;
}

const TsvPreset& PresetTable::by_name(const std::string& name) const {
  const TsvPreset* p = find(name);
  if (!p) throw std::invalid_argument("unknown conductivity preset: " + name);
  return *p;
}

const TsvPreset& PresetTable::by_code(int code) const {
  for (const auto& p : presets_)
    if (p.code == code) return p;
  throw std::invalid_argument("unknown preset code: " + std::to_string(code));
}

}  // namespace hbmtherm
