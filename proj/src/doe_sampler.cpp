#include "hbmtherm/doe_sampler.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

#include "hbmtherm/rng.hpp"
#include "hbmtherm/text_io.hpp"

namespace hbmtherm {

namespace {

bool family_supported(const ParameterSpace& space, int family) {
  return std::find(space.families.begin(), space.families.end(), family) !=
         space.families.end();
}

// Reference per-family sample allocation (proportions of a 13,494 draw).
const std::map<int, size_t>& reference_allocation() {
  static const std::map<int, size_t> ref = {{1, 504}, {2, 5832}, {4, 3391}, {8, 3767}};
  return ref;
}

}  // namespace

std::vector<Dimension> dimensions_for(const ParameterSpace& space, int family) {
  if (!family_supported(space, family))
    throw std::invalid_argument("unsupported family: " + std::to_string(family));
  std::vector<Dimension> dims;
  for (int s = 0; s < family; ++s)
    dims.push_back({Dimension::Kind::Thickness, s, space.thickness_levels_um, {}});
  for (int s = 0; s < family; ++s)
    dims.push_back({Dimension::Kind::Preset, s, {}, space.preset_levels});
  for (int s = 0; s <= family; ++s) {
    std::vector<double> levels;
    if (family == 1)
      levels = (s == 0) ? space.logic_power_levels_single_w : space.power_levels_single_w;
    else
      levels = space.power_levels_w;
    dims.push_back({Dimension::Kind::Power, s, std::move(levels), {}});
  }
  dims.push_back({Dimension::Kind::Htc, 0, space.htc_levels, {}});
  dims.push_back({Dimension::Kind::Htc, 1, space.htc_levels, {}});
  for (const auto& d : dims)
    if (d.level_count() == 0)
      throw std::invalid_argument("parameter space has an empty level list");
  return dims;
}

uint64_t enumerate_count(const ParameterSpace& space, int family) {
  uint64_t total = 1;
  for (const auto& d : dimensions_for(space, family)) {
    uint64_t levels = d.level_count();
    if (total > UINT64_MAX / levels)
      throw std::overflow_error("combination count overflows 64 bits");
    total *= levels;
  }
  return total;
}

std::map<int, size_t> allocate_counts(const ParameterSpace& space, size_t total) {
  const auto& ref = reference_allocation();
  double weight_sum = 0;
  for (int f : space.families) {
    auto it = ref.find(f);
    if (it == ref.end())
      throw std::invalid_argument("no reference allocation for family " + std::to_string(f));
    weight_sum += double(it->second);
  }
  std::map<int, size_t> counts;
  std::vector<std::pair<double, int>> remainders;  // (-fraction, family)
  size_t assigned = 0;
  for (int f : space.families) {
    double share = double(total) * double(ref.at(f)) / weight_sum;
    size_t base = size_t(share);
    counts[f] = base;
    assigned += base;
    remainders.push_back({-(share - double(base)), f});
  }
  std::sort(remainders.begin(), remainders.end());
  for (size_t i = 0; assigned < total; ++i) {
    counts[remainders[i % remainders.size()].second] += 1;
    ++assigned;
  }
  return counts;
}

std::string compute_case_id(const SampleCase& c) {
  std::string canon = std::to_string(c.family);
  for (double t : c.thicknesses_um) canon += "|" + format_double(t);
  for (const auto& p : c.presets) canon += "|" + p;
  for (double p : c.powers_w) canon += "|" + format_double(p);
  canon += "|" + format_double(c.htc_top) + "|" + format_double(c.htc_bottom);
  uint64_t h = fnv1a(canon);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%d-%020llu", c.family,
                static_cast<unsigned long long>(h));
  return buf;
}

namespace {

SampleCase case_from_levels(const std::vector<Dimension>& dims, int family,
                            const std::vector<uint16_t>& levels) {
  SampleCase c;
  c.family = family;
  c.thicknesses_um.assign(family, 0);
  c.presets.assign(family, "");
  c.powers_w.assign(family + 1, 0);
  for (size_t d = 0; d < dims.size(); ++d) {
    const Dimension& dim = dims[d];
    switch (dim.kind) {
      case Dimension::Kind::Thickness:
        c.thicknesses_um[dim.slot] = dim.numeric_levels[levels[d]];
        break;
      case Dimension::Kind::Preset:
        c.presets[dim.slot] = dim.string_levels[levels[d]];
        break;
      case Dimension::Kind::Power:
        c.powers_w[dim.slot] = dim.numeric_levels[levels[d]];
        break;
      case Dimension::Kind::Htc:
        (dim.slot == 0 ? c.htc_top : c.htc_bottom) = dim.numeric_levels[levels[d]];
        break;
    }
  }
  c.case_id = compute_case_id(c);
  return c;
}

std::string key_of(const std::vector<std::vector<uint16_t>>& columns, size_t row) {
  std::string key(columns.size(), '\0');
  for (size_t d = 0; d < columns.size(); ++d)
    key[d] = char(columns[d][row] & 0xff);
  return key;
}

// Balanced column: each level appears floor(m/L) or ceil(m/L) times.
std::vector<uint16_t> balanced_column(size_t m, size_t levels, Rng& rng) {
  std::vector<uint16_t> col(m);
  for (size_t j = 0; j < m; ++j) col[j] = uint16_t(j % levels);
  rng.shuffle(col);
  return col;
}

// Repair duplicate rows by swapping a dimension's level between two rows.
// Swaps permute within a column, so per-dimension level histograms are
// untouched. Throws when the attempt budget runs out.
void dedupe_by_swaps(std::vector<std::vector<uint16_t>>& columns, size_t m, Rng& rng) {
  const size_t dims = columns.size();
  std::unordered_map<std::string, int> occupancy;
  std::vector<std::string> row_key(m);
  for (size_t r = 0; r < m; ++r) {
    row_key[r] = key_of(columns, r);
    occupancy[row_key[r]] += 1;
  }
  uint64_t budget = 5000ull * m + 100000ull;
  for (;;) {
    std::vector<size_t> to_fix;
    std::unordered_map<std::string, bool> seen;
    for (size_t r = 0; r < m; ++r) {
      if (occupancy[row_key[r]] > 1 && seen[row_key[r]])
        to_fix.push_back(r);
      seen[row_key[r]] = true;
    }
    if (to_fix.empty()) return;
    for (size_t r : to_fix) {
      if (occupancy[row_key[r]] <= 1) continue;  // fixed by an earlier swap
      bool fixed = false;
      for (int attempt = 0; attempt < 800 && !fixed; ++attempt) {
        if (budget-- == 0)
          throw std::runtime_error("lhs_sample: dedupe budget exhausted; "
                                   "requested count too dense for this space");
        size_t d = size_t(rng.next_below(dims));
        size_t r2 = size_t(rng.next_below(m));
        if (r2 == r || columns[d][r] == columns[d][r2]) continue;
        std::swap(columns[d][r], columns[d][r2]);
        std::string kr = key_of(columns, r);
        std::string kr2 = key_of(columns, r2);
        occupancy[row_key[r]] -= 1;
        occupancy[row_key[r2]] -= 1;
        // Strict phase requires both rows unique after the swap; the late
        // relaxed phase only requires the row under repair to become unique.
        bool ok = (occupancy[kr] == 0) &&
                  (occupancy[kr2] == 0 || (attempt >= 400 && kr2 != kr));
        if (ok) {
          occupancy[kr] += 1;
          occupancy[kr2] += 1;
          row_key[r] = kr;
          row_key[r2] = kr2;
          fixed = true;
        } else {
          occupancy[row_key[r]] += 1;
          occupancy[row_key[r2]] += 1;
          std::swap(columns[d][r], columns[d][r2]);
        }
      }
      if (!fixed)
        throw std::runtime_error("lhs_sample: dedupe budget exhausted; "
                                 "requested count too dense for this space");
    }
  }
}

// Full factorial in lexicographic level order.
std::vector<std::vector<uint16_t>> full_factorial(const std::vector<Dimension>& dims,
                                                  uint64_t total) {
  std::vector<std::vector<uint16_t>> columns(dims.size());
  for (auto& c : columns) c.reserve(size_t(total));
  std::vector<uint16_t> current(dims.size(), 0);
  for (uint64_t n = 0; n < total; ++n) {
    for (size_t d = 0; d < dims.size(); ++d) columns[d].push_back(current[d]);
    for (size_t d = dims.size(); d-- > 0;) {
      if (++current[d] < dims[d].level_count()) break;
      current[d] = 0;
    }
  }
  return columns;
}

}  // namespace

std::vector<SampleCase> lhs_sample(const ParameterSpace& space, const SamplePlan& plan) {
  std::vector<SampleCase> out;
  for (const auto& [family, count] : plan.counts) {
    if (count == 0) continue;
    const auto dims = dimensions_for(space, family);
    const uint64_t space_size = enumerate_count(space, family);
    if (count > space_size)
      throw std::invalid_argument("requested " + std::to_string(count) +
                                  " samples from a space of " +
                                  std::to_string(space_size) + " (family " +
                                  std::to_string(family) + ")");
    Rng rng(Rng::derive(plan.seed, {0x4c4853ull /*LHS*/, uint64_t(family)}));
    std::vector<std::vector<uint16_t>> columns;
    if (plan.dedupe && count == space_size) {
      // The only duplicate-free draw of the whole space is the space itself.
      columns = full_factorial(dims, space_size);
      std::vector<size_t> order(count);
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      std::vector<std::vector<uint16_t>> shuffled(columns.size());
      for (size_t d = 0; d < columns.size(); ++d) {
        shuffled[d].resize(order.size());
        for (size_t i = 0; i < order.size(); ++i) shuffled[d][i] = columns[d][order[i]];
      }
      columns = std::move(shuffled);
    } else {
      columns.reserve(dims.size());
      for (const auto& d : dims)
        columns.push_back(balanced_column(count, d.level_count(), rng));
      if (plan.dedupe) dedupe_by_swaps(columns, count, rng);
    }
    std::vector<uint16_t> levels(dims.size());
    for (size_t r = 0; r < count; ++r) {
      for (size_t d = 0; d < dims.size(); ++d) levels[d] = columns[d][r];
      out.push_back(case_from_levels(dims, family, levels));
    }
  }
  return out;
}

FilterResult filter_physical(const std::vector<SampleCase>& cases,
                             const std::vector<CaseOutcome>& outcomes,
                             double t_max_threshold_c) {
  if (cases.size() != outcomes.size())
    throw std::invalid_argument("filter_physical: one outcome per case required");
  FilterResult result;
  for (size_t i = 0; i < cases.size(); ++i) {
    if (!outcomes[i].converged)
      result.excluded.push_back({cases[i].case_id, "non-converged"});
    else if (outcomes[i].t_max_c > t_max_threshold_c)
      result.excluded.push_back({cases[i].case_id, "t_max_above_threshold"});
    else
      result.kept_indices.push_back(i);
  }
  return result;
}

}  // namespace hbmtherm
