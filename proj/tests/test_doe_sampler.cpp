#include <doctest.h>

#include <map>
#include <set>

#include "hbmtherm/doe_sampler.hpp"

using namespace hbmtherm;

namespace {

// Per-dimension level histogram of a draw, restricted to one family.
std::vector<std::map<double, size_t>> numeric_histograms(
    const ParameterSpace& space, const std::vector<SampleCase>& cases, int family) {
  const auto dims = dimensions_for(space, family);
  std::vector<std::map<double, size_t>> hist(dims.size());
  for (const auto& c : cases) {
    if (c.family != family) continue;
    for (size_t d = 0; d < dims.size(); ++d) {
      double v = 0;
      switch (dims[d].kind) {
        case Dimension::Kind::Thickness: v = c.thicknesses_um[dims[d].slot]; break;
        case Dimension::Kind::Preset: continue;  // counted separately
        case Dimension::Kind::Power: v = c.powers_w[dims[d].slot]; break;
        case Dimension::Kind::Htc: v = dims[d].slot == 0 ? c.htc_top : c.htc_bottom; break;
      }
      hist[d][v] += 1;
    }
  }
  return hist;
}

void check_balance(const ParameterSpace& space, const std::vector<SampleCase>& cases,
                   int family, size_t count) {
  const auto dims = dimensions_for(space, family);
  const auto hist = numeric_histograms(space, cases, family);
  for (size_t d = 0; d < dims.size(); ++d) {
    if (dims[d].kind == Dimension::Kind::Preset) continue;
    const size_t levels = dims[d].level_count();
    for (const auto& [value, occurrences] : hist[d]) {
      const double uniform = double(count) / double(levels);
      CHECK(std::abs(double(occurrences) - uniform) <= 1.0 + 1e-9);
    }
  }
}

}  // namespace

TEST_CASE("combination counts") {
  ParameterSpace space;
  CHECK(enumerate_count(space, 1) == 567);
  CHECK(enumerate_count(space, 2) == 19683);
  CHECK(enumerate_count(space, 4) == 14348907);
  CHECK(enumerate_count(space, 8) == 7625597484987ull);
  CHECK_THROWS_AS(enumerate_count(space, 3), std::invalid_argument);

  // Degenerate space: one level everywhere.
  ParameterSpace tiny;
  tiny.families = {2};
  tiny.thickness_levels_um = {30};
  tiny.preset_levels = {"TSV_64"};
  tiny.power_levels_w = {5};
  tiny.htc_levels = {4000};
  CHECK(enumerate_count(tiny, 2) == 1);
}

TEST_CASE("dimension structure") {
  ParameterSpace space;
  CHECK(dimensions_for(space, 8).size() == 27);  // 8 + 8 + 9 + 2
  CHECK(dimensions_for(space, 4).size() == 15);
  CHECK(dimensions_for(space, 2).size() == 9);
  CHECK(dimensions_for(space, 1).size() == 6);   // 1 + 1 + 2 + 2
}

TEST_CASE("reference allocation") {
  ParameterSpace space;
  const auto counts = allocate_counts(space, 13494);
  CHECK(counts.at(1) == 504);
  CHECK(counts.at(2) == 5832);
  CHECK(counts.at(4) == 3391);
  CHECK(counts.at(8) == 3767);

  const auto smaller = allocate_counts(space, 2000);
  size_t total = 0;
  for (const auto& [family, n] : smaller) total += n;
  CHECK(total == 2000);
}

TEST_CASE("single-dimension stratification") {
  // One real dimension (thickness) with three levels; everything else is a
  // single level.
  ParameterSpace space;
  space.families = {1};
  space.preset_levels = {"TSV_64"};
  space.power_levels_single_w = {5};
  space.logic_power_levels_single_w = {2};
  space.htc_levels = {4000};
  SamplePlan plan;
  plan.seed = 3;
  plan.counts = {{1, 3}};
  const auto cases = lhs_sample(space, plan);
  REQUIRE(cases.size() == 3);
  std::set<double> seen;
  for (const auto& c : cases) seen.insert(c.thicknesses_um[0]);
  CHECK(seen == std::set<double>{10, 30, 50});
}

TEST_CASE("sampling the paper-sized plan") {
  ParameterSpace space;
  SamplePlan plan;
  plan.seed = 42;
  plan.counts = allocate_counts(space, 13494);
  const auto cases = lhs_sample(space, plan);
  REQUIRE(cases.size() == 13494);

  std::map<int, size_t> per_family;
  std::set<std::string> ids;
  for (const auto& c : cases) {
    per_family[c.family] += 1;
    ids.insert(c.case_id);
  }
  CHECK(per_family.at(1) == 504);
  CHECK(per_family.at(2) == 5832);
  CHECK(per_family.at(4) == 3391);
  CHECK(per_family.at(8) == 3767);
  CHECK(ids.size() == cases.size());  // no duplicates

  check_balance(space, cases, 1, 504);
  check_balance(space, cases, 2, 5832);
  check_balance(space, cases, 8, 3767);
}

TEST_CASE("seed determinism") {
  ParameterSpace space;
  SamplePlan plan;
  plan.seed = 1234;
  plan.counts = {{1, 40}, {2, 60}, {4, 60}, {8, 60}};
  const auto a = lhs_sample(space, plan);
  const auto b = lhs_sample(space, plan);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].case_id == b[i].case_id);

  plan.seed = 1235;
  const auto c = lhs_sample(space, plan);
  size_t same = 0;
  for (size_t i = 0; i < a.size(); ++i) same += a[i].case_id == c[i].case_id;
  CHECK(same < a.size() / 2);
}

TEST_CASE("drawing the whole space") {
  ParameterSpace space;
  space.families = {1};
  space.thickness_levels_um = {10, 30};
  space.preset_levels = {"TSV_64"};
  space.power_levels_single_w = {2, 3};
  space.logic_power_levels_single_w = {2};
  space.htc_levels = {200, 4000};
  REQUIRE(enumerate_count(space, 1) == 16);
  SamplePlan plan;
  plan.seed = 9;
  plan.counts = {{1, 16}};
  const auto cases = lhs_sample(space, plan);
  std::set<std::string> ids;
  for (const auto& c : cases) ids.insert(c.case_id);
  CHECK(ids.size() == 16);

  plan.counts = {{1, 17}};
  CHECK_THROWS_AS(lhs_sample(space, plan), std::invalid_argument);
}

TEST_CASE("case ids are family-prefixed and stable") {
  ParameterSpace space;
  SamplePlan plan;
  plan.seed = 5;
  plan.counts = {{4, 10}};
  const auto cases = lhs_sample(space, plan);
  for (const auto& c : cases) {
    REQUIRE(c.case_id.size() == 22);  // "4-" + 20 digits
    CHECK(c.case_id[0] == '4');
    CHECK(c.case_id[1] == '-');
    CHECK(compute_case_id(c) == c.case_id);
  }
}

TEST_CASE("physical filter") {
  ParameterSpace space;
  SamplePlan plan;
  plan.seed = 8;
  plan.counts = {{2, 6}};
  const auto cases = lhs_sample(space, plan);

  SUBCASE("identity when everything converged below threshold") {
    std::vector<CaseOutcome> outcomes(cases.size(), {true, 80.0});
    const auto result = filter_physical(cases, outcomes, 300.0);
    CHECK(result.kept_indices.size() == cases.size());
    CHECK(result.excluded.empty());
  }
  SUBCASE("non-converged and over-threshold cases are dropped with reasons") {
    std::vector<CaseOutcome> outcomes(cases.size(), {true, 80.0});
    outcomes[1].converged = false;
    outcomes[3].t_max_c = 400.0;
    const auto result = filter_physical(cases, outcomes, 300.0);
    CHECK(result.kept_indices.size() == cases.size() - 2);
    REQUIRE(result.excluded.size() == 2);
    CHECK(result.excluded[0].case_id == cases[1].case_id);
    CHECK(result.excluded[0].reason == "non-converged");
    CHECK(result.excluded[1].reason == "t_max_above_threshold");
  }
  SUBCASE("one outcome per case required") {
    std::vector<CaseOutcome> outcomes(cases.size() - 1, {true, 80.0});
    CHECK_THROWS_AS(filter_physical(cases, outcomes, 300.0), std::invalid_argument);
  }
}
