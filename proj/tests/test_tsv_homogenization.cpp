#include <doctest.h>

#include <cmath>
#include <vector>

#include "hbmtherm/rng.hpp"
#include "hbmtherm/tsv_homogenization.hpp"

using namespace hbmtherm;

namespace {

constexpr double kPi = 3.14159265358979323846;

const PresetTable& presets() {
  static PresetTable table =
      PresetTable::load(std::string(HBMTHERM_SOURCE_DIR) + "/data/tsv_presets.csv");
  return table;
}

TsvLayout random_layout(Rng& rng) {
  TsvLayout l;
  l.count = 1 + int(rng.next_below(400));
  l.die_width_um = 1000 + rng.next_double() * 9000;
  l.die_depth_um = 1000 + rng.next_double() * 9000;
  // Radius capped so the fill fraction stays below ~0.7.
  const double max_r =
      std::sqrt(0.7 * l.die_width_um * l.die_depth_um / (l.count * kPi));
  l.radius_um = max_r * (0.1 + 0.9 * rng.next_double());
  return l;
}

// Independent in-plane oracle: 2D resistor network over one unit cell with a
// centered circular pillar. Unit temperature drop across x, adiabatic top and
// bottom; with square cells and unit depth the face conductances reduce to
// the face conductivity, and the effective conductivity equals the total
// boundary heat flow.
double resistor_network_k(double cell_um, double radius_um, double k_si, double k_cu,
                          int n) {
  const double h = cell_um / n;
  std::vector<double> k(size_t(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double x = (i + 0.5) * h - 0.5 * cell_um;
      const double y = (j + 0.5) * h - 0.5 * cell_um;
      k[size_t(j) * n + i] = (x * x + y * y <= radius_um * radius_um) ? k_cu : k_si;
    }
  auto harm = [](double a, double b) { return 2.0 * a * b / (a + b); };

  // Conjugate gradients on the 5-point network, Dirichlet x-faces.
  const size_t m = k.size();
  std::vector<double> t(m, 0.5), r(m), p(m), ap(m), b(m, 0.0);
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const size_t c = size_t(j) * n + i;
        double diag = 0, off = 0;
        if (i > 0) { const double g = harm(k[c], k[c - 1]); diag += g; off += g * v[c - 1]; }
        else diag += 2.0 * k[c];  // left Dirichlet face
        if (i + 1 < n) { const double g = harm(k[c], k[c + 1]); diag += g; off += g * v[c + 1]; }
        else diag += 2.0 * k[c];  // right Dirichlet face
        if (j > 0) { const double g = harm(k[c], k[c - size_t(n)]); diag += g; off += g * v[c - size_t(n)]; }
        if (j + 1 < n) { const double g = harm(k[c], k[c + size_t(n)]); diag += g; off += g * v[c + size_t(n)]; }
        out[c] = diag * v[c] - off;
      }
  };
  for (int j = 0; j < n; ++j) b[size_t(j) * n] = 2.0 * k[size_t(j) * n] * 1.0;
  apply(t, ap);
  for (size_t i = 0; i < m; ++i) r[i] = b[i] - ap[i];
  p = r;
  double rr = 0;
  for (size_t i = 0; i < m; ++i) rr += r[i] * r[i];
  for (int iter = 0; iter < 40000 && rr > 1e-18; ++iter) {
    apply(p, ap);
    double pap = 0;
    for (size_t i = 0; i < m; ++i) pap += p[i] * ap[i];
    const double alpha = rr / pap;
    for (size_t i = 0; i < m; ++i) { t[i] += alpha * p[i]; r[i] -= alpha * ap[i]; }
    double rr_next = 0;
    for (size_t i = 0; i < m; ++i) rr_next += r[i] * r[i];
    const double beta = rr_next / rr;
    rr = rr_next;
    for (size_t i = 0; i < m; ++i) p[i] = r[i] + beta * p[i];
  }
  double flow = 0;
  for (int j = 0; j < n; ++j) {
    const size_t c = size_t(j) * n;
    flow += 2.0 * k[c] * (1.0 - t[c]);
  }
  return flow / n;  // k_eff = Q * L / (A * dT) with L equal to the width
}

}  // namespace

TEST_CASE("areal density") {
  CHECK(areal_density({0, 0, 100, 100}) == 0.0);
  // 100 pillars of radius 1 um on a 100 x 100 um die.
  CHECK(areal_density({100, 1, 100, 100}) == doctest::Approx(kPi / 100).epsilon(1e-12));
  // Impossible geometry rejected.
  CHECK_THROWS_AS(areal_density({100, 50, 100, 100}), std::invalid_argument);
  CHECK_THROWS_AS(areal_density({-1, 1, 100, 100}), std::invalid_argument);
}

TEST_CASE("preset table carries the published fill fractions") {
  CHECK(presets().by_name("TSV_64").fill_fraction == 0.126);
  CHECK(presets().by_name("TSV_256").fill_fraction == 0.503);
  CHECK(presets().by_name("TSV_400").fill_fraction == 0.785);
  // The shipped layouts reproduce those fractions to the published precision.
  for (const char* name : {"TSV_64", "TSV_256", "TSV_400"}) {
    const TsvPreset& p = presets().by_name(name);
    CHECK(std::abs(areal_density(p.layout) - p.fill_fraction) < 5e-4);
  }
  CHECK(presets().by_code(0).name == "pure_si");
  CHECK(presets().version() == 1);
  CHECK_THROWS_AS(presets().by_name("TSV_9000"), std::invalid_argument);
}

TEST_CASE("cell edge") {
  CHECK(cell_edge_um({1, 10, 100, 100}) == doctest::Approx(100.0));
  CHECK(cell_edge_um({100, 1, 100, 100}) == doctest::Approx(10.0));
  CHECK_THROWS_AS(cell_edge_um({0, 0, 100, 100}), std::domain_error);
}

TEST_CASE("cell edge: both written forms agree") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const TsvLayout l = random_layout(rng);
    const double via_count = std::sqrt(l.die_width_um * l.die_depth_um / l.count);
    const double rho = areal_density(l);
    const double via_density = std::sqrt(kPi * l.radius_um * l.radius_um / rho);
    CHECK(via_density == doctest::Approx(via_count).epsilon(1e-12));
    CHECK(cell_edge_um(l) == doctest::Approx(via_count).epsilon(1e-12));
  }
}

TEST_CASE("vertical conductivity") {
  const MaterialSet mats{148, 400, 400};
  // No pillars.
  CHECK(k_vertical({0, 0, 100, 100}, mats) == doctest::Approx(148.0));
  // Full fill: one pillar of area A*B.
  const double r_full = 100.0 / std::sqrt(kPi);
  CHECK(k_vertical({1, r_full, 100, 100}, mats) == doctest::Approx(400.0).epsilon(1e-12));
  // Half fill: 0.5*400 + 0.5*148 = 274.
  const double r_half = std::sqrt(0.5e4 / kPi);
  CHECK(k_vertical({1, r_half, 100, 100}, mats) == doctest::Approx(274.0).epsilon(1e-12));
}

TEST_CASE("vertical conductivity equals the parallel-resistance composition") {
  const MaterialSet mats{148, 400, 400};
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const TsvLayout l = random_layout(rng);
    const double area = l.die_width_um * l.die_depth_um;
    const double pillar_area = l.count * kPi * l.radius_um * l.radius_um;
    // Two parallel columns of unit length: R = L / (k * S).
    const double r_tsv = 1.0 / (mats.k_tsv * pillar_area);
    const double r_si = 1.0 / (mats.k_si * (area - pillar_area));
    const double r_par = 1.0 / (1.0 / r_tsv + 1.0 / r_si);
    const double k_oracle = 1.0 / (r_par * area);
    CHECK(k_vertical(l, mats) == doctest::Approx(k_oracle).epsilon(1e-12));
  }
}

TEST_CASE("in-plane conductivity against the resistor-network oracle") {
  // 64-pillar layout at the published 12.6% fill.
  TsvLayout l;
  l.count = 64;
  l.die_width_um = 10000;
  l.die_depth_um = 10000;
  l.radius_um = std::sqrt(0.126 * l.die_width_um * l.die_depth_um / (64 * kPi));
  const MaterialSet mats{148, 400, 400};
  const double formula = k_inplane(l, mats);
  const double cell = cell_edge_um(l);
  const double oracle = resistor_network_k(cell, l.radius_um, mats.k_si, mats.k_cu, 160);
  // Lumped series-parallel model tolerance.
  CHECK(std::abs(formula - oracle) / oracle < 0.15);
}

TEST_CASE("homogenize") {
  const MaterialSet mats{148, 400, 400};
  SUBCASE("no pillars yields isotropic silicon") {
    const AnisotropicConductivity k = homogenize({0, 0, 100, 100}, mats);
    CHECK(k.k_xy == 148.0);
    CHECK(k.k_z == 148.0);
  }
  SUBCASE("canonical preset pairs are served directly") {
    const TsvPreset& p = presets().by_name("TSV_256");
    CHECK(p.k.k_xy == 327.37);
    CHECK(p.k.k_z == 242.01);
    CHECK(presets().by_name("TSV_64").k.k_xy == 170.85);
    CHECK(presets().by_name("TSV_400").k.k_z == 317.49);
  }
  SUBCASE("impossible fill rejected") {
    CHECK_THROWS_AS(homogenize({400, 450, 10000, 10000}, mats), std::invalid_argument);
  }
}

TEST_CASE("homogeneous-material identity") {
  Rng rng(23);
  for (int i = 0; i < 1000; ++i) {
    const TsvLayout l = random_layout(rng);
    const double k = 20.0 + rng.next_double() * 380.0;
    const MaterialSet mats{k, k, k};
    const AnisotropicConductivity out = homogenize(l, mats);
    CHECK(out.k_xy == doctest::Approx(k).epsilon(1e-12));
    CHECK(out.k_z == doctest::Approx(k).epsilon(1e-12));
  }
}

TEST_CASE("conductivity bounds and monotonicity") {
  const MaterialSet mats{148, 400, 400};
  SUBCASE("bounds hold for random layouts") {
    Rng rng(31);
    for (int i = 0; i < 500; ++i) {
      const TsvLayout l = random_layout(rng);
      const AnisotropicConductivity out = homogenize(l, mats);
      CHECK(out.k_z >= std::min(mats.k_si, mats.k_tsv));
      CHECK(out.k_z <= std::max(mats.k_si, mats.k_tsv));
      CHECK(out.k_xy > 0);
    }
  }
  SUBCASE("k_z grows strictly with the fill fraction") {
    double last = 0;
    for (int n = 1; n <= 40; ++n) {
      const TsvLayout l{n, 100, 10000, 10000};
      const double kz = k_vertical(l, mats);
      if (n > 1) CHECK(kz > last);
      last = kz;
    }
  }
}
