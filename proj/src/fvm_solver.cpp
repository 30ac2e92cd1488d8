#include "hbmtherm/fvm_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hbmtherm {

namespace {

// Conductance of the face between two cells, W/K: series combination of the
// two half-cell resistances along the face normal.
double face_conductance(double area_m2, double half_a_m, double k_a,
                        double half_b_m, double k_b) {
  return area_m2 / (half_a_m / k_a + half_b_m / k_b);
}

struct StencilEntry {
  int col;
  double val;
};

}  // namespace

LinearSystem assemble(const VoxelGrid& grid) {
  const int nx = grid.nx, ny = grid.ny, nz = grid.nz;
  const size_t n = grid.cell_count();
  if (n == 0) throw std::invalid_argument("assemble: empty grid");
  if (grid.htc_top <= 0 && grid.htc_bottom <= 0)
    throw std::invalid_argument("assemble: no heat escape path (both boundary "
                                "coefficients are zero), system is singular");
  for (size_t c = 0; c < n; ++c) {
    if (!(grid.kx[c] > 0) || !(grid.ky[c] > 0) || !(grid.kz[c] > 0))
      throw std::invalid_argument("assemble: conductivities must be positive and finite");
    if (!std::isfinite(grid.source_w_m3[c]))
      throw std::invalid_argument("assemble: non-finite source");
  }

  const double dx = grid.dx_um * 1e-6;
  const double dy = grid.dy_um * 1e-6;
  std::vector<double> dz(nz);
  for (int k = 0; k < nz; ++k) dz[k] = grid.dz_um[k] * 1e-6;

  LinearSystem sys;
  sys.n = int(n);
  sys.row_ptr.assign(n + 1, 0);
  sys.rhs.assign(n, 0);
  sys.col.reserve(n * 7);
  sys.val.reserve(n * 7);

  std::vector<StencilEntry> row;
  row.reserve(7);
  const int sx = 1, sy = nx, sz = nx * ny;
  for (int k = 0; k < nz; ++k) {
    const double az = dx * dy;            // z-normal face area
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const size_t c = grid.idx(i, j, k);
        row.clear();
        double diag = 0;
        double rhs = grid.source_w_m3[c] * dx * dy * dz[k];

        // -z neighbour / bottom Robin face
        if (k > 0) {
          const size_t nb = c - sz;
          const double g = face_conductance(az, 0.5 * dz[k], grid.kz[c],
                                            0.5 * dz[k - 1], grid.kz[nb]);
          row.push_back({int(nb), -g});
          diag += g;
        } else if (grid.htc_bottom > 0) {
          diag += grid.htc_bottom * az;
          rhs += grid.htc_bottom * az * grid.ambient_c;
        }
        // -y neighbour
        if (j > 0) {
          const size_t nb = c - sy;
          const double g = face_conductance(dx * dz[k], 0.5 * dy, grid.ky[c],
                                            0.5 * dy, grid.ky[nb]);
          row.push_back({int(nb), -g});
          diag += g;
        }
        // -x neighbour
        if (i > 0) {
          const size_t nb = c - sx;
          const double g = face_conductance(dy * dz[k], 0.5 * dx, grid.kx[c],
                                            0.5 * dx, grid.kx[nb]);
          row.push_back({int(nb), -g});
          diag += g;
        }
        const size_t diag_slot = row.size();
        row.push_back({int(c), 0});  // patched below
        // +x neighbour
        if (i + 1 < nx) {
          const size_t nb = c + sx;
          const double g = face_conductance(dy * dz[k], 0.5 * dx, grid.kx[c],
                                            0.5 * dx, grid.kx[nb]);
          row.push_back({int(nb), -g});
          diag += g;
        }
        // +y neighbour
        if (j + 1 < ny) {
          const size_t nb = c + sy;
          const double g = face_conductance(dx * dz[k], 0.5 * dy, grid.ky[c],
                                            0.5 * dy, grid.ky[nb]);
          row.push_back({int(nb), -g});
          diag += g;
        }
        // +z neighbour / top Robin face
        if (k + 1 < nz) {
          const size_t nb = c + sz;
          const double g = face_conductance(az, 0.5 * dz[k], grid.kz[c],
                                            0.5 * dz[k + 1], grid.kz[nb]);
          row.push_back({int(nb), -g});
          diag += g;
        } else if (grid.htc_top > 0) {
          diag += grid.htc_top * az;
          rhs += grid.htc_top * az * grid.ambient_c;
        }

        row[diag_slot].val = diag;
        if (!std::isfinite(diag) || !std::isfinite(rhs))
          throw std::invalid_argument("assemble: non-finite coefficients");
        for (const auto& e : row) {
          sys.col.push_back(e.col);
          sys.val.push_back(e.val);
        }
        sys.rhs[c] = rhs;
        sys.row_ptr[c + 1] = int(sys.col.size());
      }
    }
  }
  return sys;
}

namespace {

void spmv(const LinearSystem& a, const std::vector<double>& x, std::vector<double>& y) {
  for (int r = 0; r < a.n; ++r) {
    double acc = 0;
    for (int p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p)
      acc += a.val[p] * x[a.col[p]];
    y[r] = acc;
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double true_relative_residual(const LinearSystem& a, const std::vector<double>& x,
                              double norm_b) {
  std::vector<double> ax(a.n);
  spmv(a, x, ax);
  double acc = 0;
  for (int i = 0; i < a.n; ++i) {
    const double r = a.rhs[i] - ax[i];
    acc += r * r;
  }
  return std::sqrt(acc) / norm_b;
}

}  // namespace

SolveResult solve(const LinearSystem& system, const SolverConfig& config) {
  if (!(config.rel_tolerance > 0 && config.rel_tolerance < 1))
    throw std::invalid_argument("solver: rel_tolerance must be in (0, 1)");
  const int n = system.n;
  int max_iter = config.max_iterations;
  if (max_iter <= 0)
    max_iter = std::clamp(int(50.0 * std::sqrt(double(n))) + 1, 200, 10000);

  SolveResult result;
  result.temperature_c.assign(n, 0.0);

  const double norm_b = std::sqrt(dot(system.rhs, system.rhs));
  if (norm_b == 0) {  // zero forcing: zero solution, no iterations
    result.converged = true;
    return result;
  }

  std::vector<double> inv_diag(n, 1.0);
  if (config.preconditioner == SolverConfig::Preconditioner::Diagonal) {
    for (int r = 0; r < n; ++r)
      for (int p = system.row_ptr[r]; p < system.row_ptr[r + 1]; ++p)
        if (system.col[p] == r) {
          if (system.val[p] <= 0)
            throw std::invalid_argument("solver: non-positive diagonal");
          inv_diag[r] = 1.0 / system.val[p];
        }
  }

  std::vector<double>& x = result.temperature_c;
  std::vector<double> r = system.rhs;  // r = b - K*0
  std::vector<double> z(n), p(n), kp(n);
  for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);

  while (result.iterations < max_iter) {
    spmv(system, p, kp);
    const double pkp = dot(p, kp);
    if (pkp <= 0) break;  // loss of positive definiteness; report as-is
    const double alpha = rz / pkp;
    for (int i = 0; i < n; ++i) x[i] += alpha * p[i];
    for (int i = 0; i < n; ++i) r[i] -= alpha * kp[i];
    ++result.iterations;
    const double rel = std::sqrt(dot(r, r)) / norm_b;
    result.residual_history.push_back(rel);
    if (rel <= config.rel_tolerance) {
      // Guard against recurrence drift before declaring convergence.
      if (true_relative_residual(system, x, norm_b) <= config.rel_tolerance) break;
    }
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }

  result.converged =
      true_relative_residual(system, x, norm_b) <= config.rel_tolerance;
  return result;
}

void extract_hotspot(SolveResult& result, const VoxelGrid& grid) {
  if (result.temperature_c.size() != grid.cell_count())
    throw std::invalid_argument("extract_hotspot: result does not match grid");
  double best = -std::numeric_limits<double>::infinity();
  double worst = std::numeric_limits<double>::infinity();
  int best_k = 0;
  // Ascending (k, j, i) scan with strict comparison: ties resolve to the
  // lowest z, then the lowest lateral index.
  for (int k = 0; k < grid.nz; ++k)
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        const double t = result.temperature_c[grid.idx(i, j, k)];
        if (t > best) {
          best = t;
          best_k = k;
        }
        if (t < worst) worst = t;
      }
  result.t_max = best;
  result.t_min = worst;
  result.hotspot_z_um = grid.z_center_um[best_k];
  result.hotspot_layer = grid.zone_of_layer[best_k];
}

SolveResult solve_grid(const VoxelGrid& grid, const SolverConfig& config) {
  SolveResult result = solve(assemble(grid), config);
  extract_hotspot(result, grid);
  return result;
}

EnergyBalance energy_balance(const SolveResult& result, const VoxelGrid& grid) {
  EnergyBalance e;
  e.injected_w = integrated_source_w(grid);
  const double az = grid.dx_um * grid.dy_um * 1e-12;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      if (grid.htc_bottom > 0) {
        const double t = result.temperature_c[grid.idx(i, j, 0)];
        e.outflow_w += grid.htc_bottom * az * (t - grid.ambient_c);
      }
      if (grid.htc_top > 0) {
        const double t = result.temperature_c[grid.idx(i, j, grid.nz - 1)];
        e.outflow_w += grid.htc_top * az * (t - grid.ambient_c);
      }
    }
  return e;
}

}  // namespace hbmtherm
