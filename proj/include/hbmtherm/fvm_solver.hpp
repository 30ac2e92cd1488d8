#pragma once

#include <cmath>
#include <vector>

#include "hbmtherm/voxel_grid.hpp"

namespace hbmtherm {

// Symmetric positive-definite sparse system K*T = b in CSR form, SI units
// (conductances in W/K, rhs in W), assembled from the 7-point finite-volume
// stencil. Columns within a row are ascending.
struct LinearSystem {
  int n = 0;
  std::vector<int> row_ptr;
  std::vector<int> col;
  std::vector<double> val;
  std::vector<double> rhs;
};

// Two-point flux assembly: face conductance is the distance-weighted
// harmonic mean of the adjacent cells' conductivity along the face normal;
// the top/bottom Robin faces add h*A to the diagonal and h*A*T_ambient to
// the rhs; side walls are adiabatic. Rejects grids with no heat escape path
// (both boundary coefficients zero) and non-finite coefficients.
LinearSystem assemble(const VoxelGrid& grid);

struct SolverConfig {
  double rel_tolerance = 1e-8;
  int max_iterations = 0;  // 0: 50*sqrt(n), clamped to [200, 10000]
  enum class Preconditioner { None, Diagonal } preconditioner = Preconditioner::Diagonal;
};

struct SolveResult {
  std::vector<double> temperature_c;
  bool converged = false;
  int iterations = 0;
  std::vector<double> residual_history;  // relative residual per iteration
  // Filled by extract_hotspot:
  double t_max = 0;
  double t_min = 0;
  double hotspot_z_um = 0;
  int hotspot_layer = 0;
};

// Jacobi-preconditioned conjugate gradients from a zero initial guess.
// result.converged reflects the true residual at exit.
SolveResult solve(const LinearSystem& system, const SolverConfig& config);

// Locate the maximum-temperature cell (ties: lowest z, then lowest lateral
// index) and fill t_max/t_min/hotspot fields on the result.
void extract_hotspot(SolveResult& result, const VoxelGrid& grid);

// Convenience: assemble + solve + extract.
SolveResult solve_grid(const VoxelGrid& grid, const SolverConfig& config);

struct EnergyBalance {
  double injected_w = 0;
  double outflow_w = 0;   // sum of h*A*(T_cell - T_ambient) over Robin faces
  double relative_error() const {
    return injected_w == 0 ? 0 : std::abs(outflow_w - injected_w) / std::abs(injected_w);
  }
};

EnergyBalance energy_balance(const SolveResult& result, const VoxelGrid& grid);

}  // namespace hbmtherm
