#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <utility>
#include <vector>

#include "dpm/pde.hpp"
#include "dpm/sampling.hpp"

namespace dpm {

/// Classical numerical solution evaluated on an EvalGrid. channels[c] is
/// nt x nx. invariant_trace carries (t, value) diagnostics where the scheme
/// has a conserved or dissipated quantity: mass for the Schroedinger problem,
/// Ginzburg-Landau energy for Allen-Cahn; empty for the Burgers problems.
struct ReferenceSolution {
  EvalGrid grid;
  std::vector<Eigen::MatrixXd> channels;
  std::vector<std::pair<double, double>> invariant_trace;
};

/// Cole-Hopf quadrature solution of the viscous problem: the initial-value
/// integral is evaluated pointwise (no time stepping) with a shifted-exponent
/// trapezoid rule fine enough to resolve the O(nu)-wide humps the integrand
/// develops near the shock.
ReferenceSolution solve_viscous_burgers(const EvalGrid& grid, int quad_nodes = 2048);

/// 256-cell Godunov finite-volume scheme, backward Euler in time with Newton
/// iterations on each step, inflow at x=0 and outflow on the right.
/// base_dt bounds the internal step; requested times are always hit exactly.
ReferenceSolution solve_inviscid_burgers(const EvalGrid& grid,
                                         double base_dt = 0.0175 / 4.0);

/// 256-mode Fourier collocation with classical RK4. Two output channels
/// (real, imaginary). Throws on blow-up (max |u| > 1e3).
ReferenceSolution solve_nls(const EvalGrid& grid, double max_dt = 1e-4);

/// 512-mode Fourier collocation with classical RK4 for the stiff
/// reaction-diffusion problem.
ReferenceSolution solve_allen_cahn(const EvalGrid& grid, double max_dt = 1e-5);

ReferenceSolution solve_reference(const PdeSpec& spec, const EvalGrid& grid);

/// Rows of (t, x, value[, value_im]).
void export_reference_csv(const ReferenceSolution& sol,
                          const std::filesystem::path& path);

}  // namespace dpm
