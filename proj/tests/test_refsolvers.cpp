#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "dpm/fft.hpp"
#include "dpm/metrics.hpp"
#include "dpm/refsolvers.hpp"
#include "test_util.hpp"

using namespace dpm;

namespace {

constexpr double kPi = std::numbers::pi;

EvalGrid custom_grid(const PdeSpec& spec, std::vector<double> ts, int nx) {
  EvalGrid g;
  g.segment = Segment::Test;
  g.xs.resize(nx);
  for (int i = 0; i < nx; ++i)
    g.xs[i] = spec.x_min + (spec.x_max - spec.x_min) * i / double(nx - 1);
  g.ts = Eigen::Map<Eigen::VectorXd>(ts.data(), static_cast<Eigen::Index>(ts.size()));
  return g;
}

// Test-only oracle for the viscous problem: Crank-Nicolson diffusion with
// explicit conservative advection on a fine grid, Dirichlet ends.
Eigen::VectorXd crank_nicolson_viscous(const Eigen::VectorXd& xs_out, double t_end,
                                       int n = 4096, double dt = 5e-5) {
  const double nu = 0.01 / kPi;
  const double dx = 2.0 / n;
  std::vector<double> u(n + 1), x(n + 1);
  for (int j = 0; j <= n; ++j) {
    x[j] = -1.0 + j * dx;
    u[j] = -std::sin(kPi * x[j]);
  }
  const int steps = static_cast<int>(std::ceil(t_end / dt - 1e-9));
  const double dts = t_end / steps;
  const double r = nu * dts / (2.0 * dx * dx);

  const int m = n - 1;  // interior unknowns
  std::vector<double> lower(m, -r), diag(m, 1.0 + 2.0 * r), upper(m, -r), rhs(m);
  for (int s = 0; s < steps; ++s) {
    for (int j = 1; j < n; ++j) {
      const double adv = (u[j + 1] * u[j + 1] - u[j - 1] * u[j - 1]) / (4.0 * dx);
      rhs[j - 1] = u[j] + r * (u[j + 1] - 2.0 * u[j] + u[j - 1]) - dts * adv;
    }
    std::vector<double> d = diag, lo = lower, up = upper, b = rhs;
    for (int i = 1; i < m; ++i) {
      const double w = lo[i] / d[i - 1];
      d[i] -= w * up[i - 1];
      b[i] -= w * b[i - 1];
    }
    b[m - 1] /= d[m - 1];
    for (int i = m - 2; i >= 0; --i) b[i] = (b[i] - up[i] * b[i + 1]) / d[i];
    for (int j = 1; j < n; ++j) u[j] = b[j - 1];
    u[0] = u[n] = 0.0;
  }

  Eigen::VectorXd out(xs_out.size());
  for (Eigen::Index i = 0; i < xs_out.size(); ++i) {
    const double xi = std::clamp(xs_out[i], -1.0, 1.0);
    const int j = std::min(static_cast<int>((xi + 1.0) / dx), n - 1);
    const double a = (xi - x[j]) / dx;
    out[i] = (1.0 - a) * u[j] + a * u[j + 1];
  }
  return out;
}

}  // namespace

TEST_CASE("fft: matches a direct DFT and round-trips") {
  std::mt19937_64 gen(1);
  const int n = 16;
  std::vector<std::complex<double>> a(n), orig(n);
  for (int i = 0; i < n; ++i)
    a[i] = orig[i] = {dpm::test::uniform(gen, -1, 1), dpm::test::uniform(gen, -1, 1)};
  std::vector<std::complex<double>> direct(n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      direct[k] += orig[j] * std::exp(std::complex<double>(0, -2.0 * kPi * j * k / n));
  fft(a);
  for (int k = 0; k < n; ++k) CHECK(std::abs(a[k] - direct[k]) < 1e-12);
  ifft(a);
  for (int k = 0; k < n; ++k) CHECK(std::abs(a[k] - orig[k]) < 1e-13);
  std::vector<std::complex<double>> bad(12);
  CHECK_THROWS(fft(bad));
}

TEST_CASE("viscous: recovers the initial condition at t=0") {
  const PdeSpec spec = pde_spec(PdeId::ViscousBurgers);
  const EvalGrid g = custom_grid(spec, {0.0}, 256);
  const ReferenceSolution sol = solve_viscous_burgers(g);
  for (Eigen::Index ix = 0; ix < g.xs.size(); ++ix)
    CHECK(std::abs(sol.channels[0](0, ix) + std::sin(kPi * g.xs[ix])) < 1e-6);
}

TEST_CASE("viscous: boundary values stay at zero") {
  const PdeSpec spec = pde_spec(PdeId::ViscousBurgers);
  const EvalGrid g = custom_grid(spec, {0.1, 0.3, 0.5, 0.7, 0.9}, 64);
  const ReferenceSolution sol = solve_viscous_burgers(g);
  for (Eigen::Index it = 0; it < g.ts.size(); ++it) {
    CHECK(std::abs(sol.channels[0](it, 0)) < 1e-6);
    CHECK(std::abs(sol.channels[0](it, 63)) < 1e-6);
  }
}

TEST_CASE("viscous: odd symmetry in x on the test grid") {
  const PdeSpec spec = pde_spec(PdeId::ViscousBurgers);
  const EvalGrid g = build_eval_grid(spec, Segment::Test);
  const ReferenceSolution sol = solve_viscous_burgers(g);
  const auto nx = g.xs.size();
  for (Eigen::Index it = 0; it < g.ts.size(); ++it)
    for (Eigen::Index ix = 0; ix < nx; ++ix)
      CHECK(std::abs(sol.channels[0](it, ix) + sol.channels[0](it, nx - 1 - ix)) < 1e-6);
}

TEST_CASE("viscous: agrees with a Crank-Nicolson finite-difference oracle") {
  const PdeSpec spec = pde_spec(PdeId::ViscousBurgers);
  for (const double t : {0.25, 0.6, 0.9}) {
    const EvalGrid g = custom_grid(spec, {t}, 128);
    const ReferenceSolution sol = solve_viscous_burgers(g);
    const Eigen::VectorXd oracle = crank_nicolson_viscous(g.xs, t);
    CHECK(rel_l2(sol.channels[0].row(0).transpose(), oracle) < 5e-3);
  }
}

TEST_CASE("inviscid: initial state and inflow boundary") {
  const PdeSpec spec = pde_spec(PdeId::InviscidBurgers);
  const EvalGrid g0 = custom_grid(spec, {0.0}, 128);
  const ReferenceSolution s0 = solve_inviscid_burgers(g0);
  for (Eigen::Index ix = 0; ix < g0.xs.size(); ++ix)
    CHECK(s0.channels[0](0, ix) == 1.0);

  const EvalGrid g = custom_grid(spec, {1.0, 10.0, 20.0, 35.0}, 64);
  const ReferenceSolution s = solve_inviscid_burgers(g);
  for (Eigen::Index it = 0; it < g.ts.size(); ++it)
    CHECK(s.channels[0](it, 0) == doctest::Approx(4.25).epsilon(1e-12));
}

TEST_CASE("inviscid: wave of inflow data propagates right at finite speed") {
  const PdeSpec spec = pde_spec(PdeId::InviscidBurgers);
  const EvalGrid g = custom_grid(spec, {5.0}, 256);
  const ReferenceSolution s = solve_inviscid_burgers(g);
  // Far ahead of the front the state is still governed by the source alone.
  CHECK(s.channels[0](0, 255) < 2.0);
  CHECK(s.channels[0](0, 10) > 3.0);
}

TEST_CASE("inviscid: self-convergence under time-step halving") {
  const PdeSpec spec = pde_spec(PdeId::InviscidBurgers);
  const EvalGrid g = build_eval_grid(spec, Segment::Test);
  const ReferenceSolution a = solve_inviscid_burgers(g);
  const ReferenceSolution b = solve_inviscid_burgers(g, 0.0175 / 8.0);
  Eigen::VectorXd va(a.channels[0].size()), vb(a.channels[0].size());
  Eigen::Index k = 0;
  for (Eigen::Index it = 0; it < g.ts.size(); ++it)
    for (Eigen::Index ix = 0; ix < g.xs.size(); ++ix, ++k) {
      va[k] = a.channels[0](it, ix);
      vb[k] = b.channels[0](it, ix);
    }
  CHECK(rel_l2(va, vb) < 1e-2);
}

TEST_CASE("nls: initial mass and mass conservation") {
  const PdeSpec spec = pde_spec(PdeId::Nls);
  const EvalGrid g = custom_grid(spec, {0.0, kPi / 8, kPi / 4, 3 * kPi / 8, kPi / 2}, 64);
  const ReferenceSolution sol = solve_nls(g);
  REQUIRE(sol.invariant_trace.size() >= 2);
  const double m0 = sol.invariant_trace.front().second;
  CHECK(std::abs(m0 - 8.0) < 1e-3);
  for (const auto& [t, m] : sol.invariant_trace)
    CHECK(std::abs(m - m0) / m0 < 1e-6);
}

TEST_CASE("nls: focusing peak at the half period exceeds 2 and matches a finer run") {
  const PdeSpec spec = pde_spec(PdeId::Nls);
  const EvalGrid g = custom_grid(spec, {kPi / 4}, 129);  // includes x = 0
  const ReferenceSolution a = solve_nls(g);
  const ReferenceSolution b = solve_nls(g, 2.5e-5);
  const Eigen::Index mid = 64;
  const double peak_a = std::hypot(a.channels[0](0, mid), a.channels[1](0, mid));
  const double peak_b = std::hypot(b.channels[0](0, mid), b.channels[1](0, mid));
  CHECK(peak_a > 2.0);
  CHECK(std::abs(peak_a - peak_b) < 1e-5);
}

TEST_CASE("nls: initial condition recovery") {
  const PdeSpec spec = pde_spec(PdeId::Nls);
  const EvalGrid g = custom_grid(spec, {0.0}, 256);
  const ReferenceSolution sol = solve_nls(g);
  for (Eigen::Index ix = 0; ix < g.xs.size(); ++ix) {
    CHECK(std::abs(sol.channels[0](0, ix) - 2.0 / std::cosh(g.xs[ix])) < 1e-6);
    CHECK(sol.channels[1](0, ix) == 0.0);
  }
}

TEST_CASE("allen-cahn: IC recovery, periodicity, and energy dissipation") {
  const PdeSpec spec = pde_spec(PdeId::AllenCahn);
  const EvalGrid g = custom_grid(spec, {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}, 255);
  const ReferenceSolution sol = solve_allen_cahn(g);

  for (Eigen::Index ix = 0; ix < g.xs.size(); ++ix) {
    const double x = g.xs[ix];
    CHECK(std::abs(sol.channels[0](0, ix) - x * x * std::cos(kPi * x)) < 1e-6);
  }
  for (Eigen::Index it = 0; it < g.ts.size(); ++it)
    CHECK(std::abs(sol.channels[0](it, 0) - sol.channels[0](it, g.xs.size() - 1)) < 1e-8);

  REQUIRE(sol.invariant_trace.size() == 6);
  for (size_t i = 1; i < sol.invariant_trace.size(); ++i)
    CHECK(sol.invariant_trace[i].second <= sol.invariant_trace[i - 1].second + 1e-12);
}

TEST_CASE("solvers reject grids outside their domain") {
  const PdeSpec visc = pde_spec(PdeId::ViscousBurgers);
  EvalGrid g = custom_grid(visc, {0.5}, 16);
  g.xs[0] = -2.0;
  CHECK_THROWS(solve_viscous_burgers(g));
  EvalGrid g2 = custom_grid(visc, {2.0}, 16);
  CHECK_THROWS(solve_viscous_burgers(g2));
}
