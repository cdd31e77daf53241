#include "dpm/refsolvers.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "dpm/fft.hpp"

namespace dpm {

namespace {

constexpr double kPi = std::numbers::pi;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

void check_grid(const PdeSpec& spec, const EvalGrid& grid) {
  if (grid.xs.size() == 0 || grid.ts.size() == 0)
    throw std::invalid_argument("refsolver: empty grid");
  if (grid.xs.minCoeff() < spec.x_min - 1e-9 || grid.xs.maxCoeff() > spec.x_max + 1e-9)
    throw std::invalid_argument("refsolver: grid x outside domain");
  if (grid.ts.minCoeff() < -1e-12 || grid.ts.maxCoeff() > spec.final_time + 1e-9)
    throw std::invalid_argument("refsolver: grid t outside [0, T]");
  for (Eigen::Index i = 1; i < grid.ts.size(); ++i)
    if (grid.ts[i] <= grid.ts[i - 1])
      throw std::invalid_argument("refsolver: grid times must be strictly increasing");
}

// Signed wavenumbers for an n-point periodic grid of length len.
std::vector<double> wavenumbers(int n, double len) {
  std::vector<double> k(n);
  for (int i = 0; i < n; ++i) {
    const int idx = (i < n / 2) ? i : i - n;
    k[i] = 2.0 * kPi * idx / len;
  }
  return k;
}

// Evaluation of a length-n spectrum at arbitrary points: row p of the
// returned matrix holds e^{i k_m (x_p - x0)} / n.
Eigen::MatrixXcd trig_eval_matrix(const VectorXd& xs, int n, double x0, double len) {
  const auto ks = wavenumbers(n, len);
  Eigen::MatrixXcd e(xs.size(), n);
  for (Eigen::Index p = 0; p < xs.size(); ++p)
    for (int m = 0; m < n; ++m)
      e(p, m) = std::exp(cplx(0.0, ks[m] * (xs[p] - x0))) / double(n);
  return e;
}

// Godunov flux for f(u) = u^2/2 together with its one-sided derivatives.
struct FluxVal {
  double f;
  double dfa;
  double dfb;
};
FluxVal godunov_flux(double a, double b) {
  if (a <= b) {
    if (a >= 0.0) return {0.5 * a * a, a, 0.0};
    if (b <= 0.0) return {0.5 * b * b, 0.0, b};
    return {0.0, 0.0, 0.0};
  }
  const double s = 0.5 * (a + b);
  if (s > 0.0) return {0.5 * a * a, a, 0.0};
  return {0.5 * b * b, 0.0, b};
}

void thomas_solve(std::vector<double>& lower, std::vector<double>& diag,
                  std::vector<double>& upper, std::vector<double>& rhs) {
  const size_t n = diag.size();
  for (size_t i = 1; i < n; ++i) {
    const double m = lower[i] / diag[i - 1];
    diag[i] -= m * upper[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (size_t i = n - 1; i-- > 0;)
    rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

// Splits [t_from, t_to] into equal steps no longer than max_dt.
int substeps(double t_from, double t_to, double max_dt) {
  const double gap = t_to - t_from;
  return std::max(1, static_cast<int>(std::ceil(gap / max_dt - 1e-9)));
}

}  // namespace

ReferenceSolution solve_viscous_burgers(const EvalGrid& grid, int quad_nodes) {
  const PdeSpec spec = pde_spec(PdeId::ViscousBurgers);
  check_grid(spec, grid);
  if (quad_nodes < 256)
    throw std::invalid_argument("solve_viscous_burgers: too few quadrature nodes");
  const double nu = 0.01 / kPi;

  ReferenceSolution sol;
  sol.grid = grid;
  sol.channels.assign(1, MatrixXd(grid.ts.size(), grid.xs.size()));

  // u(x,t) = -int sin(pi y) g(y) K deta / int g(y) K deta with y = x - eta,
  // g(y) = exp(-cos(pi y)/(2 pi nu)), K = exp(-eta^2/(4 nu t)).
  // Near the shock the integrand splits into two humps of width O(nu), so the
  // quadrature is a symmetric trapezoid whose step resolves that scale and
  // whose range covers the Gaussian tail; exponents are max-shifted before
  // exponentiation. Gauss-Hermite in the eta variable misses the humps.
  const double expo_scale = 1.0 / (2.0 * kPi * nu);
  std::vector<double> p(quad_nodes + 1), s(quad_nodes + 1);
  for (Eigen::Index it = 0; it < grid.ts.size(); ++it) {
    const double t = grid.ts[it];
    if (t <= 0.0) {
      for (Eigen::Index ix = 0; ix < grid.xs.size(); ++ix)
        sol.channels[0](it, ix) = -std::sin(kPi * grid.xs[ix]);
      continue;
    }
    // Tail cutoff: p(R) - max p <= -103 even against the cos term's +-50.
    const double range = std::sqrt(812.0 * nu * t);
    const double step = 2.0 * range / quad_nodes;
    for (Eigen::Index ix = 0; ix < grid.xs.size(); ++ix) {
      const double x = grid.xs[ix];
      double pmax = -std::numeric_limits<double>::infinity();
      for (int i = 0; i <= quad_nodes; ++i) {
        const double eta = -range + i * step;
        const double y = x - eta;
        p[i] = -std::cos(kPi * y) * expo_scale - eta * eta / (4.0 * nu * t);
        s[i] = std::sin(kPi * y);
        pmax = std::max(pmax, p[i]);
      }
      double num = 0.0, den = 0.0;
      for (int i = 0; i <= quad_nodes; ++i) {
        const double wt = (i == 0 || i == quad_nodes) ? 0.5 : 1.0;
        const double e = wt * std::exp(p[i] - pmax);
        num += e * s[i];
        den += e;
      }
      if (!(den > 0.0) || !std::isfinite(num))
        throw std::runtime_error("solve_viscous_burgers: quadrature did not converge");
      sol.channels[0](it, ix) = -num / den;
    }
  }
  return sol;
}

ReferenceSolution solve_inviscid_burgers(const EvalGrid& grid, double base_dt) {
  const PdeSpec spec = pde_spec(PdeId::InviscidBurgers);
  check_grid(spec, grid);
  if (base_dt <= 0.0) throw std::invalid_argument("solve_inviscid_burgers: bad base_dt");

  constexpr int n_cells = 256;
  const double dx = (spec.x_max - spec.x_min) / n_cells;
  const double inflow = 4.25;

  std::vector<double> centers(n_cells), source(n_cells);
  for (int j = 0; j < n_cells; ++j) {
    centers[j] = spec.x_min + (j + 0.5) * dx;
    source[j] = 0.02 * std::exp(0.015 * centers[j]);
  }

  std::vector<double> u(n_cells, 1.0);

  auto backward_euler_step = [&](double dt) {
    const double lam = dt / dx;
    std::vector<double> un = u;
    std::vector<double> lower(n_cells), diag(n_cells), upper(n_cells), rhs(n_cells);
    bool converged = false;
    for (int iter = 0; iter < 50; ++iter) {
      double rmax = 0.0;
      for (int j = 0; j < n_cells; ++j) {
        const double ul = (j == 0) ? inflow : u[j - 1];
        const double ur = (j == n_cells - 1) ? u[j] : u[j + 1];
        const FluxVal fr = godunov_flux(u[j], ur);
        const FluxVal fl = godunov_flux(ul, u[j]);
        const double res = u[j] - un[j] + lam * (fr.f - fl.f) - dt * source[j];
        rhs[j] = -res;
        rmax = std::max(rmax, std::abs(res));
        lower[j] = (j == 0) ? 0.0 : -lam * fl.dfa;
        diag[j] = 1.0 + lam * (fr.dfa - fl.dfb);
        if (j == n_cells - 1) diag[j] += lam * fr.dfb;  // outflow ghost = u[j]
        upper[j] = (j == n_cells - 1) ? 0.0 : lam * fr.dfb;
      }
      if (rmax < 1e-11) {
        converged = true;
        break;
      }
      thomas_solve(lower, diag, upper, rhs);
      for (int j = 0; j < n_cells; ++j) u[j] += rhs[j];
    }
    if (!converged)
      throw std::runtime_error("solve_inviscid_burgers: Newton iteration diverged");
  };

  // Piecewise-linear reconstruction through the boundary value and the cell
  // centers; constant extrapolation past the last center.
  auto sample = [&](double x, bool at_initial_time) {
    if (at_initial_time) return 1.0;
    if (x <= spec.x_min) return inflow;
    double x_prev = spec.x_min, u_prev = inflow;
    for (int j = 0; j < n_cells; ++j) {
      if (x <= centers[j]) {
        const double a = (x - x_prev) / (centers[j] - x_prev);
        return (1.0 - a) * u_prev + a * u[j];
      }
      x_prev = centers[j];
      u_prev = u[j];
    }
    return u[n_cells - 1];
  };

  ReferenceSolution sol;
  sol.grid = grid;
  sol.channels.assign(1, MatrixXd(grid.ts.size(), grid.xs.size()));

  double t_cur = 0.0;
  for (Eigen::Index it = 0; it < grid.ts.size(); ++it) {
    const double t = grid.ts[it];
    if (t > t_cur) {
      const int n_sub = substeps(t_cur, t, base_dt);
      const double dt = (t - t_cur) / n_sub;
      for (int s = 0; s < n_sub; ++s) backward_euler_step(dt);
      t_cur = t;
    }
    for (Eigen::Index ix = 0; ix < grid.xs.size(); ++ix)
      sol.channels[0](it, ix) = sample(grid.xs[ix], t <= 0.0);
  }
  return sol;
}

ReferenceSolution solve_nls(const EvalGrid& grid, double max_dt) {
  const PdeSpec spec = pde_spec(PdeId::Nls);
  check_grid(spec, grid);
  if (max_dt <= 0.0) throw std::invalid_argument("solve_nls: bad max_dt");

  constexpr int n = 256;
  const double len = spec.x_max - spec.x_min;
  const auto ks = wavenumbers(n, len);
  std::vector<double> k2(n);
  for (int i = 0; i < n; ++i) k2[i] = ks[i] * ks[i];

  std::vector<cplx> u(n);
  for (int i = 0; i < n; ++i) {
    const double x = spec.x_min + i * len / n;
    u[i] = cplx(2.0 / std::cosh(x), 0.0);
  }

  const double dx_spec = len / n;
  auto mass = [&](const std::vector<cplx>& v) {
    double m = 0.0;
    for (const auto& z : v) m += std::norm(z);
    return m * dx_spec;
  };

  // u_t = 0.5 i u_xx + i |u|^2 u
  std::vector<cplx> spec_buf(n);
  auto rhs = [&](const std::vector<cplx>& v, std::vector<cplx>& out) {
    spec_buf = v;
    fft(spec_buf);
    for (int i = 0; i < n; ++i) spec_buf[i] *= -k2[i];
    ifft(spec_buf);
    for (int i = 0; i < n; ++i)
      out[i] = cplx(0.0, 0.5) * spec_buf[i] + cplx(0.0, 1.0) * std::norm(v[i]) * v[i];
  };

  std::vector<cplx> k1(n), k2v(n), k3(n), k4(n), tmp(n);
  auto rk4_step = [&](double dt) {
    rhs(u, k1);
    for (int i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k1[i];
    rhs(tmp, k2v);
    for (int i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k2v[i];
    rhs(tmp, k3);
    for (int i = 0; i < n; ++i) tmp[i] = u[i] + dt * k3[i];
    rhs(tmp, k4);
    for (int i = 0; i < n; ++i)
      u[i] += dt / 6.0 * (k1[i] + 2.0 * k2v[i] + 2.0 * k3[i] + k4[i]);
  };

  const Eigen::MatrixXcd eval = trig_eval_matrix(grid.xs, n, spec.x_min, len);

  ReferenceSolution sol;
  sol.grid = grid;
  sol.channels.assign(2, MatrixXd(grid.ts.size(), grid.xs.size()));
  sol.invariant_trace.push_back({0.0, mass(u)});

  double t_cur = 0.0;
  for (Eigen::Index it = 0; it < grid.ts.size(); ++it) {
    const double t = grid.ts[it];
    if (t > t_cur) {
      const int n_sub = substeps(t_cur, t, max_dt);
      const double dt = (t - t_cur) / n_sub;
      for (int s = 0; s < n_sub; ++s) rk4_step(dt);
      t_cur = t;
    }
    double umax = 0.0;
    for (const auto& z : u) umax = std::max(umax, std::abs(z));
    if (!(umax < 1e3)) throw std::runtime_error("solve_nls: solution blow-up");

    if (t <= 0.0) {
      // The t=0 row is the initial condition itself.
      for (Eigen::Index ix = 0; ix < grid.xs.size(); ++ix) {
        sol.channels[0](it, ix) = 2.0 / std::cosh(grid.xs[ix]);
        sol.channels[1](it, ix) = 0.0;
      }
      continue;
    }
    spec_buf = u;
    fft(spec_buf);
    const Eigen::Map<const Eigen::VectorXcd> coeffs(spec_buf.data(), n);
    const Eigen::VectorXcd vals = eval * coeffs;
    sol.channels[0].row(it) = vals.real().transpose();
    sol.channels[1].row(it) = vals.imag().transpose();
    sol.invariant_trace.push_back({t, mass(u)});
  }
  return sol;
}

ReferenceSolution solve_allen_cahn(const EvalGrid& grid, double max_dt) {
  const PdeSpec spec = pde_spec(PdeId::AllenCahn);
  check_grid(spec, grid);
  if (max_dt <= 0.0) throw std::invalid_argument("solve_allen_cahn: bad max_dt");

  constexpr int n = 512;
  const double len = spec.x_max - spec.x_min;
  const auto ks = wavenumbers(n, len);
  std::vector<double> k2(n);
  for (int i = 0; i < n; ++i) k2[i] = ks[i] * ks[i];

  std::vector<cplx> u(n);
  for (int i = 0; i < n; ++i) {
    const double x = spec.x_min + i * len / n;
    u[i] = cplx(x * x * std::cos(kPi * x), 0.0);
  }

  const double dx_spec = len / n;

  // u_t = 0.0001 u_xx - 5 u^3 + 5 u
  std::vector<cplx> spec_buf(n);
  auto rhs = [&](const std::vector<cplx>& v, std::vector<cplx>& out) {
    spec_buf = v;
    fft(spec_buf);
    for (int i = 0; i < n; ++i) spec_buf[i] *= -k2[i];
    ifft(spec_buf);
    for (int i = 0; i < n; ++i) {
      const double uv = v[i].real();
      out[i] = cplx(0.0001 * spec_buf[i].real() + 5.0 * uv - 5.0 * uv * uv * uv, 0.0);
    }
  };

  // E[u] = int 0.00005 u_x^2 + 1.25 (u^2-1)^2 dx on the collocation grid.
  auto energy = [&]() {
    spec_buf = u;
    fft(spec_buf);
    for (int i = 0; i < n; ++i) spec_buf[i] *= cplx(0.0, ks[i]);
    ifft(spec_buf);
    double e = 0.0;
    for (int i = 0; i < n; ++i) {
      const double ux = spec_buf[i].real();
      const double uv = u[i].real();
      e += 0.00005 * ux * ux + 1.25 * (uv * uv - 1.0) * (uv * uv - 1.0);
    }
    return e * dx_spec;
  };

  std::vector<cplx> k1(n), k2v(n), k3(n), k4(n), tmp(n);
  auto rk4_step = [&](double dt) {
    rhs(u, k1);
    for (int i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k1[i];
    rhs(tmp, k2v);
    for (int i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k2v[i];
    rhs(tmp, k3);
    for (int i = 0; i < n; ++i) tmp[i] = u[i] + dt * k3[i];
    rhs(tmp, k4);
    for (int i = 0; i < n; ++i)
      u[i] += dt / 6.0 * (k1[i] + 2.0 * k2v[i] + 2.0 * k3[i] + k4[i]);
  };

  const Eigen::MatrixXcd eval = trig_eval_matrix(grid.xs, n, spec.x_min, len);

  ReferenceSolution sol;
  sol.grid = grid;
  sol.channels.assign(1, MatrixXd(grid.ts.size(), grid.xs.size()));
  sol.invariant_trace.push_back({0.0, energy()});

  double t_cur = 0.0;
  for (Eigen::Index it = 0; it < grid.ts.size(); ++it) {
    const double t = grid.ts[it];
    if (t > t_cur) {
      const int n_sub = substeps(t_cur, t, max_dt);
      const double dt = (t - t_cur) / n_sub;
      for (int s = 0; s < n_sub; ++s) rk4_step(dt);
      t_cur = t;
    }
    double umax = 0.0;
    for (const auto& z : u) umax = std::max(umax, std::abs(z));
    if (!(umax < 1e3)) throw std::runtime_error("solve_allen_cahn: solution blow-up");

    if (t <= 0.0) {
      for (Eigen::Index ix = 0; ix < grid.xs.size(); ++ix) {
        const double x = grid.xs[ix];
        sol.channels[0](it, ix) = x * x * std::cos(kPi * x);
      }
      continue;
    }
    spec_buf = u;
    fft(spec_buf);
    const Eigen::Map<const Eigen::VectorXcd> coeffs(spec_buf.data(), n);
    const Eigen::VectorXcd vals = eval * coeffs;
    sol.channels[0].row(it) = vals.real().transpose();
    sol.invariant_trace.push_back({t, energy()});
  }
  return sol;
}

ReferenceSolution solve_reference(const PdeSpec& spec, const EvalGrid& grid) {
  switch (spec.id) {
    case PdeId::ViscousBurgers: return solve_viscous_burgers(grid);
    case PdeId::InviscidBurgers: return solve_inviscid_burgers(grid);
    case PdeId::Nls: return solve_nls(grid);
    case PdeId::AllenCahn: return solve_allen_cahn(grid);
  }
  throw std::invalid_argument("solve_reference: unknown pde");
}

void export_reference_csv(const ReferenceSolution& sol,
                          const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("export_reference_csv: cannot open " + path.string());
  f << "t,x,value";
  if (sol.channels.size() > 1) f << ",value_im";
  f << "\n";
  f.precision(17);
  for (Eigen::Index it = 0; it < sol.grid.ts.size(); ++it)
    for (Eigen::Index ix = 0; ix < sol.grid.xs.size(); ++ix) {
      f << sol.grid.ts[it] << "," << sol.grid.xs[ix] << "," << sol.channels[0](it, ix);
      if (sol.channels.size() > 1) f << "," << sol.channels[1](it, ix);
      f << "\n";
    }
}

}  // namespace dpm
