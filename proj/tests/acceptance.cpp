// Acceptance suite: every release gate in one binary, one PASS/FAIL line per
// criterion. Exit code is the number of failed criteria.
//
//   acceptance [--only SUBSTR] [--jobs N] [--out DIR]
//
// --only filters criteria by substring; --jobs bounds the concurrency of the
// end-to-end training runs; --out roots all artifacts (default
// ./acceptance-artifacts).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dpm/harness.hpp"
#include "dpm/metrics.hpp"
#include "dpm/trainer.hpp"

using namespace dpm;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Options {
  std::string only;
  int jobs = env_jobs(2);
  fs::path out = "acceptance-artifacts";
};
Options g_opt;

double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}
double uniform(std::mt19937_64& gen, double lo, double hi) {
  return lo + uniform01(gen) * (hi - lo);
}

Eigen::VectorXd random_vec(int n, std::mt19937_64& gen, double lo = -1, double hi = 1) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform(gen, lo, hi);
  return v;
}

NetworkParams random_params(const LayerSpec& spec, std::uint64_t seed) {
  NetworkParams p = init_params(spec, seed);
  std::mt19937_64 gen(seed ^ 0x9e3779b97f4a7c15ULL);
  for (auto& b : p.biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = uniform(gen, -0.3, 0.3);
  return p;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& theta, double h) {
  Eigen::VectorXd g(theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    const double up = f(probe);
    probe[i] = theta[i] - h;
    const double down = f(probe);
    probe[i] = theta[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double rel_err_norm(const Eigen::VectorXd& approx, const Eigen::VectorXd& exact) {
  return (approx - exact).norm() / std::max(exact.norm(), 1e-12);
}

EvalGrid custom_grid(const PdeSpec& spec, std::vector<double> ts, int nx) {
  EvalGrid g;
  g.segment = Segment::Test;
  g.xs.resize(nx);
  for (int i = 0; i < nx; ++i)
    g.xs[i] = spec.x_min + (spec.x_max - spec.x_min) * i / double(nx - 1);
  g.ts = Eigen::Map<Eigen::VectorXd>(ts.data(), static_cast<Eigen::Index>(ts.size()));
  return g;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---------------------------------------------------------------------------
// Criterion bodies. Each returns true on pass and fills in detail text.

bool gradient_correctness(std::string& detail) {
  double worst = 0.0;
  for (const auto& spec : catalog()) {
    for (int trial = 0; trial < 20; ++trial) {
      const LayerSpec ls{2, 8, 2 + trial % 2, spec.output_channels, trial % 2 == 1};
      const NetworkParams p = random_params(ls, 1000 + trial);
      const TrainSet set = build_train_set(spec, 8, 16, 2000 + trial);
      const GradientBundle b = compute_bundle(p, set, spec, 1.0, 1.0);
      const auto lu = [&](const Eigen::VectorXd& th) {
        return compute_losses(unflatten(ls, th), set, spec, 1.0, 0.0).total;
      };
      const auto lf = [&](const Eigen::VectorXd& th) {
        return compute_losses(unflatten(ls, th), set, spec, 0.0, 1.0).total;
      };
      const double eu = rel_err_norm(fd_gradient(lu, p.flatten(), 1e-6), b.g_lu);
      const double ef = rel_err_norm(fd_gradient(lf, p.flatten(), 1e-6), b.g_lf);
      worst = std::max({worst, eu, ef});
    }
  }
  detail = "max relative error " + std::to_string(worst);
  return worst <= 1e-5;
}

bool jet_correctness(std::string& detail) {
  std::mt19937_64 gen(7);
  double worst1 = 0.0, worst2 = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const LayerSpec ls{2, 4 + trial % 6, 1 + trial % 4, 1 + trial % 2, trial % 3 == 0};
    const NetworkParams p = random_params(ls, 3000 + trial);
    const double x = uniform(gen, -1.0, 1.0);
    const double t = uniform(gen, 0.0, 1.0);
    const Jet j = forward_jet_one(p, x, t);
    auto f = [&](double xx, double tt) {
      Eigen::VectorXd xs(1), ts(1);
      xs[0] = xx;
      ts[0] = tt;
      return forward(p, xs, ts).col(0).eval();
    };
    const double h1 = 1e-5;
    worst1 = std::max(worst1,
                      rel_err_norm((f(x + h1, t) - f(x - h1, t)) / (2 * h1), j.du_dx));
    worst1 = std::max(worst1,
                      rel_err_norm((f(x, t + h1) - f(x, t - h1)) / (2 * h1), j.du_dt));
    const double h2 = 1e-4;
    worst2 = std::max(
        worst2, rel_err_norm((f(x + h2, t) - 2.0 * f(x, t) + f(x - h2, t)) / (h2 * h2),
                             j.d2u_dx2));
  }
  detail = "first-order " + std::to_string(worst1) + ", u_xx " + std::to_string(worst2);
  return worst1 <= 1e-5 && worst2 <= 1e-4;
}

bool theorem1(std::string& detail) {
  std::mt19937_64 gen(11);
  double worst_constraint = 0.0, worst_perp = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 100;
    const Eigen::VectorXd g_l = random_vec(n, gen, -3, 3);
    Eigen::VectorXd g_lf = random_vec(n, gen, -3, 3);
    if (g_lf.norm() < 1e-9) g_lf[0] = 1.0;
    const double delta = uniform(gen, 1e-4, 5.0);
    const Eigen::VectorXd v = manipulation_vector(g_l, g_lf, delta);
    worst_constraint =
        std::max(worst_constraint, std::abs((v + g_l).dot(g_lf) - delta));
    const Eigen::VectorXd perp = v - v.dot(g_lf) / g_lf.squaredNorm() * g_lf;
    worst_perp = std::max(worst_perp, perp.norm());
    for (int k = 0; k < 10; ++k) {
      Eigen::VectorXd p = random_vec(n, gen, -3, 3);
      p -= p.dot(g_lf) / g_lf.squaredNorm() * g_lf;
      if (v.norm() > (v + p).norm() + 1e-12) {
        detail = "norm minimality violated";
        return false;
      }
    }
  }
  detail = "constraint " + std::to_string(worst_constraint) + ", parallelism " +
           std::to_string(worst_perp);
  return worst_constraint <= 1e-9 && worst_perp <= 1e-9;
}

bool pull_descent(std::string& detail) {
  const PdeSpec spec = pde_spec(PdeId::ViscousBurgers);
  int checked = 0;
  double worst = -1e300;
  for (std::uint64_t seed = 0; seed < 4000 && checked < 100; ++seed) {
    const LayerSpec ls{2, 8, 2, 1, false};
    const NetworkParams p = random_params(ls, seed);
    const TrainSet set = build_train_set(spec, 10, 30, seed + 5000);
    const GradientBundle b = compute_bundle(p, set, spec, 1.0, 1.0);
    DpmState state;
    state.epsilon = 1e-3;
    state.delta = 0.01;
    if (b.losses.l_f <= state.epsilon || b.g_lu.dot(b.g_lf) >= 0.0) continue;
    const auto [g, c] = select_gradient(b, state);
    if (c != GradientCase::PulledGrad) continue;
    const double gamma = 1e-6;
    const NetworkParams stepped = unflatten(ls, (p.flatten() - gamma * g).eval());
    const double lf_after = compute_losses(stepped, set, spec, 1.0, 1.0).l_f;
    worst = std::max(worst, lf_after - b.losses.l_f);
    ++checked;
  }
  detail = std::to_string(checked) + " pulled steps, worst increase " +
           std::to_string(worst);
  return checked >= 100 && worst <= 1e-12;
}

bool delta_dynamics(std::string& detail) {
  const double eps = 1e-3, w = 1.01, d0 = 0.01;
  const std::vector<double> lf_script = {2e-3, 3e-3, 5e-4, 2e-3, 5e-4,
                                         5e-4, 1e-3, 2e-3, 9e-4};
  DpmState s{eps, d0, w, GradientCase::CombinedGrad};
  // Hand-computed multiplicative trace; L_f == eps counts as "not above".
  std::vector<double> expected;
  double d = d0;
  for (const double lf : lf_script) {
    d = (lf - eps) > 0.0 ? d * w : d / w;
    expected.push_back(d);
  }
  double worst = 0.0;
  for (size_t i = 0; i < lf_script.size(); ++i) {
    s = update_delta(s, lf_script[i]);
    worst = std::max(worst, std::abs(s.delta - expected[i]) / expected[i]);
  }
  detail = "max relative deviation " + std::to_string(worst);
  return worst <= 1e-15;
}

bool refsolver_gates(std::string& detail) {
  std::ostringstream d;
  bool ok = true;

  {  // IC recovery for all four solvers
    double worst = 0.0;
    for (const auto& spec : catalog()) {
      const EvalGrid g = custom_grid(spec, {0.0}, grid_spatial_points(spec.id));
      const ReferenceSolution sol = solve_reference(spec, g);
      for (Eigen::Index ix = 0; ix < g.xs.size(); ++ix) {
        const Eigen::VectorXd ic = initial_condition(spec, g.xs[ix]);
        for (int c = 0; c < spec.output_channels; ++c)
          worst = std::max(worst, std::abs(sol.channels[c](0, ix) - ic[c]));
      }
    }
    d << "ic=" << worst;
    ok = ok && worst <= 1e-6;
  }
  {  // NLS mass drift over the full run
    const PdeSpec spec = pde_spec(PdeId::Nls);
    std::vector<double> ts;
    for (int k = 1; k <= 20; ++k) ts.push_back(k * kPi / 40.0);
    const ReferenceSolution sol = solve_nls(custom_grid(spec, ts, 64));
    const double m0 = sol.invariant_trace.front().second;
    double drift = 0.0;
    for (const auto& [t, m] : sol.invariant_trace)
      drift = std::max(drift, std::abs(m - m0) / m0);
    d << " mass_drift=" << drift;
    ok = ok && drift < 1e-6;
  }
  {  // AC energy monotone over [0, 1]
    const PdeSpec spec = pde_spec(PdeId::AllenCahn);
    std::vector<double> ts;
    for (int k = 1; k <= 20; ++k) ts.push_back(k * 0.05);
    const ReferenceSolution sol = solve_allen_cahn(custom_grid(spec, ts, 64));
    double worst_rise = 0.0;
    for (size_t i = 1; i < sol.invariant_trace.size(); ++i)
      worst_rise = std::max(worst_rise, sol.invariant_trace[i].second -
                                            sol.invariant_trace[i - 1].second);
    d << " energy_rise=" << worst_rise;
    ok = ok && worst_rise <= 0.0;
  }
  {  // viscous odd symmetry on the test grid
    const ReferenceSolution sol = solve_viscous_burgers(
        build_eval_grid(pde_spec(PdeId::ViscousBurgers), Segment::Test));
    double worst = 0.0;
    const auto nx = sol.grid.xs.size();
    for (Eigen::Index it = 0; it < sol.grid.ts.size(); ++it)
      for (Eigen::Index ix = 0; ix < nx; ++ix)
        worst = std::max(worst, std::abs(sol.channels[0](it, ix) +
                                         sol.channels[0](it, nx - 1 - ix)));
    d << " odd_sym=" << worst;
    ok = ok && worst <= 1e-6;
  }
  {  // inviscid self-convergence
    const EvalGrid g = build_eval_grid(pde_spec(PdeId::InviscidBurgers), Segment::Test);
    const ReferenceSolution a = solve_inviscid_burgers(g);
    const ReferenceSolution b = solve_inviscid_burgers(g, 0.0175 / 8.0);
    Eigen::VectorXd va(a.channels[0].size()), vb(b.channels[0].size());
    Eigen::Index k = 0;
    for (Eigen::Index it = 0; it < g.ts.size(); ++it)
      for (Eigen::Index ix = 0; ix < g.xs.size(); ++ix, ++k) {
        va[k] = a.channels[0](it, ix);
        vb[k] = b.channels[0](it, ix);
      }
    const double change = rel_l2(va, vb);
    d << " self_conv=" << change;
    ok = ok && change < 1e-2;
  }
  detail = d.str();
  return ok;
}

// End-to-end configurations. The viscous setting is the best-reported one;
// the Allen-Cahn setting was fixed by a small sweep during development.
ExperimentConfig viscous_e2e(Method m) {
  ExperimentConfig c;
  c.pde = PdeId::ViscousBurgers;
  c.method = m;
  c.depth = 8;
  c.width = 20;
  c.learning_rate = 5e-3;
  c.optimizer = Optimizer::Adam;
  c.max_epochs = 6000;
  c.patience = 50;
  c.epsilon = 1e-3;
  c.delta0 = 1e-2;
  c.inflation = 1.01;
  c.n_u = 100;
  c.n_f = 10000;
  c.seeds = {1, 2, 3};
  return c;
}

ExperimentConfig allen_cahn_e2e() {
  ExperimentConfig c;
  c.pde = PdeId::AllenCahn;
  c.method = Method::PINN_D2;
  c.depth = 6;
  c.width = 20;
  c.learning_rate = 5e-3;
  c.optimizer = Optimizer::Adam;
  c.max_epochs = 4000;
  c.patience = 50;
  c.epsilon = 1e-3;
  c.delta0 = 1e-2;
  c.inflation = 1.01;
  c.n_u = 100;
  c.n_f = 20000;
  c.seeds = {1, 2, 3};
  return c;
}

const std::vector<RunRecord>& viscous_records() {
  static const std::vector<RunRecord> records = [] {
    ReferenceCache cache(g_opt.out / "ref-cache");
    const std::vector<ExperimentConfig> grid = {viscous_e2e(Method::PINN),
                                                viscous_e2e(Method::PINN_R),
                                                viscous_e2e(Method::PINN_D2)};
    return execute_sweep(grid, cache, g_opt.out / "e2e-viscous", g_opt.jobs);
  }();
  return records;
}

std::vector<double> test_rel_l2_of(const std::vector<RunRecord>& records, Method m) {
  std::vector<double> out;
  for (const auto& r : records)
    if (r.config.method == m && !r.aborted) out.push_back(r.test.rel_l2);
  return out;
}

bool e2e_ordering(std::string& detail) {
  const auto& records = viscous_records();
  const auto pinn = test_rel_l2_of(records, Method::PINN);
  const auto pinn_r = test_rel_l2_of(records, Method::PINN_R);
  const auto d2 = test_rel_l2_of(records, Method::PINN_D2);
  if (pinn.size() != 3 || pinn_r.size() != 3 || d2.size() != 3) {
    detail = "missing runs";
    return false;
  }
  const double m_pinn = median3(pinn), m_pinnr = median3(pinn_r), m_d2 = median3(d2);
  std::ostringstream d;
  d << "median test rel_l2: PINN=" << m_pinn << " PINN-R=" << m_pinnr
    << " PINN-D2=" << m_d2;
  detail = d.str();
  return m_d2 < m_pinn && m_d2 < m_pinnr;
}

bool e2e_magnitude(std::string& detail) {
  const double m_visc = median3(test_rel_l2_of(viscous_records(), Method::PINN_D2));

  static const std::vector<RunRecord> ac_records = [] {
    ReferenceCache cache(g_opt.out / "ref-cache");
    return execute_sweep({allen_cahn_e2e()}, cache, g_opt.out / "e2e-allen-cahn",
                         g_opt.jobs);
  }();
  const auto ac = test_rel_l2_of(ac_records, Method::PINN_D2);
  if (ac.size() != 3) {
    detail = "missing runs";
    return false;
  }
  const double m_ac = median3(ac);
  std::ostringstream d;
  d << "median test rel_l2: viscous PINN-D2=" << m_visc << " (<=0.20), allen-cahn "
    << "PINN-D2=" << m_ac << " (<=0.35)";
  detail = d.str();
  return m_visc <= 0.20 && m_ac <= 0.35;
}

bool metric_oracles(std::string& detail) {
  std::mt19937_64 gen(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 97;
    const Eigen::VectorXd ref = random_vec(n, gen, -3, 3);
    const Eigen::VectorXd pred = random_vec(n, gen, -3, 3);
    // Scalar-loop recomputation.
    double diff2 = 0, ref2 = 0, maxe = 0, mae = 0, rmean = 0, dmean = 0;
    for (int i = 0; i < n; ++i) {
      const double e = pred[i] - ref[i];
      diff2 += e * e;
      ref2 += ref[i] * ref[i];
      maxe = std::max(maxe, std::abs(e));
      mae += std::abs(e);
      rmean += ref[i];
      dmean += ref[i] - pred[i];
    }
    rmean /= n;
    dmean /= n;
    double var_r = 0, var_d = 0;
    for (int i = 0; i < n; ++i) {
      var_r += (ref[i] - rmean) * (ref[i] - rmean);
      var_d += (ref[i] - pred[i] - dmean) * (ref[i] - pred[i] - dmean);
    }
    const MetricsReport m = compute_metrics(pred, ref);
    worst = std::max(worst, std::abs(m.rel_l2 - std::sqrt(diff2) / std::sqrt(ref2)));
    worst = std::max(worst, std::abs(m.explained_variance - (1.0 - var_d / var_r)));
    worst = std::max(worst, std::abs(m.max_error - maxe));
    worst = std::max(worst, std::abs(m.mean_abs_error - mae / n));
  }

  Eigen::VectorXd pred(2), ref(2);
  pred << 1, 0;
  ref << 1, 2;
  const bool worked = std::abs(rel_l2(pred, ref) - 2.0 / std::sqrt(5.0)) < 1e-15 &&
                      std::abs(explained_variance(pred, ref) + 3.0) < 1e-15;
  detail = "max scalar-loop deviation " + std::to_string(worst) +
           (worked ? ", worked examples exact" : ", worked examples WRONG");
  return worst <= 1e-12 && worked;
}

bool determinism(std::string& detail) {
  ReferenceCache cache(g_opt.out / "ref-cache");
  ExperimentConfig c;
  c.pde = PdeId::ViscousBurgers;
  c.method = Method::PINN_D2;
  c.depth = 3;
  c.width = 10;
  c.max_epochs = 60;
  c.n_u = 20;
  c.n_f = 200;
  const auto dir_a = g_opt.out / "determinism" / "a";
  const auto dir_b = g_opt.out / "determinism" / "b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  execute_run(c, 17, cache, dir_a);
  execute_run(c, 17, cache, dir_b);
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  const bool metrics_same = slurp(dir_a / "metrics.csv") == slurp(dir_b / "metrics.csv");
  const bool history_same = slurp(dir_a / "history.csv") == slurp(dir_b / "history.csv");
  detail = std::string("metrics ") + (metrics_same ? "identical" : "DIFFER") +
           ", history " + (history_same ? "identical" : "DIFFER");
  return metrics_same && history_same;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      g_opt.only = argv[++i];
    } else if (arg == "--jobs" && i + 1 < argc) {
      g_opt.jobs = std::atoi(argv[++i]);
    } else if (arg == "--out" && i + 1 < argc) {
      g_opt.out = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--only SUBSTR] [--jobs N] [--out DIR]\n");
      return 1;
    }
  }
  fs::create_directories(g_opt.out);

  const std::vector<std::pair<std::string, std::function<bool(std::string&)>>> criteria =
      {
          {"gradient-correctness", gradient_correctness},
          {"jet-correctness", jet_correctness},
          {"theorem-1-suite", theorem1},
          {"dpm-pull-descent", pull_descent},
          {"delta-dynamics", delta_dynamics},
          {"reference-solver-gates", refsolver_gates},
          {"end-to-end-ordering", e2e_ordering},
          {"end-to-end-magnitude", e2e_magnitude},
          {"metric-oracles", metric_oracles},
          {"determinism", determinism},
      };

  int failures = 0, ran = 0;
  for (const auto& [name, fn] : criteria) {
    if (!g_opt.only.empty() && name.find(g_opt.only) == std::string::npos) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool pass = false;
    try {
      pass = fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %s — %s (%.1fs)\n", pass ? "PASS" : "FAIL", name.c_str(),
                detail.c_str(), secs);
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criteria matched --only %s\n", g_opt.only.c_str());
    return 1;
  }
  std::printf("%d/%d criteria passed\n", ran - failures, ran);
  return failures;
}
