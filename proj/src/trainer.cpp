#include "dpm/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "dpm/metrics.hpp"

namespace dpm {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Labeled tuples and periodic pairs flattened into one evaluation batch:
// data columns first, then all pair-low points, then all pair-high points.
struct BatchedSet {
  VectorXd xs_u, ts_u;
  MatrixXd targets;  // channels x n_data
  Index n_data = 0;
  Index n_pairs = 0;
  VectorXd xs_f, ts_f;
};

BatchedSet batch_train_set(const TrainSet& set, const PdeSpec& spec) {
  BatchedSet b;
  b.n_data = static_cast<Index>(set.data_points.size());
  b.n_pairs = static_cast<Index>(set.periodic_pairs.size());
  const Index n_u = b.n_data + 2 * b.n_pairs;
  b.xs_u.resize(n_u);
  b.ts_u.resize(n_u);
  b.targets.resize(spec.output_channels, b.n_data);
  for (Index i = 0; i < b.n_data; ++i) {
    const auto& p = set.data_points[i];
    if (p.target.size() != spec.output_channels)
      throw std::invalid_argument("train set: target channel count mismatch");
    b.xs_u[i] = p.x;
    b.ts_u[i] = p.t;
    b.targets.col(i) = p.target;
  }
  for (Index j = 0; j < b.n_pairs; ++j) {
    const auto& pr = set.periodic_pairs[j];
    b.xs_u[b.n_data + j] = pr.x_lo;
    b.ts_u[b.n_data + j] = pr.t;
    b.xs_u[b.n_data + b.n_pairs + j] = pr.x_hi;
    b.ts_u[b.n_data + b.n_pairs + j] = pr.t;
  }
  const Index n_f = static_cast<Index>(set.collocation.size());
  b.xs_f.resize(n_f);
  b.ts_f.resize(n_f);
  for (Index i = 0; i < n_f; ++i) {
    b.xs_f[i] = set.collocation[i].x;
    b.ts_f[i] = set.collocation[i].t;
  }
  return b;
}

// Tapes and adjoint buffers persist across epochs of one training run.
struct EvalWorkspace {
  JetTape tape_u;
  JetTape tape_f;
  JetBatch adj_u;
  JetBatch adj_f;
};

void zero_adjoints(JetBatch& adj, Index channels, Index n) {
  adj.u.setZero(channels, n);
  adj.du_dx.setZero(channels, n);
  adj.du_dt.setZero(channels, n);
  adj.d2u_dx2.setZero(channels, n);
}

GradientBundle evaluate(const NetworkParams& params, const BatchedSet& b,
                        const PdeSpec& spec, double alpha, double beta,
                        bool with_grads, EvalWorkspace& ws) {
  const Index n_u = b.xs_u.size();
  const Index n_f = b.xs_f.size();
  if (n_u == 0 && n_f == 0)
    throw std::invalid_argument("compute_losses: empty train set");

  GradientBundle out;
  double l_u = 0.0;

  if (n_u > 0) {
    ws.tape_u.run(params, b.xs_u, b.ts_u);
    const JetBatch& jets = ws.tape_u.jets();
    JetBatch& adj = ws.adj_u;
    zero_adjoints(adj, spec.output_channels, n_u);
    if (b.n_data > 0) {
      const MatrixXd diff = jets.u.leftCols(b.n_data) - b.targets;
      l_u += diff.squaredNorm() / double(b.n_data);
      adj.u.leftCols(b.n_data) = (2.0 / double(b.n_data)) * diff;
    }
    if (b.n_pairs > 0) {
      const auto lo = Eigen::seqN(b.n_data, b.n_pairs);
      const auto hi = Eigen::seqN(b.n_data + b.n_pairs, b.n_pairs);
      const MatrixXd du = jets.u(Eigen::all, lo) - jets.u(Eigen::all, hi);
      const MatrixXd dux = jets.du_dx(Eigen::all, lo) - jets.du_dx(Eigen::all, hi);
      l_u += (du.squaredNorm() + dux.squaredNorm()) / double(b.n_pairs);
      const double s = 2.0 / double(b.n_pairs);
      adj.u(Eigen::all, lo) += s * du;
      adj.u(Eigen::all, hi) -= s * du;
      adj.du_dx(Eigen::all, lo) += s * dux;
      adj.du_dx(Eigen::all, hi) -= s * dux;
    }
    if (with_grads) out.g_lu = ws.tape_u.grad(adj);
  }

  double l_f = 0.0;
  if (n_f > 0) {
    ws.tape_f.run(params, b.xs_f, b.ts_f);
    const JetBatch& jets = ws.tape_f.jets();
    const MatrixXd res = residual_batch(spec, b.xs_f, b.ts_f, jets);
    l_f = res.squaredNorm() / double(n_f);
    if (with_grads) {
      const MatrixXd res_adj = (2.0 / double(n_f)) * res;
      residual_pullback_batch(spec, b.xs_f, jets, res_adj, ws.adj_f);
      out.g_lf = ws.tape_f.grad(ws.adj_f);
    }
  }

  if (with_grads) {
    const Index n = params.parameter_count();
    if (out.g_lu.size() == 0) out.g_lu = VectorXd::Zero(n);
    if (out.g_lf.size() == 0) out.g_lf = VectorXd::Zero(n);
    out.g_l = alpha * out.g_lu + beta * out.g_lf;
  }
  out.losses = {l_u, l_f, alpha * l_u + beta * l_f};
  return out;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::PINN: return "pinn";
    case Method::PINN_R: return "pinn-r";
    case Method::PINN_D1: return "pinn-d1";
    case Method::PINN_D2: return "pinn-d2";
    case Method::FC: return "fc";
    case Method::FC_R: return "fc-r";
  }
  throw std::invalid_argument("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
  if (name == "pinn") return Method::PINN;
  if (name == "pinn-r") return Method::PINN_R;
  if (name == "pinn-d1") return Method::PINN_D1;
  if (name == "pinn-d2") return Method::PINN_D2;
  if (name == "fc") return Method::FC;
  if (name == "fc-r") return Method::FC_R;
  throw std::invalid_argument("unknown method: " + name);
}

bool method_uses_residual_net(Method m) {
  return m != Method::PINN && m != Method::FC;
}

bool method_is_dpm(Method m) {
  return m == Method::PINN_D1 || m == Method::PINN_D2;
}

bool method_is_regression(Method m) { return m == Method::FC || m == Method::FC_R; }

std::string gradient_case_name(GradientCase c) {
  switch (c) {
    case GradientCase::OnlyDataGrad: return "only_data";
    case GradientCase::CombinedGrad: return "combined";
    case GradientCase::PulledGrad: return "pulled";
  }
  throw std::invalid_argument("gradient_case_name: unknown case");
}

std::string optimizer_name(Optimizer o) {
  return o == Optimizer::SGD ? "sgd" : "adam";
}

Optimizer optimizer_from_name(const std::string& name) {
  if (name == "sgd") return Optimizer::SGD;
  if (name == "adam") return Optimizer::Adam;
  throw std::invalid_argument("unknown optimizer: " + name);
}

void TrainerConfig::validate() const {
  layers.validate();
  if (method_is_dpm(method) && (alpha != 1.0 || beta != 1.0))
    throw std::invalid_argument("TrainerConfig: DPM methods require alpha = beta = 1");
  if (learning_rate <= 0.0) throw std::invalid_argument("TrainerConfig: bad learning rate");
  if (max_epochs < 0) throw std::invalid_argument("TrainerConfig: bad max_epochs");
  if (patience < 1) throw std::invalid_argument("TrainerConfig: bad patience");
  if (method_is_dpm(method) && (epsilon <= 0.0 || delta0 <= 0.0 || inflation <= 1.0))
    throw std::invalid_argument("TrainerConfig: DPM requires epsilon, delta > 0 and w > 1");
}

void TrainingHistory::to_csv(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("history: cannot open " + path.string());
  f << "epoch,L_u,L_f,L,delta,case,val_error\n";
  f.precision(17);
  for (const auto& r : rows)
    f << r.epoch << "," << r.l_u << "," << r.l_f << "," << r.l << "," << r.delta
      << "," << gradient_case_name(r.grad_case) << "," << r.val_error << "\n";
}

LossReport compute_losses(const NetworkParams& params, const TrainSet& set,
                          const PdeSpec& spec, double alpha, double beta) {
  EvalWorkspace ws;
  return evaluate(params, batch_train_set(set, spec), spec, alpha, beta, false, ws).losses;
}

GradientBundle compute_bundle(const NetworkParams& params, const TrainSet& set,
                              const PdeSpec& spec, double alpha, double beta) {
  EvalWorkspace ws;
  return evaluate(params, batch_train_set(set, spec), spec, alpha, beta, true, ws);
}

Eigen::VectorXd manipulation_vector(const Eigen::VectorXd& g_l,
                                    const Eigen::VectorXd& g_lf, double delta) {
  if (g_l.size() != g_lf.size())
    throw std::invalid_argument("manipulation_vector: gradient sizes differ");
  const double norm_sq = g_lf.squaredNorm();
  if (norm_sq == 0.0)
    throw std::runtime_error(
        "manipulation_vector: residual-loss gradient vanished; cannot pull");
  return ((delta - g_l.dot(g_lf)) / norm_sq) * g_lf;
}

std::pair<Eigen::VectorXd, GradientCase> select_gradient(const GradientBundle& bundle,
                                                         const DpmState& state) {
  if (bundle.losses.l_f <= state.epsilon)
    return {bundle.g_lu, GradientCase::OnlyDataGrad};
  if (bundle.g_lu.dot(bundle.g_lf) >= 0.0)
    return {bundle.g_l, GradientCase::CombinedGrad};
  return {manipulation_vector(bundle.g_l, bundle.g_lf, state.delta) + bundle.g_l,
          GradientCase::PulledGrad};
}

DpmState update_delta(const DpmState& state, double l_f) {
  DpmState next = state;
  const double shift = l_f - state.epsilon;
  next.delta = shift > 0.0 ? state.delta * state.inflation : state.delta / state.inflation;
  next.delta = std::clamp(next.delta, 1e-8, 1e6);
  return next;
}

OptimizerState OptimizerState::make(Optimizer method, Eigen::Index n) {
  OptimizerState s;
  s.method = method;
  s.m = VectorXd::Zero(n);
  s.v = VectorXd::Zero(n);
  return s;
}

void optimizer_step(OptimizerState& state, Eigen::VectorXd& theta,
                    const Eigen::VectorXd& grad, double learning_rate) {
  if (theta.size() != grad.size())
    throw std::invalid_argument("optimizer_step: gradient size mismatch");
  if (!grad.allFinite())
    throw std::runtime_error("optimizer_step: non-finite gradient, aborting step");
  if (state.method == Optimizer::SGD) {
    theta -= learning_rate * grad;
    return;
  }
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v.array() =
      state.beta2 * state.v.array() + (1.0 - state.beta2) * grad.array().square();
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  theta.array() -= learning_rate * (state.m.array() / bc1) /
                   ((state.v.array() / bc2).sqrt() + state.eps);
}

Eigen::VectorXd predict_grid_vector(const NetworkParams& params, const PdeSpec& spec,
                                    const EvalGrid& grid) {
  const Index nt = grid.ts.size();
  const Index nx = grid.xs.size();
  VectorXd xs(nt * nx), ts(nt * nx);
  for (Index it = 0; it < nt; ++it)
    for (Index ix = 0; ix < nx; ++ix) {
      xs[it * nx + ix] = grid.xs[ix];
      ts[it * nx + ix] = grid.ts[it];
    }
  const MatrixXd u = forward(params, xs, ts);
  if (spec.id == PdeId::Nls)
    return (u.row(0).array().square() + u.row(1).array().square()).sqrt().transpose();
  return u.row(0).transpose();
}

Eigen::VectorXd reference_grid_vector(const PdeSpec& spec, const ReferenceSolution& ref) {
  const Index nt = ref.grid.ts.size();
  const Index nx = ref.grid.xs.size();
  VectorXd out(nt * nx);
  for (Index it = 0; it < nt; ++it)
    for (Index ix = 0; ix < nx; ++ix) {
      if (spec.id == PdeId::Nls)
        out[it * nx + ix] = std::hypot(ref.channels[0](it, ix), ref.channels[1](it, ix));
      else
        out[it * nx + ix] = ref.channels[0](it, ix);
    }
  return out;
}

namespace {

TrainResult train_impl(const TrainerConfig& config, const PdeSpec& spec,
                       const TrainSet& train_set, const EvalGrid& val_grid,
                       const ReferenceSolution& ref_val) {
  config.validate();
  const BatchedSet batched = batch_train_set(train_set, spec);
  const VectorXd ref_vec = reference_grid_vector(spec, ref_val);
  EvalWorkspace ws;

  NetworkParams params = init_params(config.layers, config.seed);
  VectorXd theta = params.flatten();
  OptimizerState opt = OptimizerState::make(config.optimizer, theta.size());
  DpmState dpm{config.epsilon, config.delta0, config.inflation,
               GradientCase::CombinedGrad};
  const bool use_dpm = method_is_dpm(config.method);

  TrainResult result;
  result.best_val_error = std::numeric_limits<double>::infinity();
  VectorXd best_theta = theta;
  double patience_best = std::numeric_limits<double>::infinity();
  int since_improvement = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    params = unflatten(config.layers, theta);
    GradientBundle bundle;
    try {
      bundle = evaluate(params, batched, spec, config.alpha, config.beta, true, ws);
    } catch (const std::exception& e) {
      result.history.aborted = true;
      result.history.stop_reason = e.what();
      break;
    }

    VectorXd g;
    GradientCase grad_case = GradientCase::CombinedGrad;
    if (use_dpm) {
      try {
        std::tie(g, grad_case) = select_gradient(bundle, dpm);
      } catch (const std::exception& e) {
        result.history.aborted = true;
        result.history.stop_reason = e.what();
        break;
      }
    } else {
      g = bundle.g_l;
    }
    dpm.last_case = grad_case;

    const double val_err = rel_l2(predict_grid_vector(params, spec, val_grid), ref_vec);
    result.history.rows.push_back({epoch, bundle.losses.l_u, bundle.losses.l_f,
                                   bundle.losses.total, dpm.delta, grad_case, val_err});

    if (!std::isfinite(bundle.losses.total) || !std::isfinite(val_err)) {
      result.history.aborted = true;
      result.history.stop_reason = "non-finite loss";
      break;
    }

    if (val_err < result.best_val_error) {
      result.best_val_error = val_err;
      best_theta = theta;
    }
    if (val_err < patience_best - config.min_improvement) {
      patience_best = val_err;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    if (since_improvement >= config.patience) {
      result.history.stop_reason = "patience";
      break;
    }

    try {
      optimizer_step(opt, theta, g, config.learning_rate);
    } catch (const std::exception& e) {
      result.history.aborted = true;
      result.history.stop_reason = e.what();
      break;
    }
    if (config.method == Method::PINN_D2) dpm = update_delta(dpm, bundle.losses.l_f);
  }

  if (result.history.stop_reason.empty()) result.history.stop_reason = "max_epochs";
  result.params = unflatten(config.layers, best_theta);
  return result;
}

}  // namespace

TrainResult train(const TrainerConfig& config, const PdeSpec& spec,
                  const TrainSet& train_set, const EvalGrid& val_grid,
                  const ReferenceSolution& ref_val) {
  return train_impl(config, spec, train_set, val_grid, ref_val);
}

TrainResult train_regression(const TrainerConfig& config, const PdeSpec& spec,
                             const TrainSet& augmented_set, const EvalGrid& val_grid,
                             const ReferenceSolution& ref_val) {
  if (method_is_dpm(config.method))
    throw std::invalid_argument("train_regression: regression methods only");
  for (const auto& p : augmented_set.data_points)
    if (p.target.size() != spec.output_channels)
      throw std::invalid_argument("train_regression: unlabeled point in augmented set");
  TrainSet labeled = augmented_set;
  labeled.collocation.clear();
  return train_impl(config, spec, labeled, val_grid, ref_val);
}

}  // namespace dpm
