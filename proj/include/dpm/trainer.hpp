#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dpm/net.hpp"
#include "dpm/pde.hpp"
#include "dpm/refsolvers.hpp"
#include "dpm/sampling.hpp"

namespace dpm {

/// PINN and PINN_R minimize the combined loss as-is; PINN_D1 and PINN_D2 add
/// the dynamic-pulling gradient rule (D1 keeps delta fixed, D2 adapts it).
/// FC and FC_R are the label-fitting regression baselines.
enum class Method { PINN, PINN_R, PINN_D1, PINN_D2, FC, FC_R };

std::string method_name(Method m);
Method method_from_name(const std::string& name);
bool method_uses_residual_net(Method m);
bool method_is_dpm(Method m);
bool method_is_regression(Method m);

struct LossReport {
  double l_u;
  double l_f;
  double total;  // alpha*l_u + beta*l_f
};

struct GradientBundle {
  Eigen::VectorXd g_lu;
  Eigen::VectorXd g_lf;
  Eigen::VectorXd g_l;
  LossReport losses;
};

enum class GradientCase { OnlyDataGrad, CombinedGrad, PulledGrad };
std::string gradient_case_name(GradientCase c);

/// Pulling-rule state: epsilon is the residual-loss threshold, delta the
/// pulling strength, inflation the multiplicative rate (> 1) by which delta
/// grows while the residual loss stays above epsilon and shrinks otherwise.
struct DpmState {
  double epsilon = 1e-3;
  double delta = 1e-2;
  double inflation = 1.01;
  GradientCase last_case = GradientCase::CombinedGrad;
};

enum class Optimizer { SGD, Adam };
std::string optimizer_name(Optimizer o);
Optimizer optimizer_from_name(const std::string& name);

struct TrainerConfig {
  Method method = Method::PINN;
  LayerSpec layers;
  double alpha = 1.0;
  double beta = 1.0;
  double learning_rate = 5e-3;
  Optimizer optimizer = Optimizer::Adam;
  int max_epochs = 10000;
  int patience = 50;
  double min_improvement = 1e-5;
  std::uint64_t seed = 0;
  // Pulling-rule knobs, used by the D1/D2 methods only.
  double epsilon = 1e-3;
  double delta0 = 1e-2;
  double inflation = 1.01;

  void validate() const;  // the DPM methods require alpha = beta = 1
};

struct HistoryRow {
  int epoch;
  double l_u;
  double l_f;
  double l;
  double delta;
  GradientCase grad_case;
  double val_error;
};

struct TrainingHistory {
  std::vector<HistoryRow> rows;
  bool aborted = false;
  std::string stop_reason;

  /// CSV with header epoch,L_u,L_f,L,delta,case,val_error.
  void to_csv(const std::filesystem::path& path) const;
};

/// L_u: mean squared error over the labeled tuples plus, for periodic
/// problems, the mean squared value and u_x gaps across the domain ends.
/// L_f: mean squared residual over collocation points (channels summed).
LossReport compute_losses(const NetworkParams& params, const TrainSet& set,
                          const PdeSpec& spec, double alpha, double beta);

/// Losses plus the three flat gradients, sharing one jet evaluation per
/// point set. g_l = alpha*g_lu + beta*g_lf.
GradientBundle compute_bundle(const NetworkParams& params, const TrainSet& set,
                              const PdeSpec& spec, double alpha, double beta);

/// Minimal-norm vector v with (v + g_l) . g_lf = delta:
///   v* = (delta - g_l . g_lf) / ||g_lf||^2 * g_lf.
/// Throws when g_lf vanishes.
Eigen::VectorXd manipulation_vector(const Eigen::VectorXd& g_l,
                                    const Eigen::VectorXd& g_lf, double delta);

/// The case rule: g_lu while L_f <= epsilon; g_l while the data and residual
/// gradients agree; otherwise the pulled gradient v* + g_l.
std::pair<Eigen::VectorXd, GradientCase> select_gradient(const GradientBundle& bundle,
                                                         const DpmState& state);

/// delta <- w*delta if L_f > epsilon else delta/w, clamped to [1e-8, 1e6].
DpmState update_delta(const DpmState& state, double l_f);

struct OptimizerState {
  Optimizer method = Optimizer::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  static OptimizerState make(Optimizer method, Eigen::Index n);
};

/// One descent step on the flat parameters. Throws on non-finite gradients.
void optimizer_step(OptimizerState& state, Eigen::VectorXd& theta,
                    const Eigen::VectorXd& grad, double learning_rate);

/// Prediction on a grid flattened time-major; the complex-valued problem is
/// reduced to pointwise magnitudes, matching how solutions are scored.
Eigen::VectorXd predict_grid_vector(const NetworkParams& params, const PdeSpec& spec,
                                    const EvalGrid& grid);
Eigen::VectorXd reference_grid_vector(const PdeSpec& spec, const ReferenceSolution& ref);

struct TrainResult {
  NetworkParams params;  // parameters achieving the best validation error
  TrainingHistory history;
  double best_val_error;
};

/// Full-batch training: per epoch the gradient bundle is evaluated, the
/// method's update direction chosen, and one optimizer step taken. Validation
/// relative L2 against the reference drives early stopping (no improvement
/// beyond min_improvement for `patience` epochs) and checkpoint selection.
TrainResult train(const TrainerConfig& config, const PdeSpec& spec,
                  const TrainSet& train_set, const EvalGrid& val_grid,
                  const ReferenceSolution& ref_val);

/// Regression baseline: same machinery, but the set's collocation points are
/// dropped and only the labeled tuples drive the loss.
TrainResult train_regression(const TrainerConfig& config, const PdeSpec& spec,
                             const TrainSet& augmented_set, const EvalGrid& val_grid,
                             const ReferenceSolution& ref_val);

}  // namespace dpm
