#pragma once

#include <Eigen/Dense>

namespace dpm {

struct MetricsReport {
  double rel_l2;
  double explained_variance;
  double max_error;
  double mean_abs_error;
};

/// ||pred - ref||_2 / ||ref||_2. Throws on empty input or zero reference norm.
double rel_l2(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref);

/// 1 - Var(ref - pred) / Var(ref), population variance. Throws when the
/// reference has zero variance. Can be negative.
double explained_variance(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref);

double max_error(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref);

double mean_abs_error(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref);

MetricsReport compute_metrics(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref);

}  // namespace dpm
