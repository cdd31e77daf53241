#include "dpm/metrics.hpp"

#include <stdexcept>

namespace dpm {

namespace {

void check_pair(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
  if (pred.size() != ref.size())
    throw std::invalid_argument("metrics: pred and ref lengths differ");
  if (pred.size() == 0) throw std::invalid_argument("metrics: empty vectors");
}

}  // namespace

double rel_l2(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
  check_pair(pred, ref);
  const double denom = ref.norm();
  if (denom == 0.0) throw std::invalid_argument("rel_l2: zero reference norm");
  return (pred - ref).norm() / denom;
}

double explained_variance(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
  check_pair(pred, ref);
  const auto n = static_cast<double>(ref.size());
  const Eigen::VectorXd resid = ref - pred;
  const double resid_mean = resid.mean();
  const double ref_mean = ref.mean();
  const double var_resid = (resid.array() - resid_mean).square().sum() / n;
  const double var_ref = (ref.array() - ref_mean).square().sum() / n;
  if (var_ref == 0.0) throw std::invalid_argument("explained_variance: zero reference variance");
  return 1.0 - var_resid / var_ref;
}

double max_error(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
  check_pair(pred, ref);
  return (pred - ref).cwiseAbs().maxCoeff();
}

double mean_abs_error(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
  check_pair(pred, ref);
  return (pred - ref).cwiseAbs().mean();
}

MetricsReport compute_metrics(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
  return {rel_l2(pred, ref), explained_variance(pred, ref), max_error(pred, ref),
          mean_abs_error(pred, ref)};
}

}  // namespace dpm
