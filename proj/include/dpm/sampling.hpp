#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dpm/pde.hpp"

namespace dpm {

struct LabeledPoint {
  double x;
  double t;
  Eigen::VectorXd target;
};

/// Periodic constraint u(x_lo,t)=u(x_hi,t), u_x(x_lo,t)=u_x(x_hi,t).
struct PeriodicPair {
  double x_lo;
  double x_hi;
  double t;
};

struct CollocationPoint {
  double x;
  double t;
};

/// Training data: labeled initial/boundary tuples plus unlabeled collocation
/// points. |data_points| + |periodic_pairs| = N_u, |collocation| = N_f.
struct TrainSet {
  std::vector<LabeledPoint> data_points;
  std::vector<PeriodicPair> periodic_pairs;
  std::vector<CollocationPoint> collocation;
};

enum class Segment { Train, Validation, Test };

std::string segment_name(Segment s);
Segment segment_from_name(const std::string& name);

/// Uniform space-time evaluation grid restricted to one time segment.
struct EvalGrid {
  Eigen::VectorXd xs;
  Eigen::VectorXd ts;
  Segment segment;
};

struct TimeSplit {
  double t_train;
  double t_val;
  double t_test;
};

/// (T/2, 4T/5, T).
TimeSplit time_split(double final_time);

/// N_u initial/boundary tuples (half on the t=0 curve, half on the boundary
/// at random t <= T_train; periodic problems turn the boundary half into
/// pairs) plus N_f Latin-hypercube collocation points over the training
/// window. Deterministic given seed.
TrainSet build_train_set(const PdeSpec& spec, int n_u, int n_f, std::uint64_t seed);

/// Per-problem evaluation grid: the spatial point count and temporal step are
/// fixed per problem; time samples are the step multiples strictly inside the
/// segment, inclusive of its right endpoint.
EvalGrid build_eval_grid(const PdeSpec& spec, Segment segment);

int grid_spatial_points(PdeId id);
double grid_time_step(PdeId id);

/// CSV with header x,t,target_0[,target_1]; periodic pairs emit two rows per
/// pair, collocation rows leave their targets empty.
void export_train_set_csv(const TrainSet& set, const std::filesystem::path& path);

}  // namespace dpm
