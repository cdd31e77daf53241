#include "dpm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace dpm {

namespace {

double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// One stratum per point and per coordinate, shuffled independently.
std::vector<double> latin_hypercube_axis(int n, double lo, double hi,
                                         std::mt19937_64& gen) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(gen() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i)
    vals[i] = lo + (perm[i] + uniform01(gen)) / n * (hi - lo);
  return vals;
}

}  // namespace

std::string segment_name(Segment s) {
  switch (s) {
    case Segment::Train: return "train";
    case Segment::Validation: return "validation";
    case Segment::Test: return "test";
  }
  throw std::invalid_argument("segment_name: unknown segment");
}

Segment segment_from_name(const std::string& name) {
  if (name == "train") return Segment::Train;
  if (name == "validation") return Segment::Validation;
  if (name == "test") return Segment::Test;
  throw std::invalid_argument("unknown segment: " + name);
}

TimeSplit time_split(double final_time) {
  if (final_time <= 0.0) throw std::invalid_argument("time_split: T must be positive");
  return {final_time / 2.0, 4.0 * final_time / 5.0, final_time};
}

TrainSet build_train_set(const PdeSpec& spec, int n_u, int n_f, std::uint64_t seed) {
  if (n_u < 2) throw std::invalid_argument("build_train_set: N_u must be >= 2");
  if (n_f < 0) throw std::invalid_argument("build_train_set: N_f must be >= 0");
  const double t_train = time_split(spec.final_time).t_train;
  std::mt19937_64 gen(seed);

  TrainSet set;
  const int n_initial = n_u - n_u / 2;
  const int n_boundary = n_u / 2;

  for (int i = 0; i < n_initial; ++i) {
    const double x = spec.x_min + uniform01(gen) * (spec.x_max - spec.x_min);
    set.data_points.push_back({x, 0.0, initial_condition(spec, x)});
  }

  for (int i = 0; i < n_boundary; ++i) {
    const double t = uniform01(gen) * t_train;
    const BoundaryTargets bt = boundary_points(spec, t);
    if (bt.periodic_pair) {
      set.periodic_pairs.push_back({spec.x_min, spec.x_max, t});
    } else {
      // Even split across boundary sides.
      const auto& v = bt.values[i % bt.values.size()];
      set.data_points.push_back({v.x, t, v.value});
    }
  }

  if (n_f > 0) {
    const auto xs = latin_hypercube_axis(n_f, spec.x_min, spec.x_max, gen);
    const auto ts = latin_hypercube_axis(n_f, 0.0, t_train, gen);
    set.collocation.reserve(n_f);
    for (int i = 0; i < n_f; ++i) set.collocation.push_back({xs[i], ts[i]});
  }
  return set;
}

int grid_spatial_points(PdeId id) {
  switch (id) {
    case PdeId::ViscousBurgers: return 256;
    case PdeId::InviscidBurgers: return 512;
    case PdeId::Nls: return 256;
    case PdeId::AllenCahn: return 256;
  }
  throw std::invalid_argument("grid_spatial_points: unknown id");
}

double grid_time_step(PdeId id) {
  switch (id) {
    case PdeId::ViscousBurgers: return 0.01;
    case PdeId::InviscidBurgers: return 0.0175;
    case PdeId::Nls: return 0.01 * std::numbers::pi / 2.0;
    case PdeId::AllenCahn: return 0.005;
  }
  throw std::invalid_argument("grid_time_step: unknown id");
}

EvalGrid build_eval_grid(const PdeSpec& spec, Segment segment) {
  const TimeSplit split = time_split(spec.final_time);
  double lo = 0.0, hi = split.t_train;
  if (segment == Segment::Validation) {
    lo = split.t_train;
    hi = split.t_val;
  } else if (segment == Segment::Test) {
    lo = split.t_val;
    hi = split.t_test;
  }

  EvalGrid grid;
  grid.segment = segment;

  const int nx = grid_spatial_points(spec.id);
  grid.xs.resize(nx);
  for (int i = 0; i < nx; ++i)
    grid.xs[i] = spec.x_min + (spec.x_max - spec.x_min) * i / double(nx - 1);

  // Multiples of the step strictly past lo, up to and including hi when hi
  // lands on the grid. The guard absorbs cases like T_val/dt = 1600 exactly.
  const double dt = grid_time_step(spec.id);
  const auto k_lo = static_cast<long>(std::floor(lo / dt * (1.0 + 1e-12))) + 1;
  const auto k_hi = static_cast<long>(std::floor(hi / dt * (1.0 + 1e-12)));
  grid.ts.resize(std::max(0L, k_hi - k_lo + 1));
  for (long k = k_lo; k <= k_hi; ++k) grid.ts[k - k_lo] = k * dt;
  return grid;
}

void export_train_set_csv(const TrainSet& set, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("export_train_set_csv: cannot open " + path.string());
  const int channels =
      set.data_points.empty() ? 1 : static_cast<int>(set.data_points[0].target.size());
  f << "x,t,target_0";
  if (channels > 1) f << ",target_1";
  f << "\n";
  f.precision(17);
  auto write_targets = [&](const Eigen::VectorXd& v) {
    for (int c = 0; c < channels; ++c) f << "," << v[c];
  };
  for (const auto& p : set.data_points) {
    f << p.x << "," << p.t;
    write_targets(p.target);
    f << "\n";
  }
  for (const auto& p : set.periodic_pairs) {
    f << p.x_lo << "," << p.t;
    for (int c = 0; c < channels; ++c) f << ",";
    f << "\n" << p.x_hi << "," << p.t;
    for (int c = 0; c < channels; ++c) f << ",";
    f << "\n";
  }
  for (const auto& p : set.collocation) {
    f << p.x << "," << p.t;
    for (int c = 0; c < channels; ++c) f << ",";
    f << "\n";
  }
}

}  // namespace dpm
