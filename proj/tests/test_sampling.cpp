#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "doctest.h"
#include "dpm/sampling.hpp"

using namespace dpm;

TEST_CASE("time_split follows the halves-and-fifths rule") {
  const TimeSplit a = time_split(1.0);
  CHECK(a.t_train == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a.t_val == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(a.t_test == 1.0);
  const TimeSplit b = time_split(35.0);
  CHECK(b.t_train == doctest::Approx(17.5).epsilon(1e-15));
  CHECK(b.t_val == doctest::Approx(28.0).epsilon(1e-15));
  const TimeSplit c = time_split(std::numbers::pi / 2);
  CHECK(c.t_train == doctest::Approx(std::numbers::pi / 4).epsilon(1e-15));
  CHECK(c.t_val == doctest::Approx(2 * std::numbers::pi / 5).epsilon(1e-15));
  CHECK_THROWS(time_split(0.0));
}

TEST_CASE("build_train_set: tuples sit on the initial curve or the boundary") {
  const PdeSpec spec = pde_spec(PdeId::ViscousBurgers);
  const TrainSet set = build_train_set(spec, 100, 500, 42);
  CHECK(set.data_points.size() + set.periodic_pairs.size() == 100);
  CHECK(set.collocation.size() == 500);
  CHECK(set.periodic_pairs.empty());
  for (const auto& p : set.data_points) {
    if (p.t == 0.0) {
      CHECK(p.target[0] == doctest::Approx(-std::sin(std::numbers::pi * p.x)).epsilon(1e-14));
    } else {
      CHECK((p.x == -1.0 || p.x == 1.0));
      CHECK(p.target[0] == 0.0);
      CHECK(p.t <= 0.5);
    }
  }
  for (const auto& c : set.collocation) {
    CHECK(c.t <= 0.5);
    CHECK(c.t >= 0.0);
    CHECK(c.x >= -1.0);
    CHECK(c.x <= 1.0);
  }
}

TEST_CASE("build_train_set: periodic problems emit pairs, one per tuple") {
  const PdeSpec spec = pde_spec(PdeId::AllenCahn);
  const TrainSet set = build_train_set(spec, 100, 0, 7);
  CHECK(set.data_points.size() == 50);
  CHECK(set.periodic_pairs.size() == 50);
  for (const auto& pr : set.periodic_pairs) {
    CHECK(pr.x_lo == -1.0);
    CHECK(pr.x_hi == 1.0);
    CHECK(pr.t <= 0.5);
  }
  for (const auto& p : set.data_points) CHECK(p.t == 0.0);
}

TEST_CASE("build_train_set: inflow problem pins the left boundary value") {
  const PdeSpec spec = pde_spec(PdeId::InviscidBurgers);
  const TrainSet set = build_train_set(spec, 10, 0, 3);
  int boundary = 0;
  for (const auto& p : set.data_points)
    if (p.t > 0.0) {
      ++boundary;
      CHECK(p.x == 0.0);
      CHECK(p.target[0] == doctest::Approx(4.25).epsilon(1e-15));
    }
  CHECK(boundary == 5);
}

TEST_CASE("build_train_set: deterministic given seed") {
  const PdeSpec spec = pde_spec(PdeId::Nls);
  const TrainSet a = build_train_set(spec, 40, 300, 99);
  const TrainSet b = build_train_set(spec, 40, 300, 99);
  REQUIRE(a.collocation.size() == b.collocation.size());
  for (size_t i = 0; i < a.collocation.size(); ++i) {
    CHECK(a.collocation[i].x == b.collocation[i].x);
    CHECK(a.collocation[i].t == b.collocation[i].t);
  }
  REQUIRE(a.data_points.size() == b.data_points.size());
  for (size_t i = 0; i < a.data_points.size(); ++i)
    CHECK(a.data_points[i].x == b.data_points[i].x);
  const TrainSet c = build_train_set(spec, 40, 300, 100);
  bool any_diff = false;
  for (size_t i = 0; i < a.collocation.size(); ++i)
    if (a.collocation[i].x != c.collocation[i].x) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("collocation sampling is Latin-hypercube: one point per stratum per axis") {
  const PdeSpec spec = pde_spec(PdeId::ViscousBurgers);
  const int n = 1000;
  const TrainSet set = build_train_set(spec, 4, n, 123);
  const double t_train = 0.5;
  std::set<int> x_strata, t_strata;
  for (const auto& c : set.collocation) {
    x_strata.insert(static_cast<int>((c.x - spec.x_min) / (spec.x_max - spec.x_min) * n));
    t_strata.insert(static_cast<int>(c.t / t_train * n));
  }
  CHECK(x_strata.size() == n);
  CHECK(t_strata.size() == n);
}

TEST_CASE("build_eval_grid: per-problem shapes and segment windows") {
  const PdeSpec visc = pde_spec(PdeId::ViscousBurgers);
  const EvalGrid vt = build_eval_grid(visc, Segment::Test);
  CHECK(vt.xs.size() == 256);
  CHECK(vt.xs[0] == -1.0);
  CHECK(vt.xs[255] == 1.0);
  CHECK(vt.ts.size() == 20);
  CHECK(vt.ts[0] == doctest::Approx(0.81).epsilon(1e-12));
  CHECK(vt.ts[19] == doctest::Approx(1.0).epsilon(1e-12));

  const EvalGrid vv = build_eval_grid(visc, Segment::Validation);
  CHECK(vv.ts.size() == 30);
  CHECK(vv.ts[0] == doctest::Approx(0.51).epsilon(1e-12));
  CHECK(vv.ts[29] == doctest::Approx(0.8).epsilon(1e-12));

  const EvalGrid vr = build_eval_grid(visc, Segment::Train);
  CHECK(vr.ts.size() == 50);
  CHECK(vr.ts[0] == doctest::Approx(0.01).epsilon(1e-12));

  const PdeSpec inv = pde_spec(PdeId::InviscidBurgers);
  const EvalGrid it = build_eval_grid(inv, Segment::Test);
  CHECK(it.xs.size() == 512);
  CHECK(it.ts.size() == 400);
  CHECK(it.ts[0] == doctest::Approx(28.0175).epsilon(1e-12));
  CHECK(it.ts[399] == doctest::Approx(35.0).epsilon(1e-12));

  const PdeSpec nls = pde_spec(PdeId::Nls);
  const EvalGrid nt = build_eval_grid(nls, Segment::Test);
  CHECK(nt.xs.size() == 256);
  CHECK(nt.ts.size() == 20);
  CHECK(nt.ts[19] == doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));

  const PdeSpec ac = pde_spec(PdeId::AllenCahn);
  const EvalGrid av = build_eval_grid(ac, Segment::Validation);
  CHECK(av.ts.size() == 60);
  for (Eigen::Index i = 0; i < av.ts.size(); ++i) {
    CHECK(av.ts[i] > 0.5);
    CHECK(av.ts[i] <= 0.8 + 1e-12);
  }
}

TEST_CASE("segment windows never overlap") {
  for (const auto& spec : catalog()) {
    const EvalGrid train = build_eval_grid(spec, Segment::Train);
    const EvalGrid val = build_eval_grid(spec, Segment::Validation);
    const EvalGrid test = build_eval_grid(spec, Segment::Test);
    const TimeSplit split = time_split(spec.final_time);
    CHECK(train.ts.maxCoeff() <= split.t_train + 1e-12);
    CHECK(val.ts.minCoeff() > split.t_train);
    CHECK(val.ts.maxCoeff() <= split.t_val + 1e-12);
    CHECK(test.ts.minCoeff() > split.t_val);
    CHECK(test.ts.maxCoeff() <= split.t_test + 1e-12);
  }
}

TEST_CASE("train set CSV export carries the header and all rows") {
  const PdeSpec spec = pde_spec(PdeId::Nls);
  const TrainSet set = build_train_set(spec, 10, 20, 1);
  const auto path = std::filesystem::temp_directory_path() / "dpm_train_set.csv";
  export_train_set_csv(set, path);
  std::ifstream f(path);
  std::string header;
  std::getline(f, header);
  CHECK(header == "x,t,target_0,target_1");
  int rows = 0;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) ++rows;
  CHECK(rows == static_cast<int>(set.data_points.size() + 2 * set.periodic_pairs.size() +
                                 set.collocation.size()));
  std::filesystem::remove(path);
}
