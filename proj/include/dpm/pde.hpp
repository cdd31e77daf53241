#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dpm/net.hpp"

namespace dpm {

enum class PdeId { ViscousBurgers, InviscidBurgers, Nls, AllenCahn };

enum class BoundaryKind { DirichletBoth, InflowLeft, Periodic };

/// One benchmark problem: the governing equation u_t + N(u) = 0 on
/// [x_min, x_max] x [0, final_time] with its initial and boundary data.
struct PdeSpec {
  PdeId id;
  double x_min;
  double x_max;
  double final_time;
  int output_channels;  // 2 for the complex-valued problem, else 1
  BoundaryKind boundary_kind;
};

/// CLI identifiers: "viscous-burgers", "inviscid-burgers", "nls", "allen-cahn".
std::string pde_name(PdeId id);
PdeId pde_from_name(const std::string& name);

/// The four benchmark problems.
std::vector<PdeSpec> catalog();
PdeSpec pde_spec(PdeId id);

/// Governing-equation residual f(x,t) evaluated from a jet, one entry per
/// output channel. The complex problem returns (Re f, Im f) computed from the
/// two real channels u = u0 + i*u1.
Eigen::VectorXd residual(const PdeSpec& spec, double x, double t, const Jet& jet);

/// Partial derivatives of each residual channel with respect to the jet
/// fields, contracted against an adjoint weight per channel. Feeds the
/// parameter-gradient pass for the residual loss.
struct JetAdjoint {
  Eigen::VectorXd u, du_dx, du_dt, d2u_dx2;  // one entry per output channel
};
JetAdjoint residual_pullback(const PdeSpec& spec, double x, double t,
                             const Jet& jet, const Eigen::VectorXd& res_adjoint);

/// Batched twins of residual/residual_pullback over jet columns, the training
/// hot path. Bit-identical to the scalar forms.
Eigen::MatrixXd residual_batch(const PdeSpec& spec, const Eigen::VectorXd& xs,
                               const Eigen::VectorXd& ts, const JetBatch& jets);
void residual_pullback_batch(const PdeSpec& spec, const Eigen::VectorXd& xs,
                             const JetBatch& jets, const Eigen::MatrixXd& res_adjoint,
                             JetBatch& out);

/// u(x, 0) per channel. Throws if x lies outside the spatial domain.
Eigen::VectorXd initial_condition(const PdeSpec& spec, double x);

/// Boundary data at one time. Dirichlet/inflow problems pin values at fixed
/// points; periodic problems constrain u and u_x to match across the ends.
struct BoundaryTargets {
  struct ValueTarget {
    double x;
    Eigen::VectorXd value;
  };
  std::vector<ValueTarget> values;
  bool periodic_pair = false;
};
BoundaryTargets boundary_points(const PdeSpec& spec, double t);

}  // namespace dpm
