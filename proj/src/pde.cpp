#include "dpm/pde.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dpm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kViscosity = 0.01 / kPi;

void check_channels(const PdeSpec& spec, const Jet& jet) {
  if (jet.u.size() != spec.output_channels)
    throw std::invalid_argument("residual: jet channel count does not match pde");
}

}  // namespace

std::string pde_name(PdeId id) {
  switch (id) {
    case PdeId::ViscousBurgers: return "viscous-burgers";
    case PdeId::InviscidBurgers: return "inviscid-burgers";
    case PdeId::Nls: return "nls";
    case PdeId::AllenCahn: return "allen-cahn";
  }
  throw std::invalid_argument("pde_name: unknown id");
}

PdeId pde_from_name(const std::string& name) {
  if (name == "viscous-burgers") return PdeId::ViscousBurgers;
  if (name == "inviscid-burgers") return PdeId::InviscidBurgers;
  if (name == "nls") return PdeId::Nls;
  if (name == "allen-cahn") return PdeId::AllenCahn;
  throw std::invalid_argument("unknown pde id: " + name);
}

std::vector<PdeSpec> catalog() {
  return {pde_spec(PdeId::ViscousBurgers), pde_spec(PdeId::InviscidBurgers),
          pde_spec(PdeId::Nls), pde_spec(PdeId::AllenCahn)};
}

PdeSpec pde_spec(PdeId id) {
  switch (id) {
    case PdeId::ViscousBurgers:
      return {id, -1.0, 1.0, 1.0, 1, BoundaryKind::DirichletBoth};
    case PdeId::InviscidBurgers:
      return {id, 0.0, 100.0, 35.0, 1, BoundaryKind::InflowLeft};
    case PdeId::Nls:
      return {id, -5.0, 5.0, kPi / 2.0, 2, BoundaryKind::Periodic};
    case PdeId::AllenCahn:
      return {id, -1.0, 1.0, 1.0, 1, BoundaryKind::Periodic};
  }
  throw std::invalid_argument("pde_spec: unknown id");
}

Eigen::VectorXd residual(const PdeSpec& spec, double x, double /*t*/, const Jet& jet) {
  check_channels(spec, jet);
  Eigen::VectorXd r(spec.output_channels);
  switch (spec.id) {
    case PdeId::ViscousBurgers:
      r[0] = jet.du_dt[0] + jet.u[0] * jet.du_dx[0] - kViscosity * jet.d2u_dx2[0];
      break;
    case PdeId::InviscidBurgers:
      r[0] = jet.du_dt[0] + jet.u[0] * jet.du_dx[0] - 0.02 * std::exp(0.015 * x);
      break;
    case PdeId::Nls: {
      // f = u_t - 0.5i u_xx - i|u|^2 u with u = u0 + i u1:
      //   Re f = u0_t + 0.5 u1_xx + |u|^2 u1
      //   Im f = u1_t - 0.5 u0_xx - |u|^2 u0
      const double mag2 = jet.u[0] * jet.u[0] + jet.u[1] * jet.u[1];
      r[0] = jet.du_dt[0] + 0.5 * jet.d2u_dx2[1] + mag2 * jet.u[1];
      r[1] = jet.du_dt[1] - 0.5 * jet.d2u_dx2[0] - mag2 * jet.u[0];
      break;
    }
    case PdeId::AllenCahn: {
      const double u = jet.u[0];
      r[0] = jet.du_dt[0] - 0.0001 * jet.d2u_dx2[0] + 5.0 * u * u * u - 5.0 * u;
      break;
    }
  }
  return r;
}

JetAdjoint residual_pullback(const PdeSpec& spec, double /*x*/, double /*t*/,
                             const Jet& jet, const Eigen::VectorXd& res_adjoint) {
  check_channels(spec, jet);
  if (res_adjoint.size() != spec.output_channels)
    throw std::invalid_argument("residual_pullback: adjoint channel count mismatch");
  JetAdjoint a;
  const int c = spec.output_channels;
  a.u = Eigen::VectorXd::Zero(c);
  a.du_dx = Eigen::VectorXd::Zero(c);
  a.du_dt = Eigen::VectorXd::Zero(c);
  a.d2u_dx2 = Eigen::VectorXd::Zero(c);
  switch (spec.id) {
    case PdeId::ViscousBurgers:
      a.u[0] = res_adjoint[0] * jet.du_dx[0];
      a.du_dx[0] = res_adjoint[0] * jet.u[0];
      a.du_dt[0] = res_adjoint[0];
      a.d2u_dx2[0] = -res_adjoint[0] * kViscosity;
      break;
    case PdeId::InviscidBurgers:
      a.u[0] = res_adjoint[0] * jet.du_dx[0];
      a.du_dx[0] = res_adjoint[0] * jet.u[0];
      a.du_dt[0] = res_adjoint[0];
      break;
    case PdeId::Nls: {
      const double u0 = jet.u[0], u1 = jet.u[1];
      const double g0 = res_adjoint[0], g1 = res_adjoint[1];
      // From r0 = u0_t + 0.5 u1_xx + (u0^2+u1^2) u1,
      //      r1 = u1_t - 0.5 u0_xx - (u0^2+u1^2) u0.
      a.u[0] = g0 * (2.0 * u0 * u1) - g1 * (3.0 * u0 * u0 + u1 * u1);
      a.u[1] = g0 * (u0 * u0 + 3.0 * u1 * u1) - g1 * (2.0 * u0 * u1);
      a.du_dt[0] = g0;
      a.du_dt[1] = g1;
      a.d2u_dx2[0] = -0.5 * g1;
      a.d2u_dx2[1] = 0.5 * g0;
      break;
    }
    case PdeId::AllenCahn: {
      const double u = jet.u[0];
      a.u[0] = res_adjoint[0] * (15.0 * u * u - 5.0);
      a.du_dt[0] = res_adjoint[0];
      a.d2u_dx2[0] = -res_adjoint[0] * 0.0001;
      break;
    }
  }
  return a;
}

Eigen::MatrixXd residual_batch(const PdeSpec& spec, const Eigen::VectorXd& xs,
                               const Eigen::VectorXd& /*ts*/, const JetBatch& jets) {
  if (jets.u.rows() != spec.output_channels)
    throw std::invalid_argument("residual_batch: jet channel count does not match pde");
  Eigen::MatrixXd r(spec.output_channels, jets.batch());
  switch (spec.id) {
    case PdeId::ViscousBurgers:
      r.row(0) = jets.du_dt.row(0).array() +
                 jets.u.row(0).array() * jets.du_dx.row(0).array() -
                 kViscosity * jets.d2u_dx2.row(0).array();
      break;
    case PdeId::InviscidBurgers:
      r.row(0) = jets.du_dt.row(0).array() +
                 jets.u.row(0).array() * jets.du_dx.row(0).array() -
                 0.02 * (0.015 * xs.transpose().array()).exp();
      break;
    case PdeId::Nls: {
      const auto u0 = jets.u.row(0).array(), u1 = jets.u.row(1).array();
      const Eigen::ArrayXXd mag2 = u0 * u0 + u1 * u1;
      r.row(0) = jets.du_dt.row(0).array() + 0.5 * jets.d2u_dx2.row(1).array() +
                 mag2 * u1;
      r.row(1) = jets.du_dt.row(1).array() - 0.5 * jets.d2u_dx2.row(0).array() -
                 mag2 * u0;
      break;
    }
    case PdeId::AllenCahn: {
      const auto u = jets.u.row(0).array();
      r.row(0) = jets.du_dt.row(0).array() - 0.0001 * jets.d2u_dx2.row(0).array() +
                 5.0 * u * u * u - 5.0 * u;
      break;
    }
  }
  return r;
}

void residual_pullback_batch(const PdeSpec& spec, const Eigen::VectorXd& /*xs*/,
                             const JetBatch& jets, const Eigen::MatrixXd& res_adjoint,
                             JetBatch& out) {
  const Eigen::Index n = jets.batch();
  const int c = spec.output_channels;
  if (res_adjoint.rows() != c || res_adjoint.cols() != n)
    throw std::invalid_argument("residual_pullback_batch: adjoint shape mismatch");
  out.u.setZero(c, n);
  out.du_dx.setZero(c, n);
  out.du_dt.setZero(c, n);
  out.d2u_dx2.setZero(c, n);
  switch (spec.id) {
    case PdeId::ViscousBurgers:
      out.u.row(0) = res_adjoint.row(0).array() * jets.du_dx.row(0).array();
      out.du_dx.row(0) = res_adjoint.row(0).array() * jets.u.row(0).array();
      out.du_dt.row(0) = res_adjoint.row(0);
      out.d2u_dx2.row(0) = -kViscosity * res_adjoint.row(0).array();
      break;
    case PdeId::InviscidBurgers:
      out.u.row(0) = res_adjoint.row(0).array() * jets.du_dx.row(0).array();
      out.du_dx.row(0) = res_adjoint.row(0).array() * jets.u.row(0).array();
      out.du_dt.row(0) = res_adjoint.row(0);
      break;
    case PdeId::Nls: {
      const auto u0 = jets.u.row(0).array(), u1 = jets.u.row(1).array();
      const auto g0 = res_adjoint.row(0).array(), g1 = res_adjoint.row(1).array();
      out.u.row(0) = g0 * (2.0 * u0 * u1) - g1 * (3.0 * u0 * u0 + u1 * u1);
      out.u.row(1) = g0 * (u0 * u0 + 3.0 * u1 * u1) - g1 * (2.0 * u0 * u1);
      out.du_dt.row(0) = res_adjoint.row(0);
      out.du_dt.row(1) = res_adjoint.row(1);
      out.d2u_dx2.row(0) = -0.5 * g1;
      out.d2u_dx2.row(1) = 0.5 * g0;
      break;
    }
    case PdeId::AllenCahn: {
      const auto u = jets.u.row(0).array();
      out.u.row(0) = res_adjoint.row(0).array() * (15.0 * u * u - 5.0);
      out.du_dt.row(0) = res_adjoint.row(0);
      out.d2u_dx2.row(0) = -0.0001 * res_adjoint.row(0).array();
      break;
    }
  }
}

Eigen::VectorXd initial_condition(const PdeSpec& spec, double x) {
  if (x < spec.x_min - 1e-12 || x > spec.x_max + 1e-12)
    throw std::invalid_argument("initial_condition: x outside spatial domain");
  Eigen::VectorXd u(spec.output_channels);
  switch (spec.id) {
    case PdeId::ViscousBurgers:
      u[0] = -std::sin(kPi * x);
      break;
    case PdeId::InviscidBurgers:
      u[0] = 1.0;
      break;
    case PdeId::Nls:
      u[0] = 2.0 / std::cosh(x);
      u[1] = 0.0;
      break;
    case PdeId::AllenCahn:
      u[0] = x * x * std::cos(kPi * x);
      break;
  }
  return u;
}

BoundaryTargets boundary_points(const PdeSpec& spec, double t) {
  if (t < -1e-12 || t > spec.final_time + 1e-12)
    throw std::invalid_argument("boundary_points: t outside [0, T]");
  BoundaryTargets bt;
  switch (spec.boundary_kind) {
    case BoundaryKind::DirichletBoth:
      bt.values.push_back({spec.x_min, Eigen::VectorXd::Zero(1)});
      bt.values.push_back({spec.x_max, Eigen::VectorXd::Zero(1)});
      break;
    case BoundaryKind::InflowLeft: {
      Eigen::VectorXd v(1);
      v[0] = 4.25;
      bt.values.push_back({spec.x_min, v});
      break;
    }
    case BoundaryKind::Periodic:
      bt.periodic_pair = true;
      break;
  }
  return bt;
}

}  // namespace dpm
