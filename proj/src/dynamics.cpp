#include "todsim/dynamics.hpp"

#include <cmath>

namespace todsim {

namespace {

struct InertialParameters {
  double t1, t2, t3;
};

InertialParameters inertial(const RobotModel& m) {
  return {m.m1 * m.lc1 * m.lc1 + m.m2 * m.l1 * m.l1 + m.I1, m.m2 * m.lc2 * m.lc2 + m.I2, m.m2 * m.l1 * m.lc2};
}

bool all_finite(const JointVector& v) { return std::isfinite(v[0]) && std::isfinite(v[1]); }

}  // namespace

void RobotModel::validate() const {
  const double positive[] = {l1, l2, m1, m2, lc1, lc2, I1, I2};
  for (double v : positive) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("robot model: lengths, masses and inertias must be positive");
    }
  }
  if (!(g >= 0.0) || !std::isfinite(g)) {
    throw std::invalid_argument("robot model: gravity constant must be non-negative");
  }
}

Eigen::VectorXd RobotModel::true_parameters() const {
  const auto p = inertial(*this);
  Eigen::VectorXd theta(parameter_count());
  theta.head<3>() << p.t1, p.t2, p.t3;
  if (g > 0.0) {
    theta[3] = g * (m1 * lc1 + m2 * l1);
    theta[4] = g * m2 * lc2;
  }
  return theta;
}

// Both eigenvalues of M(q) depend on cos(q2) only. det(M) >= t1 t2 - t3^2 and
// tr(M) <= t1 + 2 t2 + 2 t3; since lambda_min = det / lambda_max >= det / tr
// the ratio of the two extremes is a valid lower bound.
double RobotModel::inertia_lower_bound() const {
  const auto p = inertial(*this);
  return (p.t1 * p.t2 - p.t3 * p.t3) / (p.t1 + 2.0 * p.t2 + 2.0 * p.t3);
}

double RobotModel::inertia_upper_bound() const {
  const auto p = inertial(*this);
  return p.t1 + 2.0 * p.t2 + 2.0 * p.t3;
}

// C(q, x) = t3 sin(q2) [[-x2, -(x1 + x2)], [x1, 0]]; its Frobenius norm is at most sqrt(3) |x|.
double RobotModel::coriolis_bound() const { return std::sqrt(3.0) * inertial(*this).t3; }

double RobotModel::gravity_bound() const { return g * (m1 * lc1 + m2 * (l1 + lc2)) + g * m2 * lc2; }

JointMatrix mass_matrix(const RobotModel& model, const JointVector& q) {
  const auto p = inertial(model);
  const double c2 = std::cos(q[1]);
  JointMatrix M;
  M(0, 0) = p.t1 + p.t2 + 2.0 * p.t3 * c2;
  M(0, 1) = p.t2 + p.t3 * c2;
  M(1, 0) = M(0, 1);
  M(1, 1) = p.t2;
  return M;
}

JointMatrix coriolis_matrix(const RobotModel& model, const JointVector& q, const JointVector& qd) {
  const double h = -inertial(model).t3 * std::sin(q[1]);
  JointMatrix C;
  C(0, 0) = h * qd[1];
  C(0, 1) = h * (qd[0] + qd[1]);
  C(1, 0) = -h * qd[0];
  C(1, 1) = 0.0;
  return C;
}

JointVector gravity_vector(const RobotModel& model, const JointVector& q) {
  if (model.g == 0.0) return JointVector::Zero();
  const double c1 = std::cos(q[0]);
  const double c12 = std::cos(q[0] + q[1]);
  const double a = model.g * (model.m1 * model.lc1 + model.m2 * model.l1);
  const double b = model.g * model.m2 * model.lc2;
  return JointVector(a * c1 + b * c12, b * c12);
}

Regressor regressor(const RobotModel& model, const JointVector& q, const JointVector& qd,
                    const JointVector& x, const JointVector& y) {
  Regressor Y = Regressor::Zero(2, model.parameter_count());
  const double c2 = std::cos(q[1]);
  const double s2 = std::sin(q[1]);

  Y(0, 0) = x[0];
  Y(0, 1) = x[0] + x[1];
  Y(0, 2) = c2 * (2.0 * x[0] + x[1]) - s2 * (qd[1] * y[0] + (qd[0] + qd[1]) * y[1]);
  Y(1, 1) = x[0] + x[1];
  Y(1, 2) = c2 * x[0] + s2 * qd[0] * y[0];

  if (model.g > 0.0) {
    const double c1 = std::cos(q[0]);
    const double c12 = std::cos(q[0] + q[1]);
    Y(0, 3) = -c1;
    Y(0, 4) = -c12;
    Y(1, 4) = -c12;
  }
  return Y;
}

JointVector forward_dynamics(const RobotModel& model, const PlantState& state, const JointVector& tau,
                             const JointVector& f) {
  const JointMatrix M = mass_matrix(model, state.q);
  const JointVector rhs = tau + f - coriolis_matrix(model, state.q, state.qd) * state.qd - gravity_vector(model, state.q);
  const JointVector qdd = M.llt().solve(rhs);
  if (!all_finite(qdd)) throw NonFiniteError(0.0, "qdd");
  return qdd;
}

double kinetic_energy(const RobotModel& model, const PlantState& state) {
  return 0.5 * state.qd.dot(mass_matrix(model, state.q) * state.qd);
}

Eigen::Vector2d end_point(const RobotModel& model, const JointVector& q) {
  const double a = q[0];
  const double b = q[0] + q[1];
  return {model.l1 * std::cos(a) + model.l2 * std::cos(b), model.l1 * std::sin(a) + model.l2 * std::sin(b)};
}

Eigen::Matrix2d end_point_jacobian(const RobotModel& model, const JointVector& q) {
  const double a = q[0];
  const double b = q[0] + q[1];
  Eigen::Matrix2d J;
  J(0, 0) = -model.l1 * std::sin(a) - model.l2 * std::sin(b);
  J(0, 1) = -model.l2 * std::sin(b);
  J(1, 0) = model.l1 * std::cos(a) + model.l2 * std::cos(b);
  J(1, 1) = model.l2 * std::cos(b);
  return J;
}

}  // namespace todsim
