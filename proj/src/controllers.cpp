#include "todsim/controllers.hpp"

#include <cmath>
#include <stdexcept>

namespace todsim {

void ControllerState::validate() const {
  if (!(kappa > 0.0) || !(lambda > 0.0)) throw std::invalid_argument("controller: kappa and lambda must be positive");
  if (Gamma.rows() != Gamma.cols() || Gamma.rows() != theta_hat.size()) {
    throw std::invalid_argument("controller: Gamma must be square and match the parameter count");
  }
  if (!Gamma.isApprox(Gamma.transpose(), 1e-12)) throw std::invalid_argument("controller: Gamma must be symmetric");
  if (Gamma.llt().info() != Eigen::Success) throw std::invalid_argument("controller: Gamma must be positive definite");
  if (!theta_hat.allFinite()) throw std::invalid_argument("controller: theta_hat must be finite");
  const auto& a = control_trigger;
  if (!(a.gamma > 0.0) || !(a.epsilon > 0.0) || !(a.nu > 0.0)) {
    throw std::invalid_argument("controller: control trigger constants must be positive");
  }
  if (!(kappa > a.gamma)) throw std::invalid_argument("controller: kappa must exceed the trigger gain gamma");
  const auto& b = comm_trigger;
  if (!(b.c > 0.0) || !(b.epsilon > 0.0) || !(b.nu > 0.0)) {
    throw std::invalid_argument("controller: communication trigger constants must be positive");
  }
}

SyncVariables sync_vars(double lambda, const PlantState& plant, const ObserverState& obs) {
  SyncVariables s;
  s.e = plant.q - obs.x;
  s.ed = plant.qd - obs.xd;
  s.r = plant.qd + lambda * s.e;
  return s;
}

Regressor control_regressor(const RobotModel& model, const PlantState& plant, const SyncVariables& sync, double lambda) {
  return regressor(model, plant.q, plant.qd, lambda * sync.ed, lambda * sync.e);
}

JointVector torque_scheme_a(const ControllerState& ctrl) { return -ctrl.kappa * ctrl.held_r - ctrl.held_Ytheta; }

JointVector torque_scheme_b(const ControllerState& ctrl, const SyncVariables& sync, const Regressor& Y) {
  return -ctrl.kappa * sync.r - Y * ctrl.theta_hat;
}

Eigen::VectorXd adaptation_rate(const Eigen::MatrixXd& Gamma, const Regressor& Y, const JointVector& r) {
  return Gamma * (Y.transpose() * r);
}

void adapt_step(ControllerState& ctrl, const Regressor& Y, const JointVector& r, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("adapt_step: dt must be positive");
  ctrl.theta_hat += dt * adaptation_rate(ctrl.Gamma, Y, r);
}

TriggerDecision evaluate_control_trigger(const ControllerState& ctrl, const JointVector& Ytheta, const JointVector& r,
                                         double t) {
  const auto& p = ctrl.control_trigger;
  TriggerDecision d;
  d.deviation = (Ytheta - ctrl.held_Ytheta).norm() + ctrl.kappa * (r - ctrl.held_r).norm();
  d.threshold = 0.5 * p.gamma * r.norm() + p.epsilon * std::exp(-p.nu * t);
  d.value = d.deviation - d.threshold;
  d.fire = d.value >= 0.0;
  return d;
}

void capture_control_update(ControllerState& ctrl, const JointVector& Ytheta, const JointVector& r, double t) {
  ctrl.held_r = r;
  ctrl.held_Ytheta = Ytheta;
  ctrl.events.push_back(t);
}

TriggerDecision trigger_scheme_a(ControllerState& ctrl, const Regressor& Y, const SyncVariables& sync, double t) {
  const JointVector Ytheta = Y * ctrl.theta_hat;
  const auto d = evaluate_control_trigger(ctrl, Ytheta, sync.r, t);
  if (d.fire) capture_control_update(ctrl, Ytheta, sync.r, t);
  return d;
}

TriggerDecision trigger_scheme_b(const CommTriggerParams& params, double beta, const ObserverState& obs,
                                 const JointVector& last_sample, double t, double p_channel) {
  TriggerDecision d;
  d.deviation = (obs.x - last_sample).squaredNorm();
  d.threshold = 2.0 * params.c * (1.0 - p_channel) / beta * obs.xd.squaredNorm() + params.epsilon * std::exp(-params.nu * t);
  d.value = d.deviation - d.threshold;
  d.fire = d.value >= 0.0;
  return d;
}

double zeno_bound(double epsilon, double nu, double q_hat, double t) {
  if (!(q_hat > 0.0)) throw std::invalid_argument("zeno_bound: derivative bound must be positive");
  return epsilon * std::exp(-nu * t) / q_hat;
}

}  // namespace todsim
