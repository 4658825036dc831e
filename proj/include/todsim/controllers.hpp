#pragma once

#include <vector>

#include "todsim/dynamics.hpp"
#include "todsim/observers.hpp"

namespace todsim {

/// Position error against the virtual system and the filtered sync variable r = qd + lambda e.
struct SyncVariables {
  JointVector e = JointVector::Zero();
  JointVector ed = JointVector::Zero();
  JointVector r = JointVector::Zero();
};

/// Static control-update trigger (event-triggered control scheme).
struct ControlTriggerParams {
  double gamma = 10.0;
  double epsilon = 0.1;
  double nu = 0.1;
};

/// Static sampling trigger (event-triggered communication scheme).
struct CommTriggerParams {
  double c = 0.02;
  double epsilon = 1e-4;
  double nu = 0.1;
};

struct ControllerState {
  Eigen::VectorXd theta_hat;
  Eigen::MatrixXd Gamma;
  double kappa = 20.0;
  double lambda = 5.0;
  ControlTriggerParams control_trigger;
  CommTriggerParams comm_trigger;

  // Values captured at the latest control trigger.
  JointVector held_r = JointVector::Zero();
  JointVector held_Ytheta = JointVector::Zero();
  std::vector<double> events;

  /// Gamma symmetric PD, kappa/lambda positive, trigger constants positive, kappa > gamma.
  void validate() const;
};

struct TriggerDecision {
  bool fire = false;
  double value = 0.0;      // trigger function; fires iff value >= 0
  double deviation = 0.0;  // |rho| + kappa |eps| (control) or |delta|^2 (communication)
  double threshold = 0.0;
};

SyncVariables sync_vars(double lambda, const PlantState& plant, const ObserverState& obs);

/// Y(q, qd, lambda ed, lambda e), so that Y theta = lambda M ed + lambda C e - G.
Regressor control_regressor(const RobotModel& model, const PlantState& plant, const SyncVariables& sync, double lambda);

/// tau = -kappa r(t_k) - Y(t_k) theta_hat(t_k): constant between control triggers.
JointVector torque_scheme_a(const ControllerState& ctrl);

/// tau = -kappa r - Y theta_hat, evaluated on live signals.
JointVector torque_scheme_b(const ControllerState& ctrl, const SyncVariables& sync, const Regressor& Y);

Eigen::VectorXd adaptation_rate(const Eigen::MatrixXd& Gamma, const Regressor& Y, const JointVector& r);

/// Explicit Euler step of theta_hat' = Gamma Y^T r.
void adapt_step(ControllerState& ctrl, const Regressor& Y, const JointVector& r, double dt);

/// iota = |Y theta_hat - held_Ytheta| + kappa |r - held_r| - (gamma/2)|r| - epsilon e^{-nu t}.
TriggerDecision evaluate_control_trigger(const ControllerState& ctrl, const JointVector& Ytheta, const JointVector& r,
                                         double t);

/// Evaluates the control trigger and, when it fires, captures the new held values and logs t.
TriggerDecision trigger_scheme_a(ControllerState& ctrl, const Regressor& Y, const SyncVariables& sync, double t);

/// Unconditionally captures held values (used for the initial update at t = 0).
void capture_control_update(ControllerState& ctrl, const JointVector& Ytheta, const JointVector& r, double t);

/// iota' = |x - last_sample|^2 - (2 c (1 - p)/beta) |xd|^2 - epsilon' e^{-nu' t}.
TriggerDecision trigger_scheme_b(const CommTriggerParams& params, double beta, const ObserverState& obs,
                                 const JointVector& last_sample, double t, double p_channel);

/// Minimum dwell epsilon e^{-nu t} / q_hat guaranteed between control triggers.
/// Throws std::invalid_argument if q_hat <= 0.
double zeno_bound(double epsilon, double nu, double q_hat, double t);

}  // namespace todsim
