#pragma once

#include <span>

#include "todsim/dynamics.hpp"

namespace todsim {

/// Output x and rate xd of a manipulator's virtual reference system.
struct ObserverState {
  JointVector x = JointVector::Zero();
  JointVector xd = JointVector::Zero();
};

/// alpha damps the virtual velocity, beta couples to the remote side, kappa pulls
/// toward the local plant (shared with the controller's feedback gain).
/// offset is the slave's formation displacement; zero for the master.
struct ObserverGains {
  double alpha = 10.0;
  double beta = 4.0;
  double kappa = 20.0;
  JointVector offset = JointVector::Zero();

  void validate() const;
};

/// xdd_m = -alpha xd_m - kappa (x_m - q_m) - beta (x_m - mean(received)).
/// received holds the zero-order-held slave outputs currently known to the master.
JointVector master_observer_accel(const ObserverGains& gains, const ObserverState& obs, const JointVector& q_master,
                                  std::span<const JointVector> received);

/// xdd_s = -alpha xd_s - kappa (x_s - q_s) - beta ((x_s - offset) - master_held).
JointVector slave_observer_accel(const ObserverGains& gains, const ObserverState& obs, const JointVector& q_slave,
                                 const JointVector& master_held);

}  // namespace todsim
