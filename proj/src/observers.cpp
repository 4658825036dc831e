#include "todsim/observers.hpp"

#include <cmath>
#include <stdexcept>

namespace todsim {

void ObserverGains::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0) || !(kappa > 0.0)) {
    throw std::invalid_argument("observer gains alpha, beta, kappa must be positive");
  }
  if (!offset.allFinite()) throw std::invalid_argument("observer formation offset must be finite");
}

JointVector master_observer_accel(const ObserverGains& gains, const ObserverState& obs, const JointVector& q_master,
                                  std::span<const JointVector> received) {
  if (received.empty()) throw std::invalid_argument("master observer needs at least one slave value");
  JointVector mean = JointVector::Zero();
  for (const auto& v : received) mean += v;
  mean /= static_cast<double>(received.size());
  return -gains.alpha * obs.xd - gains.kappa * (obs.x - q_master) - gains.beta * (obs.x - mean);
}

JointVector slave_observer_accel(const ObserverGains& gains, const ObserverState& obs, const JointVector& q_slave,
                                 const JointVector& master_held) {
  const JointVector shifted = obs.x - gains.offset;
  return -gains.alpha * obs.xd - gains.kappa * (obs.x - q_slave) - gains.beta * (shifted - master_held);
}

}  // namespace todsim
