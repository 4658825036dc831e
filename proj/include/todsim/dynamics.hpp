#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace todsim {

using JointVector = Eigen::Vector2d;
using JointMatrix = Eigen::Matrix2d;
using Regressor = Eigen::Matrix<double, 2, Eigen::Dynamic>;

inline constexpr int kJoints = 2;

/// Raised when integration or dynamics evaluation produces NaN/Inf.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(double time, std::string variable)
      : std::runtime_error("non-finite value in '" + variable + "' at t=" + std::to_string(time)),
        time_(time),
        variable_(std::move(variable)) {}

  double time() const { return time_; }
  const std::string& variable() const { return variable_; }

 private:
  double time_;
  std::string variable_;
};

/// Two-link revolute planar arm. Joint angles are measured from the x-axis,
/// gravity (when g > 0) acts along -y.
///
/// Parameter vector (linear in the dynamics):
///   theta1 = m1 lc1^2 + m2 l1^2 + I1
///   theta2 = m2 lc2^2 + I2
///   theta3 = m2 l1 lc2
///   theta4 = g (m1 lc1 + m2 l1)      (only when g > 0)
///   theta5 = g m2 lc2                (only when g > 0)
struct RobotModel {
  double l1 = 1.0;
  double l2 = 1.0;
  double m1 = 1.0;
  double m2 = 1.0;
  double lc1 = 0.5;
  double lc2 = 0.5;
  double I1 = 0.1;
  double I2 = 0.1;
  double g = 0.0;

  /// Throws std::invalid_argument unless masses, lengths and inertias are positive and g >= 0.
  void validate() const;

  int parameter_count() const { return g > 0.0 ? 5 : 3; }
  Eigen::VectorXd true_parameters() const;

  // Model-derived constants of the standard manipulator properties.
  double inertia_lower_bound() const;  // lambda^m: M(q) >= lambda^m I
  double inertia_upper_bound() const;  // lambda^M: M(q) <= lambda^M I
  double coriolis_bound() const;       // c: |C(q,x) y| <= c |x| |y|
  double gravity_bound() const;        // g_z: |G(q)| <= g_z
};

struct PlantState {
  JointVector q = JointVector::Zero();
  JointVector qd = JointVector::Zero();
};

JointMatrix mass_matrix(const RobotModel& model, const JointVector& q);

/// Christoffel-symbol Coriolis matrix, so that Mdot - 2C is skew-symmetric.
JointMatrix coriolis_matrix(const RobotModel& model, const JointVector& q, const JointVector& qd);

JointVector gravity_vector(const RobotModel& model, const JointVector& q);

/// Y(q, qd, x, y) with Y * theta = M(q) x + C(q, qd) y - G(q).
Regressor regressor(const RobotModel& model, const JointVector& q, const JointVector& qd,
                    const JointVector& x, const JointVector& y);

/// qdd = M^-1 (tau + f - C qd - G). Throws NonFiniteError on NaN/Inf results.
JointVector forward_dynamics(const RobotModel& model, const PlantState& state, const JointVector& tau,
                             const JointVector& f);

double kinetic_energy(const RobotModel& model, const PlantState& state);

/// Planar end-point position and its Jacobian.
Eigen::Vector2d end_point(const RobotModel& model, const JointVector& q);
Eigen::Matrix2d end_point_jacobian(const RobotModel& model, const JointVector& q);

}  // namespace todsim
