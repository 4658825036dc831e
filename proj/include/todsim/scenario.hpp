#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "todsim/controllers.hpp"
#include "todsim/dynamics.hpp"
#include "todsim/network.hpp"
#include "todsim/stability.hpp"

namespace todsim {

/// Configuration problems (bad keys, bad values). code is a short machine-readable tag.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string code, const std::string& msg) : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

enum class ForceKind { Zero, DecayingSine, PulseTrainDecaying, SpringToTarget };

ForceKind parse_force_kind(const std::string& text);
const char* to_string(ForceKind kind);

/// External torque applied to one manipulator.
///   decaying_sine:        amplitude e^{-decay t} sin(omega t + phase) on both joints
///   pulse_train_decaying: pulse k of length width starting at k*period has height amplitude*ratio^k
///   spring_to_target:     J(q)^T stiffness (target - endpoint(q))
struct ForceProfile {
  ForceKind kind = ForceKind::Zero;
  double amplitude = 0.0;
  double decay = 0.0;
  double omega = 0.0;
  double phase = 0.0;
  double period = 1.0;
  double width = 0.1;
  double ratio = 0.5;
  double stiffness = 0.0;
  Eigen::Vector2d target = Eigen::Vector2d::Zero();

  void validate() const;
};

JointVector force_profile(const ForceProfile& profile, double t, const RobotModel& model, const JointVector& q);

/// Closed form of int_0^inf |f(t)|^2 dt for a decaying sine on both joints.
double decaying_sine_energy(double amplitude, double decay, double omega);

enum class Scheduler { Tod, RoundRobin };

Scheduler parse_scheduler(const std::string& text);
const char* to_string(Scheduler s);

struct ManipulatorConfig {
  RobotModel model;
  ManipulatorGains gains;
  ForceProfile force;
};

struct Scenario {
  std::string name = "scenario";
  Scheme scheme = Scheme::A;
  int slaves = 3;
  double duration = 30.0;
  double dt = 1e-3;
  std::uint64_t seed = 1;

  ManipulatorConfig master;
  std::vector<ManipulatorConfig> slave;  // one per slave
  std::vector<JointVector> formation;    // offsets, summing to zero

  // Network
  double h = 0.02;
  DelayProfile forward;   // master -> slaves
  DelayProfile backward;  // slaves -> master (shared, TOD scheduled)
  Scheduler scheduler = Scheduler::Tod;
  bool latch_lost = false;  // communication scheme: losers keep their trigger armed

  // Controller
  ControlTriggerParams control_trigger;
  CommTriggerParams comm_trigger;
  double adaptation_gain = 1.0;   // Gamma = adaptation_gain * I
  double theta_hat_scale = 0.5;   // theta_hat(0) = scale * theta_true

  // Initial configuration: q_s(0) = q_m(0) + offset + U(-spread, spread) per joint.
  JointVector master_q0 = JointVector(0.4, 0.6);
  double initial_spread = 0.5;
  std::vector<JointVector> slave_q0;  // explicit, overrides the random draw when non-empty

  std::filesystem::path output_dir;

  /// Throws ScenarioError when an invariant fails.
  void validate() const;
  int steps() const;
  int steps_per_period() const;  // h / dt, periodic scheme only
};

/// Default three-slave formation around the master's configuration.
std::vector<JointVector> default_formation(int slaves);

Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const Scenario& sc);
Scenario load_scenario(const std::filesystem::path& path);

/// Scalar data for the certificate of this scenario: gains, h, delay bounds, slope bounds.
StabilityProblem problem_from_scenario(const Scenario& sc);

/// Stability problem file for verify-lmi.
StabilityProblem problem_from_json(const nlohmann::json& doc);
nlohmann::json problem_to_json(const StabilityProblem& problem);
StabilityProblem load_problem(const std::filesystem::path& path);

/// Seeded uniform draws in [0, 1), identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace todsim
