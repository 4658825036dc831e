#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "todsim/controllers.hpp"
#include "todsim/network.hpp"
#include "todsim/observers.hpp"
#include "todsim/scenario.hpp"

namespace todsim {

struct ManipulatorRow {
  JointVector q = JointVector::Zero();
  JointVector qd = JointVector::Zero();
  JointVector x = JointVector::Zero();
  JointVector xd = JointVector::Zero();
  JointVector tau = JointVector::Zero();
  Eigen::VectorXd theta_hat;
  bool control_event = false;  // control update captured at this step (periodic scheme)
  bool sample_event = false;   // node sampled its observer output at this step
};

/// State at t (after transmissions and triggers at t), and the torque applied over [t, t + dt).
struct TraceRow {
  double t = 0.0;
  std::vector<ManipulatorRow> m;  // index 0 is the master, 1..N the slaves
  bool instant = false;           // slave-channel transmission instant
  int granted = -1;               // slave granted the channel (0-based), -1 if none
  std::vector<JointVector> eta;   // transmission errors at the instant, before the grant
  bool forward_send = false;      // master value sent to the slaves
  double forward_age = 0.0;       // t minus the send time of the master value the slaves hold
};

struct Trace {
  Scheme scheme = Scheme::A;
  int slaves = 0;
  int parameters = 3;
  std::vector<TraceRow> rows;
};

struct Metrics {
  int steps = 0;
  double duration = 0.0;
  double final_sync_error = 0.0;     // max_i |q_m - (q_si - offset_i)| at the end
  double max_final_velocity = 0.0;   // max over manipulators of |qd| at the end
  double settling_time = -1.0;       // first time after which sync error stays below 1e-2; -1 unsettled
  std::vector<int> control_updates;  // per manipulator (master first)
  int total_control_updates = 0;
  std::vector<int> samples;          // per node sampling events
  int forward_transmissions = 0;
  int backward_transmissions = 0;
  double min_interval = 0.0;         // min inter-event gap over all nodes (0 if fewer than two events)
  double mean_interval = 0.0;
  double bandwidth_ratio = 0.0;      // transmissions / (2 * steps)
  double max_theta_hat_norm = 0.0;
  double max_abs_state = 0.0;        // max |q|, |qd|, |x|, |xd| entry over the run
  bool finite = true;

  std::vector<std::pair<std::string, std::string>> entries() const;
};

struct SimulationOptions {
  bool record_trace = true;
};

/// Live snapshot for the gateway.
struct Snapshot {
  double t = 0.0;
  Scheme scheme = Scheme::A;
  std::vector<JointVector> q, x;
  std::vector<Eigen::Vector2d> endpoint;
  int granted = -1;
  std::vector<double> eta_norms;
  std::vector<bool> trigger_flash;  // any control/sample event since the previous snapshot
  double sync_error = 0.0;
  bool paused = false;
  bool certificate_violated = false;
};

/// Fixed-step sampled-data simulation of one master and N slaves over the shared network.
class Simulation {
 public:
  explicit Simulation(Scenario scenario, SimulationOptions options = {});

  void step();
  bool finished() const { return step_index_ >= total_steps_; }
  /// Runs to the configured duration and appends the final state row.
  void run();

  double time() const { return step_index_ * scenario_.dt; }
  long long step_index() const { return step_index_; }
  const Scenario& scenario() const { return scenario_; }
  const Trace& trace() const { return trace_; }
  Metrics metrics() const;
  Snapshot snapshot();

  // Live adjustments; callers validate first (see gateway). Applied between steps.
  void set_master_force(const ForceProfile& force);
  void set_delays(double d_m, double d_s);
  /// path is "master.<gain>", "slave.<gain>" or "<gain>" (both); gains alpha, beta, kappa, lambda, gamma, c.
  void set_gain(const std::string& path, double value);
  /// Extends the run indefinitely (interactive serving).
  void set_unbounded() { total_steps_ = std::numeric_limits<long long>::max(); }

  double sync_error() const;

 private:
  struct Node {
    ManipulatorConfig cfg;
    PlantState plant;
    ObserverState obs;
    ObserverGains og;
    ControllerState ctrl;
    JointVector tau = JointVector::Zero();
    JointVector last_sample = JointVector::Zero();
    double last_sample_time = 0.0;
    bool control_event = false;
    bool sample_event = false;
    bool flash = false;
    int control_updates = 0;
    int samples = 0;
    std::vector<double> events;
  };

  void transmit(double t, TraceRow& row);
  void periodic_slave_instant(double t, TraceRow& row);
  void control(double t);
  void integrate(double t);
  void deliver(double t);
  void record(double t, const TraceRow& net);
  void check_finite(double t) const;
  std::vector<JointVector> slave_outputs() const;

  Scenario scenario_;
  SimulationOptions options_;
  Eigen::VectorXd theta_true_master_;
  std::vector<Eigen::VectorXd> theta_true_slave_;
  std::vector<Node> nodes_;  // 0 master, 1..N slaves
  DelayChannel forward_;
  DelayChannel backward_;
  ZohBuffer master_view_;                // master observer output held at the slaves
  std::vector<ZohBuffer> slave_views_;   // slave outputs held at the master
  TodArbiterState arbiter_;
  std::uint64_t rr_counter_ = 0;
  long long last_instant_step_ = 0;
  long long step_index_ = 0;
  long long total_steps_ = 0;
  int period_steps_ = 1;
  bool final_recorded_ = false;
  int last_granted_ = -1;
  std::vector<JointVector> last_eta_;
  Trace trace_;
  double settled_since_ = 0.0;
  bool settled_ = false;
  double max_theta_norm_ = 0.0;
  double max_abs_state_ = 0.0;
};

/// Simulates the scenario to completion.
struct RunResult {
  Trace trace;
  Metrics metrics;
};
RunResult run_scenario(const Scenario& scenario);

struct SchedulerComparison {
  Metrics tod;
  Metrics rr;
};
SchedulerComparison compare_schedulers(Scenario scenario);

/// Initial slave joint angles: explicit, or formation point plus a seeded uniform spread.
std::vector<JointVector> initial_slave_positions(const Scenario& scenario);

}  // namespace todsim
