#include "todsim/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace todsim {

namespace {

constexpr double kSettleThreshold = 1e-2;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Plant, observer and estimate of one manipulator, packed for RK4.
struct NodeState {
  JointVector q, qd, x, xd;
  Eigen::VectorXd th;

  NodeState axpy(double a, const NodeState& d) const {
    return {q + a * d.q, qd + a * d.qd, x + a * d.x, xd + a * d.xd, th + a * d.th};
  }
};

}  // namespace

std::vector<std::pair<std::string, std::string>> Metrics::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("steps", std::to_string(steps));
  out.emplace_back("duration", fmt(duration));
  out.emplace_back("final_sync_error", fmt(final_sync_error));
  out.emplace_back("max_final_velocity", fmt(max_final_velocity));
  out.emplace_back("settling_time", settling_time < 0.0 ? std::string("unsettled") : fmt(settling_time));
  for (std::size_t i = 0; i < control_updates.size(); ++i) {
    const std::string who = i == 0 ? "master" : "slave" + std::to_string(i);
    out.emplace_back("control_updates." + who, std::to_string(control_updates[i]));
  }
  out.emplace_back("control_updates.total", std::to_string(total_control_updates));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string who = i == 0 ? "master" : "slave" + std::to_string(i);
    out.emplace_back("samples." + who, std::to_string(samples[i]));
  }
  out.emplace_back("transmissions.forward", std::to_string(forward_transmissions));
  out.emplace_back("transmissions.backward", std::to_string(backward_transmissions));
  out.emplace_back("interval.min", fmt(min_interval));
  out.emplace_back("interval.mean", fmt(mean_interval));
  out.emplace_back("bandwidth_ratio", fmt(bandwidth_ratio));
  out.emplace_back("max_theta_hat_norm", fmt(max_theta_hat_norm));
  out.emplace_back("max_abs_state", fmt(max_abs_state));
  out.emplace_back("finite", finite ? "true" : "false");
  return out;
}

std::vector<JointVector> initial_slave_positions(const Scenario& sc) {
  if (!sc.slave_q0.empty()) return sc.slave_q0;
  Rng rng(sc.seed);
  std::vector<JointVector> out;
  for (int i = 0; i < sc.slaves; ++i) {
    JointVector q = sc.master_q0 + sc.formation[i];
    for (int j = 0; j < kJoints; ++j) q[j] += rng.uniform(-sc.initial_spread, sc.initial_spread);
    out.push_back(q);
  }
  return out;
}

Simulation::Simulation(Scenario scenario, SimulationOptions options)
    : scenario_(std::move(scenario)),
      options_(options),
      forward_(scenario_.forward),
      backward_(scenario_.backward) {
  scenario_.validate();
  const auto& sc = scenario_;
  const auto slave_q = initial_slave_positions(sc);

  auto make_node = [&](const ManipulatorConfig& cfg, const JointVector& q0, const JointVector& offset) {
    Node n;
    n.cfg = cfg;
    n.plant.q = q0;
    n.obs.x = q0;
    n.og.alpha = cfg.gains.alpha;
    n.og.beta = cfg.gains.beta;
    n.og.kappa = cfg.gains.kappa;
    n.og.offset = offset;
    const Eigen::VectorXd theta = cfg.model.true_parameters();
    n.ctrl.theta_hat = sc.theta_hat_scale * theta;
    n.ctrl.Gamma = sc.adaptation_gain * Eigen::MatrixXd::Identity(theta.size(), theta.size());
    n.ctrl.kappa = cfg.gains.kappa;
    n.ctrl.lambda = cfg.gains.lambda;
    n.ctrl.control_trigger = {cfg.gains.gamma, sc.control_trigger.epsilon, sc.control_trigger.nu};
    n.ctrl.comm_trigger = {cfg.gains.c, sc.comm_trigger.epsilon, sc.comm_trigger.nu};
    n.last_sample = q0;
    return n;
  };

  nodes_.push_back(make_node(sc.master, sc.master_q0, JointVector::Zero()));
  theta_true_master_ = sc.master.model.true_parameters();
  for (int i = 0; i < sc.slaves; ++i) {
    nodes_.push_back(make_node(sc.slave[i], slave_q[i], sc.formation[i]));
    theta_true_slave_.push_back(sc.slave[i].model.true_parameters());
  }

  master_view_ = ZohBuffer(nodes_[0].obs.x);
  slave_views_.assign(static_cast<std::size_t>(sc.slaves), ZohBuffer(JointVector::Zero()));
  arbiter_ = TodArbiterState::create(static_cast<std::size_t>(sc.slaves));
  total_steps_ = sc.steps();
  period_steps_ = std::max(1, sc.steps_per_period());
  trace_.scheme = sc.scheme;
  trace_.slaves = sc.slaves;
  trace_.parameters = static_cast<int>(theta_true_master_.size());
}

std::vector<JointVector> Simulation::slave_outputs() const {
  std::vector<JointVector> out;
  for (std::size_t i = 1; i < nodes_.size(); ++i) out.push_back(nodes_[i].obs.x);
  return out;
}

void Simulation::deliver(double t) {
  for (const auto& msg : forward_.deliver_until(t)) master_view_.push(msg);
  for (const auto& msg : backward_.deliver_until(t)) slave_views_[static_cast<std::size_t>(msg.source)].push(msg);
}

void Simulation::periodic_slave_instant(double t, TraceRow& row) {
  const auto current = slave_outputs();
  const std::size_t winner = scenario_.scheduler == Scheduler::Tod ? tod_select(arbiter_, current)
                                                                  : rr_advance(arbiter_, current, rr_counter_++);
  row.instant = true;
  row.granted = static_cast<int>(winner);
  row.eta = arbiter_.eta;
  tod_commit(arbiter_, winner, current);
  backward_.send(static_cast<int>(winner), current[winner], t);
  last_instant_step_ = step_index_;
  last_granted_ = row.granted;
  last_eta_ = row.eta;

  Node& w = nodes_[winner + 1];
  w.last_sample = current[winner];
  w.last_sample_time = t;
  w.sample_event = true;
}

void Simulation::transmit(double t, TraceRow& row) {
  const auto& sc = scenario_;
  const bool first = step_index_ == 0;
  Node& master = nodes_[0];

  auto sample_master = [&] {
    master.last_sample = master.obs.x;
    master.last_sample_time = t;
    master.sample_event = true;
    forward_.send(0, master.obs.x, t);
    row.forward_send = true;
  };

  if (sc.scheme == Scheme::A) {
    if (step_index_ % period_steps_ != 0) return;
    sample_master();
    periodic_slave_instant(t, row);
    return;
  }

  // Communication scheme: each node samples when its trigger fires or after h of silence.
  const double p_m = forward_.profile().derivative_bound();
  const double p_s = backward_.profile().derivative_bound();
  const auto since = [&](double last_t) { return std::llround((t - last_t) / sc.dt); };

  const auto dm = trigger_scheme_b(master.ctrl.comm_trigger, master.og.beta, master.obs, master.last_sample, t, p_m);
  if (first || dm.fire || since(master.last_sample_time) >= period_steps_) sample_master();

  std::vector<bool> fired(nodes_.size(), false);
  bool any = false;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    fired[i] = trigger_scheme_b(n.ctrl.comm_trigger, n.og.beta, n.obs, n.last_sample, t, p_s).fire;
    any = any || fired[i];
  }
  const bool silent = !first && step_index_ - last_instant_step_ >= period_steps_;
  if (!(first || any || silent)) return;
  periodic_slave_instant(t, row);
  if (sc.latch_lost) return;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (!fired[i] || n.sample_event) continue;
    // Lost arbitration: the sample is discarded, the trigger re-arms from it.
    n.last_sample = n.obs.x;
    n.last_sample_time = t;
    n.sample_event = true;
  }
}

void Simulation::control(double t) {
  for (auto& n : nodes_) {
    const SyncVariables sync = sync_vars(n.ctrl.lambda, n.plant, n.obs);
    const Regressor Y = control_regressor(n.cfg.model, n.plant, sync, n.ctrl.lambda);
    if (scenario_.scheme == Scheme::A) {
      if (step_index_ == 0) {
        capture_control_update(n.ctrl, Y * n.ctrl.theta_hat, sync.r, t);
        n.control_event = true;
      } else {
        n.control_event = trigger_scheme_a(n.ctrl, Y, sync, t).fire;
      }
      if (n.control_event) {
        ++n.control_updates;
        n.events.push_back(t);
      }
      n.tau = torque_scheme_a(n.ctrl);
    } else {
      n.tau = torque_scheme_b(n.ctrl, sync, Y);
    }
  }
}

void Simulation::integrate(double t) {
  const double dt = scenario_.dt;
  const bool live = scenario_.scheme == Scheme::B;
  std::vector<JointVector> received;
  for (const auto& z : slave_views_) received.push_back(z.latest());
  const JointVector master_held = master_view_.latest();

  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    Node& n = nodes_[k];
    const bool is_master = k == 0;
    auto deriv = [&](double tau_t, const NodeState& s) {
      const PlantState plant{s.q, s.qd};
      const ObserverState obs{s.x, s.xd};
      const SyncVariables sync = sync_vars(n.ctrl.lambda, plant, obs);
      const Regressor Y = control_regressor(n.cfg.model, plant, sync, n.ctrl.lambda);
      JointVector tau = n.tau;
      if (live) tau = -n.ctrl.kappa * sync.r - Y * s.th;
      const JointVector f = force_profile(n.cfg.force, tau_t, n.cfg.model, s.q);
      NodeState d;
      d.q = s.qd;
      try {
        d.qd = forward_dynamics(n.cfg.model, plant, tau, f);
      } catch (const NonFiniteError&) {
        throw NonFiniteError(t, (is_master ? std::string("master") : "slave" + std::to_string(k)) + ".qdd");
      }
      d.x = s.xd;
      d.xd = is_master ? master_observer_accel(n.og, obs, s.q, received) : slave_observer_accel(n.og, obs, s.q, master_held);
      d.th = adaptation_rate(n.ctrl.Gamma, Y, sync.r);
      return d;
    };
    const NodeState s0{n.plant.q, n.plant.qd, n.obs.x, n.obs.xd, n.ctrl.theta_hat};
    const NodeState k1 = deriv(t, s0);
    const NodeState k2 = deriv(t + 0.5 * dt, s0.axpy(0.5 * dt, k1));
    const NodeState k3 = deriv(t + 0.5 * dt, s0.axpy(0.5 * dt, k2));
    const NodeState k4 = deriv(t + dt, s0.axpy(dt, k3));
    n.plant.q = s0.q + dt / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
    n.plant.qd = s0.qd + dt / 6.0 * (k1.qd + 2.0 * k2.qd + 2.0 * k3.qd + k4.qd);
    n.obs.x = s0.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    n.obs.xd = s0.xd + dt / 6.0 * (k1.xd + 2.0 * k2.xd + 2.0 * k3.xd + k4.xd);
    n.ctrl.theta_hat = s0.th + dt / 6.0 * (k1.th + 2.0 * k2.th + 2.0 * k3.th + k4.th);
  }
}

void Simulation::check_finite(double t) const {
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const Node& n = nodes_[k];
    const std::string who = k == 0 ? std::string("master") : "slave" + std::to_string(k);
    if (!n.plant.q.allFinite()) throw NonFiniteError(t, who + ".q");
    if (!n.plant.qd.allFinite()) throw NonFiniteError(t, who + ".qd");
    if (!n.obs.x.allFinite()) throw NonFiniteError(t, who + ".x");
    if (!n.obs.xd.allFinite()) throw NonFiniteError(t, who + ".xd");
    if (!n.ctrl.theta_hat.allFinite()) throw NonFiniteError(t, who + ".theta_hat");
  }
}

double Simulation::sync_error() const {
  double worst = 0.0;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    const JointVector d = nodes_[0].plant.q - (nodes_[i].plant.q - scenario_.formation[i - 1]);
    worst = std::max(worst, d.norm());
  }
  return worst;
}

void Simulation::record(double t, const TraceRow& net) {
  const double err = sync_error();
  if (err >= kSettleThreshold) {
    settled_ = false;
  } else if (!settled_) {
    settled_ = true;
    settled_since_ = t;
  }
  for (const auto& n : nodes_) {
    max_theta_norm_ = std::max(max_theta_norm_, n.ctrl.theta_hat.norm());
    for (const JointVector* v : {&n.plant.q, &n.plant.qd, &n.obs.x, &n.obs.xd}) {
      max_abs_state_ = std::max(max_abs_state_, v->cwiseAbs().maxCoeff());
    }
  }
  if (!options_.record_trace) return;
  TraceRow row = net;
  row.t = t;
  const double stamp = master_view_.arrivals() == 0 ? 0.0 : master_view_.latest_stamp();
  row.forward_age = t - stamp;
  for (const auto& n : nodes_) {
    ManipulatorRow m;
    m.q = n.plant.q;
    m.qd = n.plant.qd;
    m.x = n.obs.x;
    m.xd = n.obs.xd;
    m.tau = n.tau;
    m.theta_hat = n.ctrl.theta_hat;
    m.control_event = n.control_event;
    m.sample_event = n.sample_event;
    row.m.push_back(std::move(m));
  }
  trace_.rows.push_back(std::move(row));
}

void Simulation::step() {
  if (finished()) return;
  const double t = time();
  for (auto& n : nodes_) {
    n.control_event = false;
    n.sample_event = false;
  }
  TraceRow net;
  deliver(t);
  transmit(t, net);
  deliver(t);
  control(t);
  for (auto& n : nodes_) {
    if (n.sample_event) {
      ++n.samples;
      if (scenario_.scheme == Scheme::B) n.events.push_back(t);
    }
    n.flash = n.flash || n.control_event || n.sample_event;
  }
  record(t, net);
  integrate(t);
  ++step_index_;
  check_finite(time());
}

void Simulation::run() {
  while (!finished()) step();
  if (final_recorded_ || total_steps_ == 0) return;
  for (auto& n : nodes_) {
    n.control_event = false;
    n.sample_event = false;
  }
  deliver(time());
  record(time(), TraceRow{});
  final_recorded_ = true;
}

Metrics Simulation::metrics() const {
  Metrics m;
  m.steps = static_cast<int>(step_index_);
  m.duration = time();
  m.finite = true;
  for (const auto& n : nodes_) {
    m.control_updates.push_back(n.control_updates);
    m.total_control_updates += n.control_updates;
    m.samples.push_back(n.samples);
  }
  m.forward_transmissions = static_cast<int>(forward_.sent_count());
  m.backward_transmissions = static_cast<int>(backward_.sent_count());
  if (step_index_ == 0) return m;

  m.final_sync_error = sync_error();
  for (const auto& n : nodes_) m.max_final_velocity = std::max(m.max_final_velocity, n.plant.qd.norm());
  m.settling_time = settled_ ? settled_since_ : -1.0;

  double min_gap = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  int gaps = 0;
  for (const auto& n : nodes_) {
    for (std::size_t j = 1; j < n.events.size(); ++j) {
      const double g = n.events[j] - n.events[j - 1];
      min_gap = std::min(min_gap, g);
      sum += g;
      ++gaps;
    }
  }
  m.min_interval = gaps > 0 ? min_gap : 0.0;
  m.mean_interval = gaps > 0 ? sum / gaps : 0.0;
  m.bandwidth_ratio = (m.forward_transmissions + m.backward_transmissions) / (2.0 * static_cast<double>(step_index_));
  m.max_theta_hat_norm = max_theta_norm_;
  m.max_abs_state = max_abs_state_;
  return m;
}

Snapshot Simulation::snapshot() {
  Snapshot s;
  s.t = time();
  s.scheme = scenario_.scheme;
  for (auto& n : nodes_) {
    s.q.push_back(n.plant.q);
    s.x.push_back(n.obs.x);
    s.endpoint.push_back(end_point(n.cfg.model, n.plant.q));
    s.trigger_flash.push_back(n.flash);
    n.flash = false;
  }
  s.granted = last_granted_;
  s.eta_norms.assign(static_cast<std::size_t>(scenario_.slaves), 0.0);
  for (std::size_t i = 0; i < last_eta_.size(); ++i) s.eta_norms[i] = std::sqrt(weighted_error(last_eta_[i], arbiter_.weights[i]));
  s.sync_error = sync_error();
  return s;
}

void Simulation::set_master_force(const ForceProfile& force) {
  force.validate();
  nodes_[0].cfg.force = force;
  scenario_.master.force = force;
}

void Simulation::set_delays(double d_m, double d_s) {
  DelayProfile f = scenario_.forward;
  DelayProfile b = scenario_.backward;
  f.d = d_m;
  b.d = d_s;
  f.validate();
  b.validate();
  scenario_.forward = f;
  scenario_.backward = b;
  forward_.set_profile(f);
  backward_.set_profile(b);
}

void Simulation::set_gain(const std::string& path, double value) {
  std::string who = "both";
  std::string name = path;
  if (const auto dot = path.find('.'); dot != std::string::npos) {
    who = path.substr(0, dot);
    name = path.substr(dot + 1);
  }
  if (who != "both" && who != "master" && who != "slave") throw std::invalid_argument("unknown gain target '" + who + "'");
  if (!(value > 0.0) || !std::isfinite(value)) throw std::invalid_argument("gain values must be positive");
  auto apply = [&](Node& n, ManipulatorConfig& cfg) {
    auto& g = cfg.gains;
    if (name == "alpha") {
      g.alpha = n.og.alpha = value;
    } else if (name == "beta") {
      g.beta = n.og.beta = value;
    } else if (name == "kappa") {
      g.kappa = n.og.kappa = n.ctrl.kappa = value;
    } else if (name == "lambda") {
      g.lambda = n.ctrl.lambda = value;
    } else if (name == "gamma") {
      g.gamma = n.ctrl.control_trigger.gamma = value;
    } else if (name == "c") {
      g.c = n.ctrl.comm_trigger.c = value;
    } else {
      throw std::invalid_argument("unknown gain '" + name + "'");
    }
    n.cfg.gains = g;
  };
  if (who != "slave") apply(nodes_[0], scenario_.master);
  if (who != "master") {
    for (std::size_t i = 1; i < nodes_.size(); ++i) apply(nodes_[i], scenario_.slave[i - 1]);
  }
}

RunResult run_scenario(const Scenario& scenario) {
  Simulation sim(scenario);
  sim.run();
  return {sim.trace(), sim.metrics()};
}

SchedulerComparison compare_schedulers(Scenario scenario) {
  SchedulerComparison out;
  scenario.scheduler = Scheduler::Tod;
  {
    Simulation sim(scenario, {.record_trace = false});
    sim.run();
    out.tod = sim.metrics();
  }
  scenario.scheduler = Scheduler::RoundRobin;
  {
    Simulation sim(scenario, {.record_trace = false});
    sim.run();
    out.rr = sim.metrics();
  }
  return out;
}

}  // namespace todsim
