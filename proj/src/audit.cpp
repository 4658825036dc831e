#include "todsim/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace todsim {

namespace {

const ManipulatorConfig& config_of(const Scenario& sc, std::size_t k) { return k == 0 ? sc.master : sc.slave[k - 1]; }

PlantState plant_of(const ManipulatorRow& m) { return {m.q, m.qd}; }
ObserverState obs_of(const ManipulatorRow& m) { return {m.x, m.xd}; }

struct ControlSignals {
  JointVector Ytheta;
  JointVector r;
};

ControlSignals control_signals(const Scenario& sc, std::size_t k, const ManipulatorRow& m) {
  const auto& cfg = config_of(sc, k);
  const SyncVariables sync = sync_vars(cfg.gains.lambda, plant_of(m), obs_of(m));
  const Regressor Y = control_regressor(cfg.model, plant_of(m), sync, cfg.gains.lambda);
  return {Y * m.theta_hat, sync.r};
}

ControllerState controller_of(const Scenario& sc, std::size_t k) {
  const auto& g = config_of(sc, k).gains;
  ControllerState c;
  c.kappa = g.kappa;
  c.lambda = g.lambda;
  c.control_trigger = {g.gamma, sc.control_trigger.epsilon, sc.control_trigger.nu};
  c.comm_trigger = {g.c, sc.comm_trigger.epsilon, sc.comm_trigger.nu};
  return c;
}

double channel_slope(const Scenario& sc, std::size_t k) {
  return k == 0 ? sc.forward.derivative_bound() : sc.backward.derivative_bound();
}

}  // namespace

TodAudit audit_tod(const Trace& trace, const Scenario& sc) {
  TodAudit a;
  a.applicable = sc.scheduler == Scheduler::Tod;
  const auto n = static_cast<std::size_t>(trace.slaves);
  const JointMatrix Q = JointMatrix::Identity();
  std::vector<JointVector> last_sent(n, JointVector::Zero());
  std::vector<JointVector> prev_eta;
  std::vector<JointVector> prev_x;
  int prev_granted = -1;
  double prev_t = 0.0;
  bool seen = false;

  for (const auto& row : trace.rows) {
    if (!row.instant) continue;
    ++a.instants;
    std::vector<JointVector> x;
    for (std::size_t i = 0; i < n; ++i) x.push_back(row.m[i + 1].x);
    bool bad = false;

    if (row.granted < 0 || static_cast<std::size_t>(row.granted) >= n || row.eta.size() != n) {
      a.one_grant = false;
      ++a.violations;
      continue;
    }
    if (a.applicable) {
      double best = -1.0;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double w = weighted_error(row.eta[i], Q);
        if (w > best) {
          best = w;
          arg = i;
        }
      }
      if (static_cast<std::size_t>(row.granted) != arg) {
        a.optimal = false;
        bad = true;
      }
    }
    if (seen) {
      const auto expect = reset_eta(prev_eta, prev_granted, prev_x, x);
      for (std::size_t i = 0; i < n; ++i) {
        if (expect[i][0] != row.eta[i][0] || expect[i][1] != row.eta[i][1]) {
          a.reset_consistent = false;
          bad = true;
        }
      }
      if (sc.scheme == Scheme::A && row.t - prev_t > sc.h + 1e-9) {
        a.interval_ok = false;
        bad = true;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (row.eta[i] != JointVector(-x[i])) {
          a.reset_consistent = false;
          bad = true;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) a.max_definition_gap = std::max(a.max_definition_gap, (row.eta[i] - (last_sent[i] - x[i])).cwiseAbs().maxCoeff());
    last_sent[static_cast<std::size_t>(row.granted)] = x[static_cast<std::size_t>(row.granted)];
    if (bad) ++a.violations;
    prev_eta = row.eta;
    prev_x = x;
    prev_granted = row.granted;
    prev_t = row.t;
    seen = true;
  }
  return a;
}

LyapunovAudit audit_lyapunov(const Trace& trace, const Scenario& sc, const DecisionVars& dv, double tol) {
  LyapunovAudit out;
  LyapunovMonitor mon(problem_from_scenario(sc), dv, sc.formation);
  const auto n = static_cast<std::size_t>(trace.slaves);
  std::vector<JointVector> last_sample;
  std::vector<double> gamma_inv;
  std::vector<Eigen::VectorXd> theta;
  for (std::size_t k = 0; k <= n; ++k) {
    theta.push_back(config_of(sc, k).model.true_parameters());
    gamma_inv.push_back(1.0 / sc.adaptation_gain);
  }

  for (const auto& row : trace.rows) {
    if (last_sample.empty()) {
      for (const auto& m : row.m) last_sample.push_back(m.x);
    }
    LyapunovSample s;
    s.t = row.t;
    s.delay_master = sc.forward.delay(row.t);
    s.delay_slave = sc.backward.delay(row.t);
    for (std::size_t k = 0; k <= n; ++k) {
      const auto& m = row.m[k];
      const auto& cfg = config_of(sc, k);
      const SyncVariables sync = sync_vars(cfg.gains.lambda, plant_of(m), obs_of(m));
      const Eigen::VectorXd err = m.theta_hat - theta[k];
      const double energy = 0.5 * sync.r.dot(mass_matrix(cfg.model, m.q) * sync.r) + 0.5 * gamma_inv[k] * err.squaredNorm();
      const JointVector before = m.x - last_sample[k];
      if (m.sample_event) last_sample[k] = m.x;
      const JointVector after = m.x - last_sample[k];
      if (k == 0) {
        s.energy_master = energy;
        s.e_master = sync.e;
        s.x_master = m.x;
        s.xd_master = m.xd;
        s.deviation_master_before = before;
        s.deviation_master_after = after;
      } else {
        s.energy_slave.push_back(energy);
        s.e_slave.push_back(sync.e);
        s.x_slave.push_back(m.x);
        s.xd_slave.push_back(m.xd);
        s.deviation_slave_before.push_back(before);
        s.deviation_slave_after.push_back(after);
      }
    }
    if (row.instant) {
      ResetEvent ev{row.eta, row.granted};
      mon.advance(s, &ev);
    } else {
      mon.advance(s, nullptr);
    }
  }
  mon.finalize();
  for (const auto& r : mon.records()) {
    out.time.push_back(r.t);
    out.total.push_back(r.after.total());
  }
  out.min_component = mon.min_component();
  out.nonnegative = out.min_component >= 0.0;
  out.reset = mon.reset_report(tol);
  out.decay = mon.decay_report(tol);
  return out;
}

TriggerAudit audit_triggers(const Trace& trace, const Scenario& sc) {
  TriggerAudit a;
  a.max_value_between = -std::numeric_limits<double>::infinity();
  const auto manips = static_cast<std::size_t>(trace.slaves) + 1;
  for (std::size_t k = 0; k < manips; ++k) {
    ControllerState ctrl = controller_of(sc, k);
    const double beta = config_of(sc, k).gains.beta;
    const double p = channel_slope(sc, k);
    JointVector last_sample = trace.rows.empty() ? JointVector::Zero() : trace.rows.front().m[k].x;
    for (std::size_t j = 0; j < trace.rows.size(); ++j) {
      const auto& row = trace.rows[j];
      const auto& m = row.m[k];
      if (sc.scheme == Scheme::A) {
        const auto sig = control_signals(sc, k, m);
        if (m.control_event) {
          capture_control_update(ctrl, sig.Ytheta, sig.r, row.t);
          continue;
        }
        const auto d = evaluate_control_trigger(ctrl, sig.Ytheta, sig.r, row.t);
        ++a.checked;
        a.max_value_between = std::max(a.max_value_between, d.value);
        if (d.fire && j + 1 < trace.rows.size()) ++a.violations;
      } else {
        const auto d = trigger_scheme_b(ctrl.comm_trigger, beta, obs_of(m), last_sample, row.t, p);
        if (m.sample_event) {
          last_sample = m.x;
          continue;
        }
        if (k > 0 && sc.latch_lost) continue;
        ++a.checked;
        a.max_value_between = std::max(a.max_value_between, d.value);
        if (d.fire && j + 1 < trace.rows.size()) ++a.violations;
      }
    }
  }
  if (a.checked == 0) a.max_value_between = 0.0;
  return a;
}

ZenoAudit audit_zeno(const Trace& trace, const Scenario& sc) {
  ZenoAudit z;
  z.min_interval = std::numeric_limits<double>::infinity();
  z.min_margin = std::numeric_limits<double>::infinity();
  const double dt = sc.dt;
  const auto manips = static_cast<std::size_t>(trace.slaves) + 1;
  const std::size_t rows = trace.rows.size();

  for (std::size_t k = 0; k < manips; ++k) {
    const auto& g = config_of(sc, k).gains;
    double rate = 0.0;
    if (sc.scheme == Scheme::A) {
      ControlSignals prev{};
      for (std::size_t j = 0; j < rows; ++j) {
        const auto sig = control_signals(sc, k, trace.rows[j].m[k]);
        if (j > 0) rate = std::max(rate, ((sig.Ytheta - prev.Ytheta).norm() + g.kappa * (sig.r - prev.r).norm()) / dt);
        prev = sig;
      }
    } else {
      for (const auto& row : trace.rows) rate = std::max(rate, row.m[k].xd.norm());
    }
    z.rate_bound.push_back(rate);
    if (!(rate > 0.0)) continue;

    double last_event = 0.0;
    JointVector last_sample = rows == 0 ? JointVector::Zero() : trace.rows.front().m[k].x;
    const double beta = g.beta;
    const double p = channel_slope(sc, k);
    const CommTriggerParams comm{g.c, sc.comm_trigger.epsilon, sc.comm_trigger.nu};
    for (std::size_t j = 0; j < rows; ++j) {
      const auto& row = trace.rows[j];
      const auto& m = row.m[k];
      bool triggered = false;
      double bound = 0.0;
      bool event = false;
      if (sc.scheme == Scheme::A) {
        event = m.control_event;
        triggered = event && j > 0;
        if (triggered) bound = zeno_bound(sc.control_trigger.epsilon, sc.control_trigger.nu, rate, row.t);
      } else {
        event = m.sample_event;
        if (event && j > 0) {
          triggered = trigger_scheme_b(comm, beta, obs_of(m), last_sample, row.t, p).fire;
          bound = std::sqrt(sc.comm_trigger.epsilon * std::exp(-sc.comm_trigger.nu * row.t)) / rate;
        }
        if (event) last_sample = m.x;
      }
      if (triggered) {
        ++z.events;
        ++z.intervals;
        const double gap = row.t - last_event;
        const double margin = gap - (std::max(dt, bound) - dt);
        z.min_interval = std::min(z.min_interval, gap);
        z.min_margin = std::min(z.min_margin, margin);
        if (margin < -1e-12) ++z.violations;
      }
      if (event) last_event = row.t;
    }
  }
  if (z.intervals == 0) {
    z.min_interval = 0.0;
    z.min_margin = 0.0;
  }
  return z;
}

DelayAudit audit_delay(const Trace& trace, const Scenario& sc) {
  DelayAudit d;
  d.bound = effective_delay_bound(sc.h, sc.forward.d) + sc.dt;
  for (const auto& row : trace.rows) d.max_age = std::max(d.max_age, row.forward_age);
  return d;
}

bool AuditReport::passed() const {
  const bool lyap = !lyapunov || (lyapunov->nonnegative && lyapunov->reset.passed && lyapunov->decay.passed);
  return tod.passed() && lyap && triggers.passed() && zeno.passed() && delay.passed();
}

AuditReport audit_trace(const Trace& trace, const Scenario& sc) {
  AuditReport rep;
  rep.tod = audit_tod(trace, sc);
  rep.triggers = audit_triggers(trace, sc);
  rep.zeno = audit_zeno(trace, sc);
  rep.delay = audit_delay(trace, sc);
  if (trace.rows.empty()) {
    rep.lyapunov_note = "empty trace";
    return rep;
  }
  const auto cert = feasibility_search(problem_from_scenario(sc));
  if (!cert.feasible) rep.lyapunov_note = "no certificate found: " + cert.reason;
  rep.lyapunov = audit_lyapunov(trace, sc, cert.dv);
  return rep;
}

}  // namespace todsim
