#pragma once

#include <optional>
#include <string>
#include <vector>

#include "todsim/lyapunov.hpp"
#include "todsim/scenario.hpp"
#include "todsim/simulation.hpp"

namespace todsim {

struct TodAudit {
  bool applicable = true;       // optimality is only claimed for the TOD scheduler
  bool optimal = true;          // granted index attains the max weighted error, lowest index on ties
  bool reset_consistent = true; // eta equals the reset recursion bit for bit
  bool one_grant = true;        // exactly one payload per instant
  bool interval_ok = true;      // consecutive instants at most h apart
  std::size_t instants = 0;
  std::size_t violations = 0;
  double max_definition_gap = 0.0;  // max |eta - (last_sent - x)|, should be round-off only
  bool passed() const { return (!applicable || optimal) && reset_consistent && one_grant && interval_ok; }
};

TodAudit audit_tod(const Trace& trace, const Scenario& scenario);

struct LyapunovAudit {
  double min_component = 0.0;
  bool nonnegative = false;
  ResetReport reset;
  DecayReport decay;
  std::vector<double> time;
  std::vector<double> total;  // V(t+) per row
};

/// Rebuilds the functional along the trace with the given decision variables.
LyapunovAudit audit_lyapunov(const Trace& trace, const Scenario& scenario, const DecisionVars& dv, double tol = 1e-6);

struct TriggerAudit {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double max_value_between = 0.0;  // max trigger function value on rows without an event
  bool passed() const { return violations == 0; }
};

/// On every row without an event the trigger function must be negative.
TriggerAudit audit_triggers(const Trace& trace, const Scenario& scenario);

struct ZenoAudit {
  std::size_t events = 0;         // triggered events (forced samples excluded)
  std::size_t intervals = 0;
  std::size_t violations = 0;
  double min_interval = 0.0;
  double min_margin = 0.0;        // min of gap - (max(dt, bound) - dt)
  std::vector<double> rate_bound; // per node: Q_hat (control) or max |xd| (communication)
  bool passed() const { return violations == 0; }
};

/// Inter-event gaps against the analytic dwell bound evaluated at the later event.
ZenoAudit audit_zeno(const Trace& trace, const Scenario& scenario);

struct DelayAudit {
  double max_age = 0.0;
  double bound = 0.0;
  bool passed() const { return max_age <= bound; }
};

/// Age of the master value held at the slaves never exceeds h + d_m (plus one step).
DelayAudit audit_delay(const Trace& trace, const Scenario& scenario);

struct AuditReport {
  TodAudit tod;
  std::optional<LyapunovAudit> lyapunov;
  std::string lyapunov_note;
  TriggerAudit triggers;
  ZenoAudit zeno;
  DelayAudit delay;
  bool passed() const;
};

/// Runs every audit; the Lyapunov audit uses the certificate found by feasibility_search.
AuditReport audit_trace(const Trace& trace, const Scenario& scenario);

}  // namespace todsim
