#pragma once

#include <string>
#include <vector>

#include "todsim/dynamics.hpp"
#include "todsim/stability.hpp"

namespace todsim {

/// Samples of a scalar signal on a non-decreasing time grid. Repeated times encode
/// a jump (left value first). The signal is zero before the first node and held at
/// the last value after it.
class SampledSignal {
 public:
  void push(double t, double value);
  std::size_t size() const { return times_.size(); }
  void clear();

  /// Composite trapezoid of the signal over [lo, hi], interpolating linearly at lo.
  double integral(double lo, double hi) const;
  /// Composite trapezoid of (s - lo) * w(s) over [lo, hi]. For lo = t - H this equals
  /// the double integral int_{-H}^0 int_{t+v}^t w(s) ds dv.
  double ramp_integral(double lo, double hi) const;

 private:
  double value_at(double t) const;
  template <typename Weight>
  double trapezoid(double lo, double hi, Weight weight) const;

  std::vector<double> times_;
  std::vector<double> values_;
};

/// Right-continuous piecewise-constant signal, integrated exactly.
class StepSignal {
 public:
  explicit StepSignal(double before_first = 0.0) : before_(before_first) {}
  void set(double t, double value);
  double integral(double lo, double hi) const;
  double value_at(double t) const;

 private:
  double before_;
  std::vector<double> starts_;
  std::vector<double> values_;
};

/// Per-term values of the Lyapunov-Krasovskii functional. Every field is non-negative
/// when the pairing LMIs hold.
struct LyapunovBreakdown {
  double adaptive = 0.0;   // weighted r^T M r / 2 + theta~^T Gamma^-1 theta~ / 2 terms
  double velocity = 0.0;   // observer velocity energies
  double coupling = 0.0;   // beta_m |x_m - (x_si - offset_i)|^2 terms
  double tracking = 0.0;   // kappa |e|^2 terms
  double delay_master = 0.0;  // double integral on xd_m (window h + d_m, or d_m)
  double delay_slave = 0.0;   // double integrals on xd_si
  double deviation = 0.0;     // integrals of |x - last sample|^2 (communication scheme)
  double transmission = 0.0;  // (1/h^2) int eta^T Z eta over the backward delay window
  double sampling = 0.0;      // h int_{s_k}^t xd_si^T P xd_si
  double eta = 0.0;           // sum eta^T Q eta + coefficient * sum_{i != i*} eta^T U eta

  double q_quad = 0.0;
  double u_quad = 0.0;
  double u_coefficient = 0.0;  // (s_k - t)/(s_{k+1} - s_k), in (-1, 0]

  double v1() const { return adaptive + velocity + coupling + tracking; }
  double v2() const { return delay_master + delay_slave + deviation; }
  double vt() const { return transmission + sampling + eta; }
  double total() const { return v1() + v2() + vt(); }
  double min_component() const;
};

/// Instantaneous data the functional needs at one grid time. Slave vectors have N entries.
struct LyapunovSample {
  double t = 0.0;
  double delay_master = 0.0;  // T_m(t)
  double delay_slave = 0.0;   // T_s(t)
  double energy_master = 0.0;             // r^T M r / 2 + theta~^T Gamma^-1 theta~ / 2
  std::vector<double> energy_slave;
  JointVector e_master = JointVector::Zero();
  JointVector x_master = JointVector::Zero();
  JointVector xd_master = JointVector::Zero();
  std::vector<JointVector> e_slave, x_slave, xd_slave;
  // Communication scheme: x minus the node's last sample, before and after any
  // sampling performed at t.
  JointVector deviation_master_before = JointVector::Zero();
  JointVector deviation_master_after = JointVector::Zero();
  std::vector<JointVector> deviation_slave_before, deviation_slave_after;
};

/// Transmission errors eta_i(s_k) (before the grant) and the granted index.
struct ResetEvent {
  std::vector<JointVector> eta;
  int granted = -1;
};

struct LyapunovRecord {
  double t = 0.0;
  bool reset = false;
  LyapunovBreakdown before;  // V(t^-); equals after when no reset happens at t
  LyapunovBreakdown after;
};

struct ResetReport {
  bool preconditions_hold = false;
  bool passed = false;
  std::size_t instants = 0;
  double max_jump = 0.0;  // max of V(s+) - V(s-)
  double min_jump = 0.0;  // min of V(s+) - V(s-)
  double at = 0.0;
  std::string note;
};

struct DecayReport {
  bool preconditions_hold = false;
  bool passed = false;
  double max_increase = 0.0;  // max per-step increase of V between instants
  double at = 0.0;
  std::string note;
};

/// Evaluates V (periodic scheme) or V' (event-triggered communication) along a run.
/// Feed one sample per integration step in time order, starting at t = 0.
class LyapunovMonitor {
 public:
  LyapunovMonitor(StabilityProblem problem, DecisionVars dv, std::vector<JointVector> offsets);

  /// Appends the sample; when reset is non-null a transmission instant occurs at s.t
  /// and both one-sided values are recorded. The first sample must carry a reset.
  const LyapunovRecord& advance(const LyapunovSample& s, const ResetEvent* reset);

  /// Rewrites the U coefficients once every transmission instant is known.
  void finalize();

  const std::vector<LyapunovRecord>& records() const { return records_; }
  /// Omega_i < 0 for every i (reset non-growth precondition).
  bool reset_preconditions() const { return omega_ok_; }
  /// Omega_i and the scheme certificate negative definite (decay precondition).
  bool decay_preconditions() const { return omega_ok_ && certificate_ok_; }

  ResetReport reset_report(double tol = 1e-6) const;
  DecayReport decay_report(double tol = 1e-6) const;
  /// Smallest stored component over the run.
  double min_component() const;

 private:
  LyapunovBreakdown evaluate(const LyapunovSample& s, double u_coefficient) const;
  double segment_coefficient(double t) const;

  StabilityProblem problem_;
  DecisionVars dv_;
  std::vector<JointVector> offsets_;
  bool omega_ok_ = false;
  bool certificate_ok_ = false;

  SampledSignal xd_master_;
  std::vector<SampledSignal> xd_slave_;
  SampledSignal dev_master_;
  std::vector<SampledSignal> dev_slave_;
  StepSignal masked_eta_;

  std::vector<JointVector> eta_;
  int granted_ = -1;
  double segment_start_ = 0.0;
  std::vector<double> sampling_integral_;
  std::vector<double> last_p_quad_;
  std::vector<double> instants_;
  std::vector<LyapunovRecord> records_;
};

}  // namespace todsim
