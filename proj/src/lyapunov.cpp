#include "todsim/lyapunov.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace todsim {

void SampledSignal::push(double t, double value) {
  if (!times_.empty() && t < times_.back()) throw std::invalid_argument("sampled signal: time went backwards");
  times_.push_back(t);
  values_.push_back(value);
}

void SampledSignal::clear() {
  times_.clear();
  values_.clear();
}

double SampledSignal::value_at(double t) const {
  if (times_.empty() || t < times_.front()) return 0.0;
  if (t >= times_.back()) return values_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - times_.begin());
  const double t0 = times_[j - 1];
  const double t1 = times_[j];
  const double a = (t - t0) / (t1 - t0);
  return (1.0 - a) * values_[j - 1] + a * values_[j];
}

template <typename Weight>
double SampledSignal::trapezoid(double lo, double hi, Weight weight) const {
  if (times_.empty() || hi <= lo) return 0.0;
  const double start = std::max(lo, times_.front());
  if (start >= hi) return 0.0;
  double prev_t = start;
  double prev_f = weight(start) * value_at(start);
  double sum = 0.0;
  auto it = std::upper_bound(times_.begin(), times_.end(), start);
  for (; it != times_.end() && *it <= hi; ++it) {
    const std::size_t j = static_cast<std::size_t>(it - times_.begin());
    const double f = weight(*it) * values_[j];
    sum += 0.5 * (*it - prev_t) * (prev_f + f);
    prev_t = *it;
    prev_f = f;
  }
  if (hi > prev_t) {
    const double f = weight(hi) * value_at(hi);
    sum += 0.5 * (hi - prev_t) * (prev_f + f);
  }
  return sum;
}

double SampledSignal::integral(double lo, double hi) const {
  return trapezoid(lo, hi, [](double) { return 1.0; });
}

double SampledSignal::ramp_integral(double lo, double hi) const {
  return trapezoid(lo, hi, [lo](double s) { return s - lo; });
}

void StepSignal::set(double t, double value) {
  if (!starts_.empty() && t < starts_.back()) throw std::invalid_argument("step signal: time went backwards");
  if (!starts_.empty() && t == starts_.back()) {
    values_.back() = value;
    return;
  }
  starts_.push_back(t);
  values_.push_back(value);
}

double StepSignal::value_at(double t) const {
  const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  if (it == starts_.begin()) return before_;
  return values_[static_cast<std::size_t>(it - starts_.begin()) - 1];
}

double StepSignal::integral(double lo, double hi) const {
  if (hi <= lo) return 0.0;
  double sum = 0.0;
  double cursor = lo;
  auto it = std::upper_bound(starts_.begin(), starts_.end(), lo);
  double current = value_at(lo);
  for (; it != starts_.end() && *it < hi; ++it) {
    sum += (*it - cursor) * current;
    cursor = *it;
    current = values_[static_cast<std::size_t>(it - starts_.begin())];
  }
  return sum + (hi - cursor) * current;
}

double LyapunovBreakdown::min_component() const {
  return std::min({adaptive, velocity, coupling, tracking, delay_master, delay_slave, deviation, transmission, sampling,
                   eta});
}

namespace {

double quad(const JointVector& v, const Eigen::MatrixXd& W) { return v.dot(W * v); }

}  // namespace

LyapunovMonitor::LyapunovMonitor(StabilityProblem problem, DecisionVars dv, std::vector<JointVector> offsets)
    : problem_(std::move(problem)), dv_(std::move(dv)), offsets_(std::move(offsets)) {
  problem_.validate();
  dv_.validate();
  const auto n = static_cast<std::size_t>(problem_.slaves);
  if (dv_.block() != kJoints || dv_.slaves() != n) throw std::invalid_argument("lyapunov monitor: decision vars do not match the problem");
  if (offsets_.size() != n) throw std::invalid_argument("lyapunov monitor: one formation offset per slave required");
  if (!(problem_.h > 0.0)) throw std::invalid_argument("lyapunov monitor: h must be positive");

  omega_ok_ = true;
  certificate_ok_ = true;
  for (int i = 0; i < problem_.slaves; ++i) {
    if (problem_.slaves > 1) omega_ok_ = omega_ok_ && check_nd(assemble_omega(problem_, dv_, i)).negative_definite;
    certificate_ok_ = certificate_ok_ && check_nd(assemble_certificate(problem_, dv_, i)).negative_definite;
  }
  xd_slave_.resize(n);
  dev_slave_.resize(n);
  sampling_integral_.assign(n, 0.0);
  last_p_quad_.assign(n, 0.0);
  eta_.assign(n, JointVector::Zero());
}

LyapunovBreakdown LyapunovMonitor::evaluate(const LyapunovSample& s, double u_coefficient) const {
  const auto& pb = problem_;
  const double N = pb.slaves;
  const double bm = pb.master.beta;
  const double t = s.t;
  LyapunovBreakdown b;

  b.adaptive = N / (2.0 * pb.master.lambda) * s.energy_master;
  b.velocity = 0.5 * N * s.xd_master.squaredNorm();
  b.tracking = 0.5 * N * pb.master.kappa * s.e_master.squaredNorm();
  for (int i = 0; i < pb.slaves; ++i) {
    const auto& g = pb.slave[i];
    const auto k = static_cast<std::size_t>(i);
    b.adaptive += 0.5 * bm / (g.beta * g.lambda) * s.energy_slave[k];
    b.velocity += 0.5 * bm / g.beta * s.xd_slave[k].squaredNorm();
    b.coupling += 0.5 * bm * (s.x_master - (s.x_slave[k] - offsets_[k])).squaredNorm();
    b.tracking += 0.5 * bm * g.kappa / g.beta * s.e_slave[k].squaredNorm();
  }

  const bool periodic = pb.scheme == Scheme::A;
  const double Hm = periodic ? pb.hm_master() : pb.d_m;
  const double Hs = periodic ? pb.hm_slave() : pb.d_s;
  b.delay_master = N * xd_master_.ramp_integral(t - Hm, t);
  for (const auto& sig : xd_slave_) b.delay_slave += sig.ramp_integral(t - Hs, t);

  if (!periodic) {
    b.deviation = N * bm / (2.0 * (1.0 - pb.p_m)) * dev_master_.integral(t - s.delay_master, t);
    for (const auto& sig : dev_slave_) b.deviation += bm / (2.0 * (1.0 - pb.p_s)) * sig.integral(t - s.delay_slave, t);
  }

  b.transmission = masked_eta_.integral(t - s.delay_slave, t) / (pb.h * pb.h);
  for (double v : sampling_integral_) b.sampling += pb.h * v;

  for (int i = 0; i < pb.slaves; ++i) {
    const auto k = static_cast<std::size_t>(i);
    b.q_quad += quad(eta_[k], dv_.Q[k]);
    if (i != granted_) b.u_quad += quad(eta_[k], dv_.U[k]);
  }
  b.u_coefficient = u_coefficient;
  b.eta = b.q_quad + u_coefficient * b.u_quad;
  return b;
}

const LyapunovRecord& LyapunovMonitor::advance(const LyapunovSample& s, const ResetEvent* reset) {
  const auto n = static_cast<std::size_t>(problem_.slaves);
  if (s.energy_slave.size() != n || s.e_slave.size() != n || s.x_slave.size() != n || s.xd_slave.size() != n) {
    throw std::invalid_argument("lyapunov sample: slave vectors must have N entries");
  }
  const bool comm = problem_.scheme == Scheme::B;
  if (comm && (s.deviation_slave_before.size() != n || s.deviation_slave_after.size() != n)) {
    throw std::invalid_argument("lyapunov sample: deviation vectors must have N entries");
  }
  if (records_.empty() && reset == nullptr) throw std::logic_error("lyapunov monitor: the first sample must be a transmission instant");
  if (!records_.empty() && s.t <= records_.back().t) throw std::invalid_argument("lyapunov monitor: time must increase");

  const double dt = records_.empty() ? 0.0 : s.t - records_.back().t;
  xd_master_.push(s.t, quad(s.xd_master, dv_.R_m));
  for (std::size_t k = 0; k < n; ++k) {
    xd_slave_[k].push(s.t, quad(s.xd_slave[k], dv_.R_s[k]));
    const double p_now = quad(s.xd_slave[k], dv_.P[k]);
    if (!records_.empty()) sampling_integral_[k] += 0.5 * dt * (last_p_quad_[k] + p_now);
    last_p_quad_[k] = p_now;
  }
  if (comm) {
    dev_master_.push(s.t, s.deviation_master_before.squaredNorm());
    dev_master_.push(s.t, s.deviation_master_after.squaredNorm());
    for (std::size_t k = 0; k < n; ++k) {
      dev_slave_[k].push(s.t, s.deviation_slave_before[k].squaredNorm());
      dev_slave_[k].push(s.t, s.deviation_slave_after[k].squaredNorm());
    }
  }

  LyapunovRecord rec;
  rec.t = s.t;
  rec.reset = reset != nullptr;
  if (reset != nullptr) {
    if (reset->eta.size() != n) throw std::invalid_argument("reset event: eta must have N entries");
    const bool first = records_.empty();
    if (!first) rec.before = evaluate(s, -1.0);
    eta_ = reset->eta;
    granted_ = reset->granted;
    segment_start_ = s.t;
    std::fill(sampling_integral_.begin(), sampling_integral_.end(), 0.0);
    instants_.push_back(s.t);
    double masked = 0.0;
    double unmasked = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double z = quad(eta_[k], dv_.Z[k]);
      unmasked += z;
      if (static_cast<int>(k) != granted_) masked += z;
    }
    if (first) masked_eta_ = StepSignal(unmasked);
    masked_eta_.set(s.t, masked);
    rec.after = evaluate(s, 0.0);
    if (first) rec.before = rec.after;
  } else {
    rec.after = evaluate(s, (segment_start_ - s.t) / problem_.h);
    rec.before = rec.after;
  }
  records_.push_back(rec);
  return records_.back();
}

double LyapunovMonitor::segment_coefficient(double t) const {
  const auto it = std::upper_bound(instants_.begin(), instants_.end(), t);
  if (it == instants_.begin()) return 0.0;
  const double sk = *(it - 1);
  const double next = it == instants_.end() ? sk + problem_.h : *it;
  return (sk - t) / (next - sk);
}

void LyapunovMonitor::finalize() {
  for (auto& rec : records_) {
    auto& a = rec.after;
    a.u_coefficient = segment_coefficient(rec.t);
    a.eta = a.q_quad + a.u_coefficient * a.u_quad;
    if (!rec.reset) rec.before = a;
  }
}

ResetReport LyapunovMonitor::reset_report(double tol) const {
  ResetReport rep;
  rep.preconditions_hold = reset_preconditions();
  rep.max_jump = -std::numeric_limits<double>::infinity();
  rep.min_jump = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < records_.size(); ++j) {
    const auto& r = records_[j];
    if (!r.reset) continue;
    ++rep.instants;
    const double jump = r.after.total() - r.before.total();
    rep.min_jump = std::min(rep.min_jump, jump);
    if (jump > rep.max_jump) {
      rep.max_jump = jump;
      rep.at = r.t;
    }
  }
  if (rep.instants == 0) rep.max_jump = rep.min_jump = 0.0;
  if (!rep.preconditions_hold) {
    rep.note = "precondition violated: Omega_i is not negative definite, non-growth is not claimed";
    return rep;
  }
  rep.passed = rep.max_jump <= tol;
  if (!rep.passed) rep.note = "V grew at a transmission instant";
  return rep;
}

DecayReport LyapunovMonitor::decay_report(double tol) const {
  DecayReport rep;
  rep.preconditions_hold = decay_preconditions();
  rep.max_increase = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < records_.size(); ++j) {
    const double inc = records_[j].before.total() - records_[j - 1].after.total();
    if (inc > rep.max_increase) {
      rep.max_increase = inc;
      rep.at = records_[j].t;
    }
  }
  if (records_.size() < 2) rep.max_increase = 0.0;
  if (!rep.preconditions_hold) {
    rep.note = "precondition violated: certificate LMIs do not hold, decay is not claimed";
    return rep;
  }
  rep.passed = rep.max_increase <= tol;
  if (!rep.passed) rep.note = "V increased between transmission instants";
  return rep;
}

double LyapunovMonitor::min_component() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : records_) m = std::min({m, r.before.min_component(), r.after.min_component()});
  return records_.empty() ? 0.0 : m;
}

}  // namespace todsim
