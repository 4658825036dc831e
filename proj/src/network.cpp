#include "todsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace todsim {

void DelayProfile::validate() const {
  if (!(d >= 0.0) || !std::isfinite(d)) throw std::invalid_argument("delay: d must be non-negative");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("delay: rho must lie in [0, 1)");
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw std::invalid_argument("delay: omega must be non-negative");
  if (!(derivative_bound() < 1.0)) throw std::invalid_argument("delay: derivative bound d*rho*omega/2 must be < 1");
}

double DelayProfile::delay(double t) const { return 0.5 * d * (1.0 + rho * std::sin(omega * t)); }

double DelayProfile::arrival_time(double t_send) const {
  // a = t_send + T(a) is a contraction with rate derivative_bound() < 1.
  double a = t_send + delay(t_send);
  for (int i = 0; i < 200; ++i) {
    const double next = t_send + delay(a);
    if (std::abs(next - a) <= 1e-15 * std::max(1.0, std::abs(a))) return next;
    a = next;
  }
  return a;
}

DelayChannel::DelayChannel(DelayProfile profile) : profile_(profile) { profile_.validate(); }

Message DelayChannel::send(int source, const JointVector& value, double t_send) {
  if (t_send < last_send_) throw std::invalid_argument("channel: send times must be non-decreasing");
  Message msg{t_send, profile_.arrival_time(t_send), source, value};
  if (msg.arrival < last_arrival_) {
    if (!reprofiled_) throw std::logic_error("channel: arrival precedes previous arrival (misconfigured delay profile)");
    msg.arrival = last_arrival_;
  }
  last_send_ = t_send;
  last_arrival_ = msg.arrival;
  queue_.push_back(msg);
  ++sent_count_;
  return msg;
}

std::vector<Message> DelayChannel::deliver_until(double t) {
  std::vector<Message> out;
  while (!queue_.empty() && queue_.front().arrival <= t) {
    out.push_back(queue_.front());
    queue_.pop_front();
  }
  if (queue_.empty()) reprofiled_ = false;
  return out;
}

void DelayChannel::set_profile(const DelayProfile& profile) {
  profile.validate();
  profile_ = profile;
  reprofiled_ = true;
}

void ZohBuffer::push(const Message& msg) {
  if (!history_.empty() && msg.arrival < history_.back().arrival) {
    throw std::logic_error("zoh: arrivals must be pushed in order");
  }
  history_.push_back(msg);
}

JointVector ZohBuffer::read(double t) const {
  auto it = std::upper_bound(history_.begin(), history_.end(), t,
                             [](double time, const Message& m) { return time < m.arrival; });
  if (it == history_.begin()) return initial_;
  return std::prev(it)->value;
}

TodArbiterState TodArbiterState::create(std::size_t slaves, const JointMatrix& weight) {
  if (slaves == 0) throw std::invalid_argument("arbiter: need at least one slave");
  TodArbiterState s;
  s.last_sent.assign(slaves, JointVector::Zero());
  s.eta.assign(slaves, JointVector::Zero());
  s.weights.assign(slaves, weight);
  return s;
}

double weighted_error(const JointVector& eta, const JointMatrix& Q) { return eta.dot(Q * eta); }

std::size_t select_max_weighted(std::span<const JointVector> eta, std::span<const JointMatrix> weights) {
  if (eta.empty() || eta.size() != weights.size()) throw std::invalid_argument("tod: size mismatch");
  std::size_t best = 0;
  double best_value = weighted_error(eta[0], weights[0]);
  for (std::size_t i = 1; i < eta.size(); ++i) {
    const double v = weighted_error(eta[i], weights[i]);
    if (v > best_value) {
      best = i;
      best_value = v;
    }
  }
  return best;
}

std::vector<JointVector> reset_eta(std::span<const JointVector> eta_prev, int i_star_prev,
                                   std::span<const JointVector> x_prev, std::span<const JointVector> x_now) {
  if (eta_prev.size() != x_prev.size() || x_prev.size() != x_now.size()) {
    throw std::invalid_argument("reset_eta: size mismatch");
  }
  std::vector<JointVector> out(eta_prev.size());
  for (std::size_t i = 0; i < eta_prev.size(); ++i) {
    const JointVector carried = static_cast<int>(i) == i_star_prev ? JointVector::Zero() : eta_prev[i];
    out[i] = carried + x_prev[i] - x_now[i];
  }
  return out;
}

namespace {

void refresh_eta(TodArbiterState& arbiter, std::span<const JointVector> current) {
  if (current.size() != arbiter.size()) throw std::invalid_argument("tod: expected one value per slave");
  if (arbiter.previous_samples.empty()) {
    for (std::size_t i = 0; i < current.size(); ++i) arbiter.eta[i] = arbiter.last_sent[i] - current[i];
  } else {
    arbiter.eta = reset_eta(arbiter.eta, arbiter.granted, arbiter.previous_samples, current);
  }
}

}  // namespace

std::size_t tod_select(TodArbiterState& arbiter, std::span<const JointVector> current) {
  refresh_eta(arbiter, current);
  return select_max_weighted(arbiter.eta, arbiter.weights);
}

std::size_t rr_advance(TodArbiterState& arbiter, std::span<const JointVector> current, std::uint64_t counter) {
  refresh_eta(arbiter, current);
  return rr_select(counter, arbiter.size());
}

void tod_commit(TodArbiterState& arbiter, std::size_t i_star, std::span<const JointVector> current) {
  if (i_star >= arbiter.size() || current.size() != arbiter.size()) throw std::invalid_argument("tod_commit: bad index");
  arbiter.last_sent[i_star] = current[i_star];
  arbiter.previous_samples.assign(current.begin(), current.end());
  arbiter.granted = static_cast<int>(i_star);
}

double effective_delay_bound(double h, double d) {
  if (!(h >= 0.0) || !(d >= 0.0)) throw std::invalid_argument("effective_delay_bound: negative input");
  return h + d;
}

std::size_t rr_select(std::uint64_t counter, std::size_t slaves) {
  if (slaves == 0) throw std::invalid_argument("rr_select: need at least one slave");
  return static_cast<std::size_t>(counter % slaves);
}

}  // namespace todsim
