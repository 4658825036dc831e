#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "todsim/dynamics.hpp"

namespace todsim {

/// Time-varying delay T(t) = d/2 (1 + rho sin(omega t)), bounded by d with |dT/dt| <= d rho omega / 2.
struct DelayProfile {
  double d = 0.05;
  double rho = 0.5;
  double omega = 10.0;

  /// Requires d >= 0, 0 <= rho < 1, omega >= 0 and a derivative bound below one.
  void validate() const;

  double delay(double t) const;
  double derivative_bound() const { return 0.5 * d * rho * omega; }
  double min_delay() const { return 0.5 * d * (1.0 - rho); }
  double max_delay() const { return 0.5 * d * (1.0 + rho); }

  /// Earliest receive time a with a - T(a) = t_send: the receiver at time t holds
  /// exactly the samples taken at or before t - T(t).
  double arrival_time(double t_send) const;
};

struct Message {
  double sent = 0.0;
  double arrival = 0.0;
  int source = -1;
  JointVector value = JointVector::Zero();
};

/// FIFO link with a delay profile; arrival times never decrease.
class DelayChannel {
 public:
  explicit DelayChannel(DelayProfile profile = {});

  /// Throws std::invalid_argument if t_send precedes the previous send, std::logic_error
  /// if the computed arrival would precede the previous arrival.
  Message send(int source, const JointVector& value, double t_send);

  /// Pops every message whose arrival time is <= t, in arrival order.
  std::vector<Message> deliver_until(double t);

  /// Swaps the delay profile for future sends. Messages sent after a swap never
  /// overtake messages already in flight.
  void set_profile(const DelayProfile& profile);

  const DelayProfile& profile() const { return profile_; }
  std::size_t in_flight() const { return queue_.size(); }
  std::size_t sent_count() const { return sent_count_; }

 private:
  DelayProfile profile_;
  std::deque<Message> queue_;
  double last_send_ = -1e300;
  double last_arrival_ = -1e300;
  bool reprofiled_ = false;
  std::size_t sent_count_ = 0;
};

/// Zero-order hold at a receiver: the newest delivered payload, or the initial
/// value before the first arrival.
class ZohBuffer {
 public:
  explicit ZohBuffer(JointVector initial = JointVector::Zero()) : initial_(initial) {}

  void push(const Message& msg);
  JointVector read(double t) const;
  const JointVector& latest() const { return history_.empty() ? initial_ : history_.back().value; }
  /// Send time of the payload currently held; nullopt-like -inf before the first arrival.
  double latest_stamp() const { return history_.empty() ? -1e300 : history_.back().sent; }
  std::size_t arrivals() const { return history_.size(); }

 private:
  JointVector initial_;
  std::vector<Message> history_;
};

/// Try-Once-Discard bookkeeping for the shared slave-to-master channel.
struct TodArbiterState {
  std::vector<JointVector> last_sent;         // value last granted per slave (starts at 0)
  std::vector<JointVector> eta;               // transmission errors at the latest instant
  std::vector<JointMatrix> weights;           // Q_i
  std::vector<JointVector> previous_samples;  // slave values at the previous instant
  int granted = -1;

  static TodArbiterState create(std::size_t slaves, const JointMatrix& weight = JointMatrix::Identity());
  std::size_t size() const { return last_sent.size(); }
};

double weighted_error(const JointVector& eta, const JointMatrix& Q);

/// Index maximising eta_i^T Q_i eta_i, lowest index on ties.
std::size_t select_max_weighted(std::span<const JointVector> eta, std::span<const JointMatrix> weights);

/// eta_i(s_{k+1}) = (1 - [i == i*]) eta_i(s_k) + x_i(s_k) - x_i(s_{k+1}).
std::vector<JointVector> reset_eta(std::span<const JointVector> eta_prev, int i_star_prev,
                                   std::span<const JointVector> x_prev, std::span<const JointVector> x_now);

/// Updates the arbiter's transmission errors for the current instant and returns the
/// TOD winner. The first instant uses eta_i = last_sent_i - x_i; later instants use
/// the reset recursion, which equals the same quantity algebraically.
std::size_t tod_select(TodArbiterState& arbiter, std::span<const JointVector> current);

/// Updates transmission errors like tod_select but grants access round-robin.
std::size_t rr_advance(TodArbiterState& arbiter, std::span<const JointVector> current, std::uint64_t counter);

/// Records the grant: last_sent[i*] = current[i*], others held.
void tod_commit(TodArbiterState& arbiter, std::size_t i_star, std::span<const JointVector> current);

/// Upper bound h + d on the combined sample-and-hold plus network delay.
double effective_delay_bound(double h, double d);

std::size_t rr_select(std::uint64_t counter, std::size_t slaves);

}  // namespace todsim
