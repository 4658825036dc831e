#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "todsim/simulation.hpp"

namespace todsim {

/// CSV columns, in order:
///   t, instant, granted, forward_send, forward_age,
///   eta<i>_0, eta<i>_1                         for slaves i = 1..N (empty off-instant)
///   <z>_q0 <z>_q1 <z>_qd0 <z>_qd1 <z>_x0 <z>_x1 <z>_xd0 <z>_xd1 <z>_tau0 <z>_tau1
///   <z>_th0 .. <z>_th<P-1>, <z>_ctrl, <z>_sample   for z = m, s1, .., sN
/// Reals are printed with 17 significant digits so a read-back is bit-exact.
void write_trace_csv(std::ostream& out, const Trace& trace);
void write_trace_csv(const std::filesystem::path& path, const Trace& trace);

/// Throws std::runtime_error on malformed input.
Trace read_trace_csv(std::istream& in, Scheme scheme);
Trace read_trace_csv(const std::filesystem::path& path, Scheme scheme);

void write_metrics(std::ostream& out, const Metrics& metrics);
void write_metrics(const std::filesystem::path& path, const Metrics& metrics);
std::map<std::string, std::string> read_metrics(const std::filesystem::path& path);

}  // namespace todsim
