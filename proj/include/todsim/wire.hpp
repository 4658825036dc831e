#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "todsim/simulation.hpp"

namespace todsim {

inline constexpr int kWireVersion = 1;
inline constexpr const char* kServiceVersion = "1.0.0";

/// Every frame is one compact JSON object carrying "v" (wire version) and "type".
///
/// Server to client:
///   {"v":1,"type":"hello","version":"1.0.0","scheme":"A","slaves":3}
///   {"v":1,"type":"snapshot","t":..,"scheme":"A","paused":false,"certificate_violated":false,
///    "q":[[q0,q1],..],"x":[[..],..],"endpoint":[[ex,ey],..],"granted":i,"eta_norms":[..],
///    "trigger_flash":[..],"sync_error":..}          manipulator 0 is the master
///   {"v":1,"type":"ack","command":"<kind>"}
///   {"v":1,"type":"error","command":"<kind or empty>","reason":".."}
///
/// Client to server:
///   {"v":1,"type":"set_target","x":..,"y":..}
///   {"v":1,"type":"pause"} / {"v":1,"type":"resume"} / {"v":1,"type":"reset_scenario"}
///   {"v":1,"type":"set_delay","d_m":..,"d_s":..}
///   {"v":1,"type":"set_gain","path":"master.kappa","value":..}
class WireError : public std::runtime_error {
 public:
  WireError(std::string command, const std::string& reason) : std::runtime_error(reason), command_(std::move(command)) {}
  const std::string& command() const { return command_; }

 private:
  std::string command_;
};

enum class CommandKind { SetTarget, Pause, Resume, SetDelay, SetGain, ResetScenario };

const char* to_string(CommandKind kind);

struct Command {
  CommandKind kind = CommandKind::Pause;
  Eigen::Vector2d target = Eigen::Vector2d::Zero();
  double d_m = 0.0;
  double d_s = 0.0;
  std::string path;
  double value = 0.0;
};

/// Throws WireError on malformed JSON, a wrong version, an unknown type or missing fields.
Command parse_command(const std::string& text);
std::string encode_command(const Command& command);

std::string encode_snapshot(const Snapshot& snapshot);
std::string encode_hello(Scheme scheme, int slaves);
std::string encode_ack(CommandKind kind);
std::string encode_error(const std::string& command, const std::string& reason);

}  // namespace todsim
