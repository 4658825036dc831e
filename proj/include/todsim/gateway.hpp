#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "todsim/scenario.hpp"
#include "todsim/wire.hpp"

namespace todsim {

struct GatewayOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  double speed = 1.0;          // simulated seconds per wall-clock second
  double publish_hz = 60.0;
  double spring_stiffness = 20.0;    // N·m per m for set_target
  std::size_t client_queue = 8;      // snapshots buffered per client, oldest dropped
  std::size_t inbox_capacity = 256;  // pending commands, extra ones are rejected

  /// Throws ScenarioError on invalid values.
  void validate() const;
};

/// Parses "host:port" (or ":port" / "port") into the address and port fields.
void parse_bind(const std::string& text, GatewayOptions& options);

/// Runs a scenario in soft real time and exposes it over HTTP:
///   GET /healthz  -> {"version":..,"scheme":..}
///   /ws           -> websocket streaming snapshots and accepting commands (see wire.hpp)
class Gateway {
 public:
  Gateway(Scenario scenario, GatewayOptions options);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds and starts the network and simulation threads. Throws std::runtime_error on bind failure.
  void start();
  /// Stops both threads; safe to call more than once.
  void stop();

  unsigned short port() const;
  /// Number of snapshots dropped because a client fell behind.
  std::size_t dropped_snapshots() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace todsim
