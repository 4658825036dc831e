#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "todsim/wire.hpp"

using namespace todsim;
using nlohmann::json;

namespace {

std::string reason_of(const std::string& text, std::string* command = nullptr) {
  try {
    parse_command(text);
  } catch (const WireError& e) {
    if (command) *command = e.command();
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Wire, CommandsRoundTrip) {
  Command target;
  target.kind = CommandKind::SetTarget;
  target.target = {0.25, -1.5};
  Command delay;
  delay.kind = CommandKind::SetDelay;
  delay.d_m = 0.07;
  delay.d_s = 0.03;
  Command gain;
  gain.kind = CommandKind::SetGain;
  gain.path = "master.kappa";
  gain.value = 42.5;
  Command pause, resume, reset;
  pause.kind = CommandKind::Pause;
  resume.kind = CommandKind::Resume;
  reset.kind = CommandKind::ResetScenario;
  for (const Command& c : {target, delay, gain, pause, resume, reset}) {
    const Command back = parse_command(encode_command(c));
    EXPECT_EQ(back.kind, c.kind);
    EXPECT_EQ(back.target, c.target);
    EXPECT_EQ(back.d_m, c.d_m);
    EXPECT_EQ(back.d_s, c.d_s);
    EXPECT_EQ(back.path, c.path);
    EXPECT_EQ(back.value, c.value);
  }
}

TEST(Wire, AcceptsIntegerFields) {
  const Command c = parse_command(R"({"v":1,"type":"set_target","x":1,"y":0})");
  EXPECT_EQ(c.target, Eigen::Vector2d(1.0, 0.0));
}

TEST(Wire, RejectsMalformedFrames) {
  EXPECT_NE(reason_of("{not json"), "");
  EXPECT_NE(reason_of("[1,2]"), "");
  EXPECT_EQ(reason_of(R"({"type":"pause"})"), "unsupported wire version");
  EXPECT_EQ(reason_of(R"({"v":2,"type":"pause"})"), "unsupported wire version");
  EXPECT_EQ(reason_of(R"({"v":"1","type":"pause"})"), "unsupported wire version");
  EXPECT_EQ(reason_of(R"({"v":1})"), "missing 'type'");

  std::string command;
  EXPECT_EQ(reason_of(R"({"v":1,"type":"teleport"})", &command), "unknown command type 'teleport'");
  EXPECT_EQ(command, "teleport");
  EXPECT_EQ(reason_of(R"({"v":1,"type":"set_target","x":1})", &command), "missing numeric field 'y'");
  EXPECT_EQ(command, "set_target");
  EXPECT_EQ(reason_of(R"({"v":1,"type":"set_delay","d_m":"0.1","d_s":0.1})"), "missing numeric field 'd_m'");
  EXPECT_EQ(reason_of(R"({"v":1,"type":"set_gain","value":3})"), "missing string field 'path'");
  EXPECT_EQ(reason_of(R"({"v":1,"type":"set_gain","path":"kappa"})"), "missing numeric field 'value'");
}

TEST(Wire, SnapshotCarriesAllFields) {
  Snapshot s;
  s.t = 1.25;
  s.scheme = Scheme::B;
  s.q = {JointVector(0.1, 0.2), JointVector(0.3, 0.4)};
  s.x = {JointVector(0.5, 0.6), JointVector(0.7, 0.8)};
  s.endpoint = {Eigen::Vector2d(1.0, 2.0), Eigen::Vector2d(3.0, 4.0)};
  s.granted = 0;
  s.eta_norms = {0.01};
  s.trigger_flash = {true, false};
  s.sync_error = 0.002;
  s.paused = true;
  s.certificate_violated = true;
  const json o = json::parse(encode_snapshot(s));
  EXPECT_EQ(o.at("v"), kWireVersion);
  EXPECT_EQ(o.at("type"), "snapshot");
  EXPECT_EQ(o.at("t"), 1.25);
  EXPECT_EQ(o.at("scheme"), "B");
  EXPECT_EQ(o.at("paused"), true);
  EXPECT_EQ(o.at("certificate_violated"), true);
  EXPECT_EQ(o.at("q"), json::parse("[[0.1,0.2],[0.3,0.4]]"));
  EXPECT_EQ(o.at("x")[1][1], 0.8);
  EXPECT_EQ(o.at("endpoint")[1], json::parse("[3.0,4.0]"));
  EXPECT_EQ(o.at("granted"), 0);
  EXPECT_EQ(o.at("eta_norms"), json::parse("[0.01]"));
  EXPECT_EQ(o.at("trigger_flash"), json::parse("[true,false]"));
  EXPECT_EQ(o.at("sync_error"), 0.002);
}

TEST(Wire, ServerFrames) {
  const json hello = json::parse(encode_hello(Scheme::A, 3));
  EXPECT_EQ(hello, json::parse(R"({"v":1,"type":"hello","version":"1.0.0","scheme":"A","slaves":3})"));
  EXPECT_EQ(json::parse(encode_ack(CommandKind::SetGain)), json::parse(R"({"v":1,"type":"ack","command":"set_gain"})"));
  const json err = json::parse(encode_error("set_delay", "bad \"quote\""));
  EXPECT_EQ(err.at("type"), "error");
  EXPECT_EQ(err.at("command"), "set_delay");
  EXPECT_EQ(err.at("reason"), "bad \"quote\"");
}
