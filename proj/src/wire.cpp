#include "todsim/wire.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace todsim {

namespace {

using nlohmann::json;

json header(const char* type) { return json{{"v", kWireVersion}, {"type", type}}; }

json pair(const Eigen::Vector2d& v) { return json::array({v[0], v[1]}); }

double number(const json& o, const char* key, const std::string& kind) {
  const auto it = o.find(key);
  if (it == o.end() || !it->is_number()) throw WireError(kind, std::string("missing numeric field '") + key + "'");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw WireError(kind, std::string("field '") + key + "' must be finite");
  return v;
}

}  // namespace

const char* to_string(CommandKind kind) {
  switch (kind) {
    case CommandKind::SetTarget: return "set_target";
    case CommandKind::Pause: return "pause";
    case CommandKind::Resume: return "resume";
    case CommandKind::SetDelay: return "set_delay";
    case CommandKind::SetGain: return "set_gain";
    case CommandKind::ResetScenario: return "reset_scenario";
  }
  return "?";
}

Command parse_command(const std::string& text) {
  const json o = json::parse(text, nullptr, false);
  if (o.is_discarded() || !o.is_object()) throw WireError("", "frame is not a JSON object");
  const auto v = o.find("v");
  if (v == o.end() || !v->is_number_integer() || v->get<int>() != kWireVersion) {
    throw WireError("", "unsupported wire version");
  }
  const auto type = o.find("type");
  if (type == o.end() || !type->is_string()) throw WireError("", "missing 'type'");
  const std::string kind = type->get<std::string>();

  Command c;
  if (kind == "set_target") {
    c.kind = CommandKind::SetTarget;
    c.target = {number(o, "x", kind), number(o, "y", kind)};
  } else if (kind == "pause") {
    c.kind = CommandKind::Pause;
  } else if (kind == "resume") {
    c.kind = CommandKind::Resume;
  } else if (kind == "reset_scenario") {
    c.kind = CommandKind::ResetScenario;
  } else if (kind == "set_delay") {
    c.kind = CommandKind::SetDelay;
    c.d_m = number(o, "d_m", kind);
    c.d_s = number(o, "d_s", kind);
  } else if (kind == "set_gain") {
    c.kind = CommandKind::SetGain;
    const auto path = o.find("path");
    if (path == o.end() || !path->is_string()) throw WireError(kind, "missing string field 'path'");
    c.path = path->get<std::string>();
    c.value = number(o, "value", kind);
  } else {
    throw WireError(kind, "unknown command type '" + kind + "'");
  }
  return c;
}

std::string encode_command(const Command& c) {
  json o = header(to_string(c.kind));
  switch (c.kind) {
    case CommandKind::SetTarget:
      o["x"] = c.target[0];
      o["y"] = c.target[1];
      break;
    case CommandKind::SetDelay:
      o["d_m"] = c.d_m;
      o["d_s"] = c.d_s;
      break;
    case CommandKind::SetGain:
      o["path"] = c.path;
      o["value"] = c.value;
      break;
    default:
      break;
  }
  return o.dump();
}

std::string encode_snapshot(const Snapshot& s) {
  json o = header("snapshot");
  o["t"] = s.t;
  o["scheme"] = to_string(s.scheme);
  o["paused"] = s.paused;
  o["certificate_violated"] = s.certificate_violated;
  json q = json::array(), x = json::array(), ep = json::array();
  for (const auto& v : s.q) q.push_back(pair(v));
  for (const auto& v : s.x) x.push_back(pair(v));
  for (const auto& v : s.endpoint) ep.push_back(pair(v));
  o["q"] = std::move(q);
  o["x"] = std::move(x);
  o["endpoint"] = std::move(ep);
  o["granted"] = s.granted;
  o["eta_norms"] = s.eta_norms;
  json flash = json::array();
  for (bool f : s.trigger_flash) flash.push_back(f);
  o["trigger_flash"] = std::move(flash);
  o["sync_error"] = s.sync_error;
  return o.dump();
}

std::string encode_hello(Scheme scheme, int slaves) {
  json o = header("hello");
  o["version"] = kServiceVersion;
  o["scheme"] = to_string(scheme);
  o["slaves"] = slaves;
  return o.dump();
}

std::string encode_ack(CommandKind kind) {
  json o = header("ack");
  o["command"] = to_string(kind);
  return o.dump();
}

std::string encode_error(const std::string& command, const std::string& reason) {
  json o = header("error");
  o["command"] = command;
  o["reason"] = reason;
  return o.dump();
}

}  // namespace todsim
