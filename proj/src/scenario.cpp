#include "todsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <random>

namespace todsim {

using nlohmann::json;

ForceKind parse_force_kind(const std::string& text) {
  if (text == "zero") return ForceKind::Zero;
  if (text == "decaying_sine") return ForceKind::DecayingSine;
  if (text == "pulse_train_decaying") return ForceKind::PulseTrainDecaying;
  if (text == "spring_to_target") return ForceKind::SpringToTarget;
  throw ScenarioError("unknown_force", "unknown force kind '" + text + "'");
}

const char* to_string(ForceKind kind) {
  switch (kind) {
    case ForceKind::Zero: return "zero";
    case ForceKind::DecayingSine: return "decaying_sine";
    case ForceKind::PulseTrainDecaying: return "pulse_train_decaying";
    case ForceKind::SpringToTarget: return "spring_to_target";
  }
  return "zero";
}

void ForceProfile::validate() const {
  auto fail = [](const std::string& m) { throw ScenarioError("bad_force", "force: " + m); };
  if (!std::isfinite(amplitude)) fail("amplitude must be finite");
  switch (kind) {
    case ForceKind::Zero: break;
    case ForceKind::DecayingSine:
      if (!(decay >= 0.0) || !std::isfinite(omega)) fail("decaying_sine needs decay >= 0");
      break;
    case ForceKind::PulseTrainDecaying:
      if (!(period > 0.0)) fail("pulse period must be positive");
      if (!(width > 0.0 && width <= period)) fail("pulse width must lie in (0, period]");
      if (!(ratio >= 0.0 && ratio < 1.0)) fail("pulse ratio must lie in [0, 1)");
      break;
    case ForceKind::SpringToTarget:
      if (!(stiffness >= 0.0)) fail("stiffness must be non-negative");
      if (!target.allFinite()) fail("target must be finite");
      break;
  }
}

JointVector force_profile(const ForceProfile& p, double t, const RobotModel& model, const JointVector& q) {
  switch (p.kind) {
    case ForceKind::Zero: return JointVector::Zero();
    case ForceKind::DecayingSine: {
      const double v = p.amplitude * std::exp(-p.decay * t) * std::sin(p.omega * t + p.phase);
      return JointVector::Constant(v);
    }
    case ForceKind::PulseTrainDecaying: {
      if (t < 0.0) return JointVector::Zero();
      const double k = std::floor(t / p.period);
      if (t - k * p.period >= p.width) return JointVector::Zero();
      return JointVector::Constant(p.amplitude * std::pow(p.ratio, k));
    }
    case ForceKind::SpringToTarget: {
      const Eigen::Vector2d pull = p.stiffness * (p.target - end_point(model, q));
      return end_point_jacobian(model, q).transpose() * pull;
    }
  }
  return JointVector::Zero();
}

double decaying_sine_energy(double amplitude, double decay, double omega) {
  if (!(decay > 0.0)) throw std::invalid_argument("decaying_sine_energy: decay must be positive");
  // Per joint: A^2 int e^{-2at} sin^2(wt) dt = A^2 w^2 / (4 a (a^2 + w^2)); two joints.
  return amplitude * amplitude * omega * omega / (2.0 * decay * (decay * decay + omega * omega));
}

Scheduler parse_scheduler(const std::string& text) {
  if (text == "tod") return Scheduler::Tod;
  if (text == "rr") return Scheduler::RoundRobin;
  throw ScenarioError("unknown_scheduler", "unknown scheduler '" + text + "' (expected tod or rr)");
}

const char* to_string(Scheduler s) { return s == Scheduler::Tod ? "tod" : "rr"; }

std::vector<JointVector> default_formation(int slaves) {
  if (slaves == 3) return {JointVector(0.3, 0.0), JointVector(-0.15, 0.2), JointVector(-0.15, -0.2)};
  std::vector<JointVector> out(static_cast<std::size_t>(std::max(slaves, 0)), JointVector::Zero());
  if (slaves < 2) return out;
  JointVector sum = JointVector::Zero();
  for (int i = 0; i < slaves; ++i) {
    const double a = 2.0 * std::numbers::pi * i / slaves;
    out[i] = 0.3 * JointVector(std::cos(a), std::sin(a));
    sum += out[i];
  }
  for (auto& g : out) g -= sum / slaves;
  return out;
}

int Scenario::steps() const { return static_cast<int>(std::llround(duration / dt)); }

int Scenario::steps_per_period() const { return static_cast<int>(std::llround(h / dt)); }

void Scenario::validate() const {
  auto fail = [](const std::string& code, const std::string& m) { throw ScenarioError(code, m); };
  if (!(dt > 0.0) || !std::isfinite(dt)) fail("bad_dt", "dt must be positive");
  if (!(duration >= 0.0) || !std::isfinite(duration)) fail("bad_duration", "duration must be non-negative");
  if (slaves < 1) fail("bad_slaves", "at least one slave is required");
  if (static_cast<int>(slave.size()) != slaves) fail("bad_slaves", "one slave configuration per slave is required");
  if (static_cast<int>(formation.size()) != slaves) fail("bad_formation", "one formation offset per slave is required");
  if (!(h > 0.0)) fail("bad_h", "h must be positive");
  if (h < dt * (1.0 - 1e-9)) fail("bad_h", "h must be at least dt");
  if (scheme == Scheme::A && std::abs(h / dt - std::round(h / dt)) > 1e-6) {
    fail("bad_h", "h must be an integer multiple of dt for periodic sampling");
  }

  JointVector sum = JointVector::Zero();
  for (const auto& g : formation) {
    if (!g.allFinite()) fail("bad_formation", "formation offsets must be finite");
    sum += g;
  }
  if (sum.norm() > 1e-9) fail("bad_formation", "formation offsets must sum to zero");
  for (std::size_t i = 0; i < formation.size(); ++i) {
    for (std::size_t j = i + 1; j < formation.size(); ++j) {
      if (formation[i] == formation[j]) fail("bad_formation", "formation offsets must be pairwise distinct");
    }
  }

  try {
    forward.validate();
    backward.validate();
  } catch (const std::invalid_argument& e) {
    fail("bad_delay", e.what());
  }

  auto check_manip = [&](const ManipulatorConfig& m, const std::string& who) {
    try {
      m.model.validate();
    } catch (const std::invalid_argument& e) {
      fail("bad_robot", who + ": " + e.what());
    }
    const auto& g = m.gains;
    if (!(g.alpha > 0 && g.beta > 0 && g.kappa > 0 && g.lambda > 0 && g.gamma > 0 && g.c > 0)) {
      fail("bad_gain", who + ": gains must be positive");
    }
    if (scheme == Scheme::A && !(g.kappa > g.gamma)) fail("bad_gain", who + ": kappa must exceed gamma");
    m.force.validate();
  };
  check_manip(master, "master");
  for (int i = 0; i < slaves; ++i) check_manip(slave[i], "slave " + std::to_string(i + 1));

  if (!(control_trigger.epsilon > 0 && control_trigger.nu > 0)) fail("bad_trigger", "control trigger epsilon and nu must be positive");
  if (!(comm_trigger.epsilon > 0 && comm_trigger.nu > 0)) fail("bad_trigger", "communication trigger epsilon and nu must be positive");
  if (!(adaptation_gain > 0.0)) fail("bad_adaptation", "adaptation gain must be positive");
  if (!std::isfinite(theta_hat_scale)) fail("bad_adaptation", "initial estimate scale must be finite");
  if (!master_q0.allFinite()) fail("bad_initial", "master_q must be finite");
  if (!(initial_spread >= 0.0)) fail("bad_initial", "spread must be non-negative");
  if (!slave_q0.empty() && static_cast<int>(slave_q0.size()) != slaves) fail("bad_initial", "slave_q needs one entry per slave");
}

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ScenarioError("bad_type", where + " must be an object");
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
    if (!known) throw ScenarioError("unknown_key", "unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ScenarioError("bad_type", std::string("bad value for '") + key + "' in " + where);
  }
}

JointVector vec2(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ScenarioError("bad_type", where + " must be a two-element number array");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

json vec2_json(const JointVector& v) { return json::array({v[0], v[1]}); }

void read_robot(const json& o, RobotModel& m, const std::string& where) {
  check_keys(o, {"l1", "l2", "m1", "m2", "lc1", "lc2", "I1", "I2", "g"}, where);
  read(o, "l1", m.l1, where);
  read(o, "l2", m.l2, where);
  read(o, "m1", m.m1, where);
  read(o, "m2", m.m2, where);
  read(o, "lc1", m.lc1, where);
  read(o, "lc2", m.lc2, where);
  read(o, "I1", m.I1, where);
  read(o, "I2", m.I2, where);
  read(o, "g", m.g, where);
}

json robot_json(const RobotModel& m) {
  return {{"l1", m.l1}, {"l2", m.l2}, {"m1", m.m1}, {"m2", m.m2}, {"lc1", m.lc1},
          {"lc2", m.lc2}, {"I1", m.I1}, {"I2", m.I2}, {"g", m.g}};
}

void read_gains(const json& o, ManipulatorGains& g, const std::string& where) {
  check_keys(o, {"alpha", "beta", "kappa", "lambda", "gamma", "c"}, where);
  read(o, "alpha", g.alpha, where);
  read(o, "beta", g.beta, where);
  read(o, "kappa", g.kappa, where);
  read(o, "lambda", g.lambda, where);
  read(o, "gamma", g.gamma, where);
  read(o, "c", g.c, where);
}

json gains_json(const ManipulatorGains& g) {
  return {{"alpha", g.alpha}, {"beta", g.beta}, {"kappa", g.kappa}, {"lambda", g.lambda}, {"gamma", g.gamma}, {"c", g.c}};
}

void read_force(const json& o, ForceProfile& f, const std::string& where) {
  check_keys(o, {"kind", "amplitude", "decay", "omega", "phase", "period", "width", "ratio", "stiffness", "target"}, where);
  std::string kind = to_string(f.kind);
  read(o, "kind", kind, where);
  f.kind = parse_force_kind(kind);
  read(o, "amplitude", f.amplitude, where);
  read(o, "decay", f.decay, where);
  read(o, "omega", f.omega, where);
  read(o, "phase", f.phase, where);
  read(o, "period", f.period, where);
  read(o, "width", f.width, where);
  read(o, "ratio", f.ratio, where);
  read(o, "stiffness", f.stiffness, where);
  if (o.contains("target")) f.target = vec2(o["target"], where + ".target");
}

json force_json(const ForceProfile& f) {
  json o = {{"kind", to_string(f.kind)}};
  switch (f.kind) {
    case ForceKind::Zero: break;
    case ForceKind::DecayingSine:
      o.update({{"amplitude", f.amplitude}, {"decay", f.decay}, {"omega", f.omega}, {"phase", f.phase}});
      break;
    case ForceKind::PulseTrainDecaying:
      o.update({{"amplitude", f.amplitude}, {"period", f.period}, {"width", f.width}, {"ratio", f.ratio}});
      break;
    case ForceKind::SpringToTarget:
      o.update({{"stiffness", f.stiffness}, {"target", vec2_json(f.target)}});
      break;
  }
  return o;
}

void read_profile(const json& o, DelayProfile& p, const std::string& where) {
  check_keys(o, {"d", "rho", "omega"}, where);
  read(o, "d", p.d, where);
  read(o, "rho", p.rho, where);
  read(o, "omega", p.omega, where);
}

json profile_json(const DelayProfile& p) { return {{"d", p.d}, {"rho", p.rho}, {"omega", p.omega}}; }

void read_manip(const json& o, ManipulatorConfig& m, const std::string& where) {
  check_keys(o, {"robot", "gains", "force"}, where);
  if (o.contains("robot")) read_robot(o["robot"], m.model, where + ".robot");
  if (o.contains("gains")) read_gains(o["gains"], m.gains, where + ".gains");
  if (o.contains("force")) read_force(o["force"], m.force, where + ".force");
}

}  // namespace

Scenario scenario_from_json(const json& doc) {
  check_keys(doc, {"name", "scheme", "slaves", "duration", "dt", "seed", "robot", "gains", "force", "master", "slave",
                   "slave_overrides", "formation", "network", "trigger", "adaptation", "initial", "output"},
             "scenario");
  Scenario sc;
  read(doc, "name", sc.name, "scenario");
  std::string scheme = "A";
  read(doc, "scheme", scheme, "scenario");
  try {
    sc.scheme = parse_scheme(scheme);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("bad_scheme", e.what());
  }
  read(doc, "slaves", sc.slaves, "scenario");
  if (sc.slaves < 1 || sc.slaves > 64) throw ScenarioError("bad_slaves", "slaves must lie in [1, 64]");
  read(doc, "duration", sc.duration, "scenario");
  read(doc, "dt", sc.dt, "scenario");
  read(doc, "seed", sc.seed, "scenario");

  // Shared settings first, then master/slave overrides, then per-slave overrides.
  ManipulatorConfig base;
  if (doc.contains("robot")) read_robot(doc["robot"], base.model, "robot");
  if (doc.contains("gains")) read_gains(doc["gains"], base.gains, "gains");
  if (doc.contains("force")) read_force(doc["force"], base.force, "force");
  sc.master = base;
  if (doc.contains("master")) read_manip(doc["master"], sc.master, "master");
  ManipulatorConfig slave_base = base;
  if (doc.contains("slave")) read_manip(doc["slave"], slave_base, "slave");
  sc.slave.assign(static_cast<std::size_t>(sc.slaves), slave_base);
  if (doc.contains("slave_overrides")) {
    const auto& arr = doc["slave_overrides"];
    if (!arr.is_array() || static_cast<int>(arr.size()) != sc.slaves) {
      throw ScenarioError("bad_type", "slave_overrides must be an array with one object per slave");
    }
    for (int i = 0; i < sc.slaves; ++i) read_manip(arr[i], sc.slave[i], "slave_overrides[" + std::to_string(i) + "]");
  }

  sc.formation = default_formation(sc.slaves);
  if (doc.contains("formation")) {
    const auto& arr = doc["formation"];
    if (!arr.is_array()) throw ScenarioError("bad_type", "formation must be an array");
    sc.formation.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) sc.formation.push_back(vec2(arr[i], "formation"));
  }

  if (doc.contains("network")) {
    const auto& n = doc["network"];
    check_keys(n, {"h", "forward", "backward", "scheduler", "latch_lost"}, "network");
    read(n, "h", sc.h, "network");
    if (n.contains("forward")) read_profile(n["forward"], sc.forward, "network.forward");
    if (n.contains("backward")) read_profile(n["backward"], sc.backward, "network.backward");
    std::string sched = "tod";
    read(n, "scheduler", sched, "network");
    sc.scheduler = parse_scheduler(sched);
    read(n, "latch_lost", sc.latch_lost, "network");
  }
  if (doc.contains("trigger")) {
    const auto& t = doc["trigger"];
    check_keys(t, {"epsilon", "nu", "epsilon_comm", "nu_comm"}, "trigger");
    read(t, "epsilon", sc.control_trigger.epsilon, "trigger");
    read(t, "nu", sc.control_trigger.nu, "trigger");
    read(t, "epsilon_comm", sc.comm_trigger.epsilon, "trigger");
    read(t, "nu_comm", sc.comm_trigger.nu, "trigger");
  }
  if (doc.contains("adaptation")) {
    const auto& a = doc["adaptation"];
    check_keys(a, {"gain", "initial_scale"}, "adaptation");
    read(a, "gain", sc.adaptation_gain, "adaptation");
    read(a, "initial_scale", sc.theta_hat_scale, "adaptation");
  }
  if (doc.contains("initial")) {
    const auto& in = doc["initial"];
    check_keys(in, {"master_q", "spread", "slave_q"}, "initial");
    if (in.contains("master_q")) sc.master_q0 = vec2(in["master_q"], "initial.master_q");
    read(in, "spread", sc.initial_spread, "initial");
    if (in.contains("slave_q")) {
      const auto& arr = in["slave_q"];
      if (!arr.is_array()) throw ScenarioError("bad_type", "initial.slave_q must be an array");
      for (std::size_t i = 0; i < arr.size(); ++i) sc.slave_q0.push_back(vec2(arr[i], "initial.slave_q"));
    }
  }
  std::string out;
  read(doc, "output", out, "scenario");
  sc.output_dir = out;

  sc.validate();
  return sc;
}

json scenario_to_json(const Scenario& sc) {
  json doc;
  doc["name"] = sc.name;
  doc["scheme"] = to_string(sc.scheme);
  doc["slaves"] = sc.slaves;
  doc["duration"] = sc.duration;
  doc["dt"] = sc.dt;
  doc["seed"] = sc.seed;
  doc["master"] = {{"robot", robot_json(sc.master.model)}, {"gains", gains_json(sc.master.gains)},
                   {"force", force_json(sc.master.force)}};
  json overrides = json::array();
  for (const auto& s : sc.slave) {
    overrides.push_back({{"robot", robot_json(s.model)}, {"gains", gains_json(s.gains)}, {"force", force_json(s.force)}});
  }
  doc["slave_overrides"] = overrides;
  json form = json::array();
  for (const auto& g : sc.formation) form.push_back(vec2_json(g));
  doc["formation"] = form;
  doc["network"] = {{"h", sc.h},
                    {"forward", profile_json(sc.forward)},
                    {"backward", profile_json(sc.backward)},
                    {"scheduler", to_string(sc.scheduler)},
                    {"latch_lost", sc.latch_lost}};
  doc["trigger"] = {{"epsilon", sc.control_trigger.epsilon},
                    {"nu", sc.control_trigger.nu},
                    {"epsilon_comm", sc.comm_trigger.epsilon},
                    {"nu_comm", sc.comm_trigger.nu}};
  doc["adaptation"] = {{"gain", sc.adaptation_gain}, {"initial_scale", sc.theta_hat_scale}};
  json initial = {{"master_q", vec2_json(sc.master_q0)}, {"spread", sc.initial_spread}};
  if (!sc.slave_q0.empty()) {
    json arr = json::array();
    for (const auto& q : sc.slave_q0) arr.push_back(vec2_json(q));
    initial["slave_q"] = arr;
  }
  doc["initial"] = initial;
  if (!sc.output_dir.empty()) doc["output"] = sc.output_dir.string();
  return doc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("io", "cannot open scenario file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError("parse", path.string() + ": " + e.what());
  }
  return scenario_from_json(doc);
}

StabilityProblem problem_from_scenario(const Scenario& sc) {
  StabilityProblem p;
  p.scheme = sc.scheme;
  p.slaves = sc.slaves;
  p.joints = kJoints;
  p.master = sc.master.gains;
  for (const auto& s : sc.slave) p.slave.push_back(s.gains);
  p.h = sc.h;
  p.d_m = sc.forward.d;
  p.d_s = sc.backward.d;
  p.p_m = sc.forward.derivative_bound();
  p.p_s = sc.backward.derivative_bound();
  return p;
}

StabilityProblem problem_from_json(const json& doc) {
  check_keys(doc, {"scheme", "slaves", "joints", "gains", "master", "slave", "h", "d_m", "d_s", "p_m", "p_s"}, "problem");
  StabilityProblem p;
  std::string scheme = "A";
  read(doc, "scheme", scheme, "problem");
  try {
    p.scheme = parse_scheme(scheme);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("bad_scheme", e.what());
  }
  read(doc, "slaves", p.slaves, "problem");
  read(doc, "joints", p.joints, "problem");
  if (p.slaves < 1 || p.slaves > 64) throw ScenarioError("bad_slaves", "slaves must lie in [1, 64]");
  ManipulatorGains base;
  if (doc.contains("gains")) read_gains(doc["gains"], base, "gains");
  p.master = base;
  if (doc.contains("master")) read_gains(doc["master"], p.master, "master");
  ManipulatorGains sbase = base;
  if (doc.contains("slave")) read_gains(doc["slave"], sbase, "slave");
  p.slave.assign(static_cast<std::size_t>(p.slaves), sbase);
  read(doc, "h", p.h, "problem");
  read(doc, "d_m", p.d_m, "problem");
  read(doc, "d_s", p.d_s, "problem");
  read(doc, "p_m", p.p_m, "problem");
  read(doc, "p_s", p.p_s, "problem");
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("bad_problem", e.what());
  }
  return p;
}

StabilityProblem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("io", "cannot open problem file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError("parse", path.string() + ": " + e.what());
  }
  return problem_from_json(doc);
}

json problem_to_json(const StabilityProblem& p) {
  json doc = {{"scheme", to_string(p.scheme)}, {"slaves", p.slaves}, {"joints", p.joints},
              {"master", gains_json(p.master)}, {"h", p.h}, {"d_m", p.d_m},
              {"d_s", p.d_s}, {"p_m", p.p_m}, {"p_s", p.p_s}};
  if (!p.slave.empty()) doc["slave"] = gains_json(p.slave.front());
  return doc;
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

// mt19937_64 output is fully specified by the standard; the top 53 bits map to [0, 1).
double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

}  // namespace todsim
