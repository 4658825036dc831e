#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <pthread.h>

#include "todsim/audit.hpp"
#include "todsim/gateway.hpp"
#include "todsim/scenario.hpp"
#include "todsim/simulation.hpp"
#include "todsim/stability.hpp"
#include "todsim/trace_io.hpp"

namespace fs = std::filesystem;
using namespace todsim;

namespace {

struct CliError {
  std::string code;
  std::string msg;
};

std::string quote(const std::string& s) {
  std::ostringstream os;
  os << std::quoted(s);
  return os.str();
}

void print_metrics(const Metrics& m, const std::string& prefix = "") {
  for (const auto& [k, v] : m.entries()) std::cout << prefix << k << '=' << v << '\n';
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir) {
  const Scenario sc = load_scenario(scenario_path);
  const fs::path out = out_dir.empty() ? fs::path(sc.output_dir) : fs::path(out_dir);
  fs::create_directories(out);
  const RunResult r = run_scenario(sc);
  write_trace_csv(out / "trace.csv", r.trace);
  write_metrics(out / "metrics.txt", r.metrics);
  std::ofstream(out / "scenario.json") << scenario_to_json(sc).dump(2) << '\n';
  print_metrics(r.metrics);
  std::cout << "out=" << out.string() << '\n';
  return 0;
}

int cmd_verify_lmi(const std::string& problem_path, bool bisect, double h_max, double grid) {
  const StabilityProblem problem = load_problem(problem_path);
  const FeasibilityReport rep = feasibility_search(problem);
  const char* cert = problem.scheme == Scheme::A ? "xi" : "pi";

  std::cout << "scheme " << to_string(problem.scheme) << ", N = " << problem.slaves << ", h = " << problem.h
            << ", d_m = " << problem.d_m << ", d_s = " << problem.d_s << '\n';
  for (std::size_t i = 0; i < rep.omega_max.size(); ++i) std::cout << "  lambda_max(omega_" << i + 1 << ") = " << rep.omega_max[i] << '\n';
  for (std::size_t i = 0; i < rep.certificate_max.size(); ++i) std::cout << "  lambda_max(" << cert << '_' << i + 1 << ") = " << rep.certificate_max[i] << '\n';
  std::cout << "  verdict: " << (rep.feasible ? "feasible" : "infeasible") << (rep.reason.empty() ? "" : " (" + rep.reason + ")") << '\n';

  std::cout << "feasible=" << (rep.feasible ? 1 : 0) << '\n';
  std::cout << "gain_conditions=" << (rep.gain_conditions ? 1 : 0) << '\n';
  std::cout << "structurally_infeasible=" << (rep.structurally_infeasible ? 1 : 0) << '\n';
  for (std::size_t i = 0; i < rep.omega_max.size(); ++i) std::cout << "omega_max_" << i + 1 << '=' << rep.omega_max[i] << '\n';
  for (std::size_t i = 0; i < rep.certificate_max.size(); ++i) std::cout << cert << "_max_" << i + 1 << '=' << rep.certificate_max[i] << '\n';
  std::cout << "r_m=" << rep.vars.r_m << "\nr_s=" << rep.vars.r_s << "\np=" << rep.vars.p << "\nu=" << rep.vars.u << "\nq=" << rep.vars.q
            << "\nz=" << rep.vars.z << '\n';
  if (bisect) {
    const BisectionResult b = bisect_max_h(problem, h_max, grid);
    std::cout << "h_star_found=" << (b.found ? 1 : 0) << "\nh_star=" << b.h_star << "\nh_star_grid_index=" << b.grid_index
              << "\nbisect_evaluations=" << b.evaluations << '\n';
  }
  return 0;
}

int cmd_compare(const std::string& scenario_path, const std::string& schedulers) {
  Scenario sc = load_scenario(scenario_path);
  std::vector<Scheduler> list;
  std::stringstream ss(schedulers);
  for (std::string item; std::getline(ss, item, ',');) list.push_back(parse_scheduler(item));
  if (list.empty()) throw CliError{"bad_option", "no schedulers given"};
  for (Scheduler s : list) {
    sc.scheduler = s;
    const RunResult r = run_scenario(sc);
    print_metrics(r.metrics, std::string(to_string(s)) + ".");
  }
  return 0;
}

int cmd_audit(const std::string& trace_path, const std::string& scenario_override) {
  const fs::path scenario_path = scenario_override.empty() ? fs::path(trace_path).parent_path() / "scenario.json" : fs::path(scenario_override);
  const Scenario sc = load_scenario(scenario_path);
  const Trace trace = read_trace_csv(fs::path(trace_path), sc.scheme);
  if (trace.slaves != sc.slaves) throw CliError{"mismatch", "trace has " + std::to_string(trace.slaves) + " slaves, scenario " + std::to_string(sc.slaves)};
  const AuditReport a = audit_trace(trace, sc);

  std::cout << "tod_applicable=" << a.tod.applicable << "\ntod_instants=" << a.tod.instants << "\ntod_optimal=" << a.tod.optimal
            << "\ntod_reset_consistent=" << a.tod.reset_consistent << "\ntod_violations=" << a.tod.violations << '\n';
  std::cout << "trigger_checked=" << a.triggers.checked << "\ntrigger_violations=" << a.triggers.violations
            << "\ntrigger_max_value_between=" << a.triggers.max_value_between << '\n';
  std::cout << "zeno_events=" << a.zeno.events << "\nzeno_violations=" << a.zeno.violations << "\nzeno_min_interval=" << a.zeno.min_interval
            << "\nzeno_min_margin=" << a.zeno.min_margin << '\n';
  std::cout << "delay_max_age=" << a.delay.max_age << "\ndelay_bound=" << a.delay.bound << '\n';
  if (a.lyapunov) {
    const auto& l = *a.lyapunov;
    std::cout << "lyapunov_min_component=" << l.min_component << "\nlyapunov_reset_preconditions=" << l.reset.preconditions_hold
              << "\nlyapunov_reset_max_jump=" << l.reset.max_jump << "\nlyapunov_reset_min_jump=" << l.reset.min_jump << "\nlyapunov_reset_passed=" << l.reset.passed
              << "\nlyapunov_decay_preconditions=" << l.decay.preconditions_hold << "\nlyapunov_decay_max_increase=" << l.decay.max_increase
              << "\nlyapunov_decay_passed=" << l.decay.passed << '\n';
  }
  if (!a.lyapunov_note.empty()) std::cout << "lyapunov_note=" << quote(a.lyapunov_note) << '\n';
  std::cout << "audit=" << (a.passed() ? "PASS" : "FAIL") << '\n';
  return a.passed() ? 0 : 3;
}

int cmd_serve(const std::string& scenario_path, const std::string& bind, double speed, double publish_hz) {
  Scenario sc;
  if (scenario_path.empty()) {
    sc.slave.assign(3, {});
    sc.formation = default_formation(3);
  } else {
    sc = load_scenario(scenario_path);
  }
  GatewayOptions options;
  parse_bind(bind, options);
  options.speed = speed;
  options.publish_hz = publish_hz;

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Gateway gateway(sc, options);
  try {
    gateway.start();
  } catch (const std::runtime_error& e) {
    throw CliError{"bind", e.what()};
  }
  std::cout << "listening on " << options.address << ':' << gateway.port() << " (scheme " << to_string(sc.scheme) << ")" << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  gateway.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"todsim: teleoperation over a shared network with try-once-discard scheduling"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir, problem_path, trace_path, schedulers = "tod,rr", audit_scenario;
  std::string bind = "127.0.0.1:8080";
  bool bisect = false;
  double h_max = 2.0, grid = 0.01, speed = 1.0, publish_hz = 60.0;

  auto* simulate = app.add_subcommand("simulate", "run a scenario and write trace.csv, metrics.txt and scenario.json");
  simulate->add_option("scenario", scenario_path, "scenario file (JSON)")->required();
  simulate->add_option("--out", out_dir, "output directory (defaults to the scenario's output field)");

  auto* verify = app.add_subcommand("verify-lmi", "evaluate the stability certificates for a problem file");
  verify->add_option("problem", problem_path, "problem file (JSON)")->required();
  verify->add_flag("--bisect", bisect, "also bisect the largest certified h");
  verify->add_option("--h-max", h_max, "upper end of the h grid")->check(CLI::PositiveNumber);
  verify->add_option("--grid", grid, "h grid step")->check(CLI::PositiveNumber);

  auto* compare = app.add_subcommand("compare", "run a scenario under several schedulers");
  compare->add_option("scenario", scenario_path, "scenario file (JSON)")->required();
  compare->add_option("--schedulers", schedulers, "comma-separated list of tod, rr");

  auto* audit = app.add_subcommand("audit", "post-hoc TOD, Lyapunov, trigger, Zeno and delay audits of a trace");
  audit->add_option("trace", trace_path, "trace.csv written by simulate")->required();
  audit->add_option("--scenario", audit_scenario, "scenario file (defaults to scenario.json next to the trace)");

  auto* serve = app.add_subcommand("serve", "serve a live scenario over websocket (/ws) with a health endpoint (/healthz)");
  serve->add_option("scenario", scenario_path, "scenario file (JSON); defaults to three slaves with default settings");
  serve->add_option("--bind", bind, "host:port to listen on");
  serve->add_option("--speed", speed, "simulated seconds per wall-clock second")->check(CLI::PositiveNumber);
  serve->add_option("--publish-hz", publish_hz, "snapshot rate")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: code=usage msg=" << quote(e.what()) << '\n';
    return 2;
  }

  try {
    if (*simulate) return cmd_simulate(scenario_path, out_dir);
    if (*verify) return cmd_verify_lmi(problem_path, bisect, h_max, grid);
    if (*compare) return cmd_compare(scenario_path, schedulers);
    if (*audit) return cmd_audit(trace_path, audit_scenario);
    if (*serve) return cmd_serve(scenario_path, bind, speed, publish_hz);
  } catch (const CliError& e) {
    std::cerr << "error: code=" << e.code << " msg=" << quote(e.msg) << '\n';
    return 1;
  } catch (const ScenarioError& e) {
    std::cerr << "error: code=" << e.code() << " msg=" << quote(e.what()) << '\n';
    return 1;
  } catch (const NonFiniteError& e) {
    std::cerr << "error: code=non_finite msg=" << quote(e.what()) << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: code=bad_argument msg=" << quote(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: code=internal msg=" << quote(e.what()) << '\n';
    return 1;
  }
  return 0;
}
