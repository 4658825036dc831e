#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace todsim {

/// A: periodic sampling with event-triggered control updates.
/// B: event-triggered sampling (communication) with continuous control.
enum class Scheme { A, B };

Scheme parse_scheme(const std::string& text);
const char* to_string(Scheme scheme);

struct ManipulatorGains {
  double alpha = 10.0;
  double beta = 4.0;
  double kappa = 20.0;
  double lambda = 5.0;
  double gamma = 10.0;  // control trigger gain (scheme A)
  double c = 0.02;      // communication trigger constant (scheme B)
};

/// Scalar data entering the stability certificates.
struct StabilityProblem {
  Scheme scheme = Scheme::A;
  int slaves = 1;
  int joints = 2;
  ManipulatorGains master;
  std::vector<ManipulatorGains> slave;  // one entry per slave
  double h = 0.02;
  double d_m = 0.05;
  double d_s = 0.05;
  double p_m = 0.0;
  double p_s = 0.0;

  double hm_master() const { return h + d_m; }
  double hm_slave() const { return h + d_s; }

  /// Positive gains, non-negative h and delays, p_m, p_s < 1, one gain set per slave.
  void validate() const;
};

/// Decision matrices of the certificates. Each is block x block; block equals the
/// joint count for the full LMIs or 1 for the identity-stripped reduction.
struct DecisionVars {
  Eigen::MatrixXd R_m;
  std::vector<Eigen::MatrixXd> R_s, P, U, Q, Z;

  int block() const { return static_cast<int>(R_m.rows()); }
  std::size_t slaves() const { return R_s.size(); }
  /// Throws std::invalid_argument unless every matrix is symmetric positive definite.
  void validate() const;
};

/// Scalar-isotropic ansatz: every decision matrix is scalar * I, shared across slaves.
struct IsotropicVars {
  double r_m = 1.0;
  double r_s = 1.0;
  double p = 1.0;
  double u = 1.0;
  double q = 1.0;
  double z = 1.0;
};

DecisionVars make_isotropic(const IsotropicVars& vars, int slaves, int block);

/// [[-Q_i/(N-1) + U_i, Q_i], [Q_i, -P_i + Q_i]]. Throws std::domain_error for N < 2.
Eigen::MatrixXd assemble_omega(const StabilityProblem& problem, const DecisionVars& dv, int i);

/// Event-triggered control certificate Xi_i; dimension block * (4 + 2 (N - 1)).
Eigen::MatrixXd assemble_xi(const StabilityProblem& problem, const DecisionVars& dv, int i);

/// Event-triggered communication certificate Pi_i.
Eigen::MatrixXd assemble_pi(const StabilityProblem& problem, const DecisionVars& dv, int i);

/// Xi_i or Pi_i depending on problem.scheme.
Eigen::MatrixXd assemble_certificate(const StabilityProblem& problem, const DecisionVars& dv, int i);

struct DefinitenessCheck {
  bool negative_definite = false;
  double max_eigenvalue = 0.0;
};

/// Negative definite iff lambda_max(M) < -tol. Throws std::invalid_argument if M is
/// not symmetric within tol.
DefinitenessCheck check_nd(const Eigen::MatrixXd& M, double tol = 1e-10);

struct FeasibilityOptions {
  double tolerance = 1e-9;    // definiteness margin on the full LMIs
  double target = 1e-3;       // stop early once the normalized objective is below -target
  double min_step = 1e-4;     // coordinate-descent step floor (log scale)
  int max_sweeps = 400;
};

struct FeasibilityReport {
  bool feasible = false;
  bool gain_conditions = true;         // kappa > gamma for every manipulator (scheme A)
  bool structurally_infeasible = false;
  IsotropicVars vars;
  DecisionVars dv;                     // full-size matrices for the found point
  std::vector<double> omega_max;       // lambda_max(Omega_i), empty for N = 1
  std::vector<double> certificate_max; // lambda_max(Xi_i or Pi_i)
  std::string reason;
};

/// Evaluates every LMI of the problem at the given point.
FeasibilityReport evaluate_point(const StabilityProblem& problem, const IsotropicVars& vars, double tol = 1e-9);

/// Coordinate descent on the normalized worst-case lambda_max over the isotropic
/// ansatz, multi-started from a log-spaced grid.
FeasibilityReport feasibility_search(const StabilityProblem& problem, const FeasibilityOptions& options = {});

struct BisectionResult {
  bool found = false;  // false if even the lower end is infeasible
  double h_star = 0.0; // largest feasible grid value of h
  int grid_index = 0;
  int evaluations = 0;
};

/// Largest h on the grid {k * grid_step, k = 1..floor(h_max / grid_step)} for which
/// feasibility_search succeeds, assuming feasibility is monotone in h.
BisectionResult bisect_max_h(StabilityProblem problem, double h_max, double grid_step,
                             const FeasibilityOptions& options = {});

}  // namespace todsim
