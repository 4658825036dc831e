#include "todsim/stability.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace todsim {

Scheme parse_scheme(const std::string& text) {
  if (text == "A" || text == "a") return Scheme::A;
  if (text == "B" || text == "b") return Scheme::B;
  throw std::invalid_argument("unknown scheme '" + text + "' (expected A or B)");
}

const char* to_string(Scheme scheme) { return scheme == Scheme::A ? "A" : "B"; }

void StabilityProblem::validate() const {
  if (slaves < 1) throw std::invalid_argument("problem: need at least one slave");
  if (joints < 1) throw std::invalid_argument("problem: joint dimension must be positive");
  if (static_cast<int>(slave.size()) != slaves) throw std::invalid_argument("problem: one gain set per slave required");
  auto check = [](const ManipulatorGains& g) {
    if (!(g.alpha > 0 && g.beta > 0 && g.kappa > 0 && g.lambda > 0 && g.gamma > 0 && g.c >= 0)) {
      throw std::invalid_argument("problem: gains must be positive");
    }
  };
  check(master);
  for (const auto& g : slave) check(g);
  if (!(h >= 0 && d_m >= 0 && d_s >= 0)) throw std::invalid_argument("problem: h and delay bounds must be non-negative");
  if (!(p_m >= 0 && p_m < 1 && p_s >= 0 && p_s < 1)) throw std::invalid_argument("problem: p_m, p_s must lie in [0, 1)");
}

void DecisionVars::validate() const {
  const int b = block();
  auto pd = [b](const Eigen::MatrixXd& M, const char* name) {
    if (M.rows() != b || M.cols() != b) throw std::invalid_argument(std::string("decision vars: bad size for ") + name);
    if (!M.isApprox(M.transpose(), 1e-12)) throw std::invalid_argument(std::string("decision vars: asymmetric ") + name);
    if (M.llt().info() != Eigen::Success || Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M).eigenvalues().minCoeff() <= 0.0) {
      throw std::invalid_argument(std::string("decision vars: ") + name + " is not positive definite");
    }
  };
  if (b < 1) throw std::invalid_argument("decision vars: empty");
  pd(R_m, "R_m");
  const std::size_t n = R_s.size();
  if (P.size() != n || U.size() != n || Q.size() != n || Z.size() != n) {
    throw std::invalid_argument("decision vars: one matrix per slave required");
  }
  for (std::size_t i = 0; i < n; ++i) {
    pd(R_s[i], "R_s");
    pd(P[i], "P");
    pd(U[i], "U");
    pd(Q[i], "Q");
    pd(Z[i], "Z");
  }
}

DecisionVars make_isotropic(const IsotropicVars& v, int slaves, int block) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(block, block);
  DecisionVars dv;
  dv.R_m = v.r_m * I;
  dv.R_s.assign(slaves, v.r_s * I);
  dv.P.assign(slaves, v.p * I);
  dv.U.assign(slaves, v.u * I);
  dv.Q.assign(slaves, v.q * I);
  dv.Z.assign(slaves, v.z * I);
  return dv;
}

namespace {

void check_shapes(const StabilityProblem& problem, const DecisionVars& dv, int i) {
  problem.validate();
  dv.validate();
  if (static_cast<int>(dv.slaves()) != problem.slaves) throw std::invalid_argument("decision vars: slave count mismatch");
  if (i < 0 || i >= problem.slaves) throw std::out_of_range("LMI index out of range");
}

// Shared skeleton of Xi and Pi; the schemes differ only in the scalar coefficients.
struct CertificateCoefficients {
  double d11;        // scalar part of block (1,1)
  double w_master;   // weight on R_m in (1,1); negated in (3,3)
  double d22;        // scalar part of block (2,2)
  double w_slave;    // weight on R_s in (2,2); negated in (4,4)
  double c14;
  double c23;
};

Eigen::MatrixXd assemble_blocks(const StabilityProblem& pb, const DecisionVars& dv, int i,
                                const CertificateCoefficients& k) {
  const int b = dv.block();
  const int others = pb.slaves - 1;
  const int dim = b * (4 + 2 * others);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(b, b);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);

  M.block(0, 0, b, b) = k.d11 * I + k.w_master * dv.R_m;
  M.block(b, b, b, b) = k.d22 * I + k.w_slave * dv.R_s[i] + pb.h * dv.P[i];
  M.block(2 * b, 2 * b, b, b) = -k.w_master * dv.R_m;
  M.block(3 * b, 3 * b, b, b) = -k.w_slave * dv.R_s[i];
  M.block(0, 3 * b, b, b) = k.c14 * I;
  M.block(3 * b, 0, b, b) = k.c14 * I;
  M.block(b, 2 * b, b, b) = k.c23 * I;
  M.block(2 * b, b, b, b) = k.c23 * I;

  const double coupling = 0.5 * pb.master.beta * pb.h;
  const int base5 = 4 * b;
  const int base6 = base5 + others * b;
  int slot = 0;
  for (int j = 0; j < pb.slaves; ++j) {
    if (j == i) continue;
    const int r5 = base5 + slot * b;
    const int r6 = base6 + slot * b;
    M.block(r5, r5, b, b) = -(pb.h * dv.U[j] - dv.Z[j]);
    M.block(r6, r6, b, b) = -(1.0 - pb.p_s) * dv.Z[j];
    M.block(0, r6, b, b) = coupling * I;
    M.block(r6, 0, b, b) = coupling * I;
    ++slot;
  }
  return M;
}

}  // namespace

Eigen::MatrixXd assemble_omega(const StabilityProblem& problem, const DecisionVars& dv, int i) {
  if (problem.slaves < 2) throw std::domain_error("Omega requires at least two slaves (no channel contention otherwise)");
  check_shapes(problem, dv, i);
  const int b = dv.block();
  const double n1 = static_cast<double>(problem.slaves - 1);
  Eigen::MatrixXd M(2 * b, 2 * b);
  M.block(0, 0, b, b) = -dv.Q[i] / n1 + dv.U[i];
  M.block(0, b, b, b) = dv.Q[i];
  M.block(b, 0, b, b) = dv.Q[i].transpose();
  M.block(b, b, b, b) = -dv.P[i] + dv.Q[i];
  return M;
}

Eigen::MatrixXd assemble_xi(const StabilityProblem& pb, const DecisionVars& dv, int i) {
  check_shapes(pb, dv, i);
  if (pb.scheme != Scheme::A) throw std::invalid_argument("Xi applies to the event-triggered control scheme");
  const auto& m = pb.master;
  const auto& s = pb.slave[i];
  CertificateCoefficients k{};
  k.d11 = -m.alpha;
  k.w_master = pb.hm_master();
  k.d22 = -m.beta * s.alpha / s.beta;
  k.w_slave = pb.hm_slave();
  k.c14 = -0.5 * m.beta * pb.hm_slave();
  k.c23 = -0.5 * m.beta * pb.hm_master();
  return assemble_blocks(pb, dv, i, k);
}

Eigen::MatrixXd assemble_pi(const StabilityProblem& pb, const DecisionVars& dv, int i) {
  check_shapes(pb, dv, i);
  if (pb.scheme != Scheme::B) throw std::invalid_argument("Pi applies to the event-triggered communication scheme");
  const auto& m = pb.master;
  const auto& s = pb.slave[i];
  CertificateCoefficients k{};
  k.d11 = -m.alpha + 0.5 * m.beta + m.c;
  k.w_master = pb.d_m;
  k.d22 = -m.beta * s.alpha / s.beta + 0.5 * m.beta + s.c;
  k.w_slave = pb.d_s;
  k.c14 = -0.5 * m.beta * pb.d_s;
  k.c23 = -0.5 * m.beta * pb.d_m;
  return assemble_blocks(pb, dv, i, k);
}

Eigen::MatrixXd assemble_certificate(const StabilityProblem& problem, const DecisionVars& dv, int i) {
  return problem.scheme == Scheme::A ? assemble_xi(problem, dv, i) : assemble_pi(problem, dv, i);
}

DefinitenessCheck check_nd(const Eigen::MatrixXd& M, double tol) {
  if (M.rows() != M.cols()) throw std::invalid_argument("check_nd: matrix must be square");
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > tol) throw std::invalid_argument("check_nd: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  DefinitenessCheck out;
  out.max_eigenvalue = es.eigenvalues().maxCoeff();
  out.negative_definite = out.max_eigenvalue < -tol;
  return out;
}

namespace {

std::string structural_defect(const StabilityProblem& pb) {
  if (pb.scheme == Scheme::A) {
    if (pb.hm_master() == 0.0 || pb.hm_slave() == 0.0) return "zero delay-integral block (h + d = 0)";
  } else {
    if (pb.d_m == 0.0 || pb.d_s == 0.0) return "zero delay-integral block (d = 0)";
  }
  if (pb.slaves > 1 && pb.h == 0.0) return "zero transmission-error block (h = 0)";
  return {};
}

bool gain_conditions_hold(const StabilityProblem& pb) {
  if (pb.scheme != Scheme::A) return true;
  if (!(pb.master.kappa > pb.master.gamma)) return false;
  for (const auto& s : pb.slave) {
    if (!(s.kappa > s.gamma)) return false;
  }
  return true;
}

double normalized_max_eigenvalue(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  const double scale = M.norm();
  return es.eigenvalues().maxCoeff() / (scale > 0.0 ? scale : 1.0);
}

// Worst normalized lambda_max over all LMIs on the identity-stripped matrices.
double objective(const StabilityProblem& pb, const std::array<double, 6>& logv) {
  const IsotropicVars v{std::exp(logv[0]), std::exp(logv[1]), std::exp(logv[2]),
                        std::exp(logv[3]), std::exp(logv[4]), std::exp(logv[5])};
  const DecisionVars dv = make_isotropic(v, pb.slaves, 1);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < pb.slaves; ++i) {
    if (pb.slaves > 1) worst = std::max(worst, normalized_max_eigenvalue(assemble_omega(pb, dv, i)));
    worst = std::max(worst, normalized_max_eigenvalue(assemble_certificate(pb, dv, i)));
  }
  return worst;
}

IsotropicVars from_log(const std::array<double, 6>& l) {
  return {std::exp(l[0]), std::exp(l[1]), std::exp(l[2]), std::exp(l[3]), std::exp(l[4]), std::exp(l[5])};
}

}  // namespace

FeasibilityReport evaluate_point(const StabilityProblem& pb, const IsotropicVars& vars, double tol) {
  pb.validate();
  FeasibilityReport rep;
  rep.vars = vars;
  rep.dv = make_isotropic(vars, pb.slaves, pb.joints);
  rep.gain_conditions = gain_conditions_hold(pb);
  bool all_nd = true;
  for (int i = 0; i < pb.slaves; ++i) {
    if (pb.slaves > 1) {
      const auto c = check_nd(assemble_omega(pb, rep.dv, i), tol);
      rep.omega_max.push_back(c.max_eigenvalue);
      all_nd = all_nd && c.negative_definite;
    }
    const auto c = check_nd(assemble_certificate(pb, rep.dv, i), tol);
    rep.certificate_max.push_back(c.max_eigenvalue);
    all_nd = all_nd && c.negative_definite;
  }
  rep.feasible = all_nd && rep.gain_conditions;
  if (!rep.gain_conditions) {
    rep.reason = "gain condition kappa > gamma violated";
  } else if (!all_nd) {
    rep.reason = "at least one LMI is not negative definite";
  }
  return rep;
}

FeasibilityReport feasibility_search(const StabilityProblem& pb, const FeasibilityOptions& opt) {
  pb.validate();
  const std::string defect = structural_defect(pb);

  const double others = std::max(1, pb.slaves - 1);
  const double qs[] = {1e-2, 1e-1, 1.0, 10.0, 100.0};
  const double rs[] = {1e-2, 1e-1, 1.0, 10.0};

  std::array<double, 6> best_point{};
  double best_value = std::numeric_limits<double>::infinity();

  for (double q : qs) {
    for (double r : rs) {
      const double u = q / (4.0 * others);
      const double p = 1.5 * (q + q * q / (q / others - u));
      const double z = pb.h > 0.0 ? 0.5 * pb.h * u : u;
      std::array<double, 6> x{std::log(r), std::log(r), std::log(p), std::log(u), std::log(q), std::log(z)};
      double fx = objective(pb, x);
      double step = 1.0;
      for (int sweep = 0; sweep < opt.max_sweeps && step >= opt.min_step && fx >= -opt.target; ++sweep) {
        bool improved = false;
        for (std::size_t c = 0; c < x.size(); ++c) {
          for (double dir : {1.0, -1.0}) {
            auto trial = x;
            trial[c] += dir * step;
            const double ft = objective(pb, trial);
            if (ft < fx) {
              x = trial;
              fx = ft;
              improved = true;
              break;
            }
          }
        }
        if (!improved) step *= 0.5;
      }
      if (fx < best_value) {
        best_value = fx;
        best_point = x;
      }
      if (fx < -opt.target && defect.empty()) {
        auto rep = evaluate_point(pb, from_log(x), opt.tolerance);
        if (rep.feasible) return rep;
      }
    }
  }

  auto rep = evaluate_point(pb, from_log(best_point), opt.tolerance);
  if (!defect.empty()) {
    rep.feasible = false;
    rep.structurally_infeasible = true;
    rep.reason = "structurally infeasible: " + defect;
  } else if (!rep.feasible && rep.reason.empty()) {
    rep.reason = "no certificate found";
  }
  return rep;
}

BisectionResult bisect_max_h(StabilityProblem problem, double h_max, double grid_step, const FeasibilityOptions& opt) {
  if (!(grid_step > 0.0) || !(h_max >= grid_step)) throw std::invalid_argument("bisect_max_h: bad grid");
  BisectionResult out;
  auto feasible_at = [&](int k) {
    problem.h = k * grid_step;
    ++out.evaluations;
    return feasibility_search(problem, opt).feasible;
  };
  int lo = 1;
  int hi = static_cast<int>(std::floor(h_max / grid_step + 1e-9));
  if (!feasible_at(lo)) return out;
  out.found = true;
  if (feasible_at(hi)) {
    lo = hi;
  } else {
    while (hi - lo > 1) {
      const int mid = lo + (hi - lo) / 2;
      if (feasible_at(mid)) lo = mid;
      else hi = mid;
    }
  }
  out.grid_index = lo;
  out.h_star = lo * grid_step;
  return out;
}

}  // namespace todsim
