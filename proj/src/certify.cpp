#include "gwsos/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace gwsos {

namespace {

constexpr double kRepairThreshold = 1e-8;
constexpr double kRejectThreshold = 1e-4;
constexpr double kFinalThreshold = 1e-6;

/// Coordinate holding E[pi_a] (power 1) or E[pi_a^2] (power 2).
std::size_t coupling_coord(const SolveResult& result, std::size_t a, int power) {
  const MonomialBasis& basis = *result.moments.basis();
  MultiIndex idx(basis.num_vars());
  const int scale = result.kind == HierarchyKind::Putinar ? 2 : 1;
  idx.bump(a, power * scale);
  return basis.index_of(idx);
}

double scale_of(const SolveResult& result) { return std::max(1.0, result.cost_scale); }

}  // namespace

Coupling extract_coupling(const SolveResult& result) {
  const CouplingShape& shape = result.shape;
  if (!result.moments.basis()) throw InvalidInput("extract_coupling: empty moment vector");
  const auto m = static_cast<Eigen::Index>(shape.m);
  const auto n = static_cast<Eigen::Index>(shape.n);
  Coupling pi(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      pi(i, j) = std::max(0.0, result.moments[coupling_coord(result, static_cast<std::size_t>(i * n + j), 1)]);
    }
  }
  const double violation = marginal_violation(pi, shape.mu, shape.nu);
  if (violation > kRejectThreshold) {
    throw ToleranceError("extract_coupling: marginal violation " + std::to_string(violation) +
                         " exceeds 1e-4; the solution is too inaccurate");
  }
  if (violation > kRepairThreshold) {
    pi.array() += std::numeric_limits<double>::min();
    for (int it = 0; it < 10'000; ++it) {
      pi.array().colwise() *= shape.mu.array() / pi.rowwise().sum().array();
      pi.array().rowwise() *= (shape.nu.array() / pi.colwise().sum().transpose().array()).transpose();
      if (marginal_violation(pi, shape.mu, shape.nu) <= 1e-12) break;
    }
  }
  const double left = marginal_violation(pi, shape.mu, shape.nu);
  if (!(left <= kFinalThreshold)) {
    throw ToleranceError("extract_coupling: marginal violation " + std::to_string(left) +
                         " after repair");
  }
  return pi;
}

double eigenvalue_ratio(const SolveResult& result) {
  Eigen::MatrixXd mat;
  if (result.kind == HierarchyKind::Putinar) {
    mat = moment_matrix(project_P(result.moments), std::max(1, result.level / 2));
  } else {
    mat = moment_matrix(result.moments, result.level);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mat, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const Eigen::Index k = lambda.size();
  const double top = lambda[k - 1];
  if (top <= 1e-14 || k < 2) return 0.0;
  return lambda[k - 2] / top;
}

double zero_lower_threshold(const SolveResult& result) {
  return 1e-12 + result.tol * scale_of(result);
}

double zero_upper_threshold(const SolveResult& result) {
  return 1e-9 + result.tol * scale_of(result);
}

double error_ratio(const SolveResult& result, const CostTensor& cost) {
  if (result.objective <= zero_lower_threshold(result)) return std::numeric_limits<double>::quiet_NaN();
  return objective(cost, extract_coupling(result)) / result.objective;
}

bool is_solved(double err, double eig, double err_threshold, double eig_threshold) {
  return err <= err_threshold && eig < eig_threshold;
}

namespace {

Certificate ratios_at(const SolveResult& result, const CostTensor& cost, double lower,
                      const CertifyOptions& options) {
  Certificate cert;
  cert.lower_bound = lower;
  cert.coupling = extract_coupling(result);
  cert.upper_bound = objective(cost, cert.coupling);
  cert.eigenvalue_ratio = eigenvalue_ratio(result);
  if (lower <= zero_lower_threshold(result)) {
    cert.exact_zero = true;
    cert.error_ratio = std::numeric_limits<double>::quiet_NaN();
    cert.solved = cert.upper_bound <= zero_upper_threshold(result);
  } else {
    cert.error_ratio = cert.upper_bound / lower;
    cert.solved = is_solved(cert.error_ratio, cert.eigenvalue_ratio, options.err_threshold,
                            options.eig_threshold);
  }
  return cert;
}

/// eps * (sum_a E[pi_a^2] - 2 pi*_a E[pi_a]) added to the objective.
ConicProblem with_face_penalty(const ConicProblem& problem, const SolveResult& result,
                               const Coupling& target) {
  ConicProblem out = problem;
  const double eps = std::max(1.0, problem.cost_scale);
  const auto n = static_cast<std::size_t>(target.cols());
  for (std::size_t i = 0; i < static_cast<std::size_t>(target.rows()); ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t a = i * n + j;
      out.objective.emplace_back(coupling_coord(result, a, 2), eps);
      out.objective.emplace_back(coupling_coord(result, a, 1),
                                 -2.0 * eps * target(static_cast<Eigen::Index>(i),
                                                     static_cast<Eigen::Index>(j)));
    }
  }
  return out;
}

}  // namespace

Certificate certify(const ConicProblem& problem, const SolveResult& result, const CostTensor& cost,
                    const CertifyOptions& options) {
  const double lower = result.objective;
  Certificate cert = ratios_at(result, cost, lower, options);
  if (cert.solved || !options.refine) return cert;
  // Objective value a refined solution may reach and still certify.
  const double admissible = cert.exact_zero ? zero_upper_threshold(result)
                                            : options.err_threshold * lower;

  const Eigen::VectorXd& mu = result.shape.mu;
  const Eigen::VectorXd& nu = result.shape.nu;
  Coupling target = cert.coupling;
  double target_value = cert.upper_bound;
  auto consider = [&](const Coupling& pi, double value) {
    if (value < target_value) {
      target = pi;
      target_value = value;
    }
  };
  const LocalResult local = local_descent(cost, mu, nu, cert.coupling);
  consider(local.coupling, local.value);
  if (options.refine_starts > 0) {
    const OracleResult ms = multistart(cost, mu, nu, options.refine_starts, options.solver.seed);
    consider(ms.best_coupling, ms.best_value);
  }
  if (options.hint) consider(*options.hint, objective(cost, *options.hint));
  if (target_value > admissible) return cert;

  SolverOptions solver = options.solver;
  solver.tol = result.tol;
  const SolveResult second = solve(with_face_penalty(problem, result, target), solver);
  if (second.status != SolveStatus::Optimal) return cert;
  const double original = evaluate_objective(problem, second.moments.values());
  if (original > admissible + result.tol * scale_of(result)) return cert;
  Certificate refined;
  try {
    refined = ratios_at(second, cost, lower, options);
  } catch (const ToleranceError&) {
    return cert;
  }
  refined.refined = true;
  return refined;
}

SandwichReport sandwich(double lower_bound, double oracle_value) {
  SandwichReport report;
  report.lower_bound = lower_bound;
  report.oracle_value = oracle_value;
  report.slack = oracle_value - lower_bound;
  const double scale = 1.0 + std::abs(oracle_value);
  if (lower_bound - 1e-5 * scale > oracle_value) {
    throw SandwichError("lower bound " + std::to_string(lower_bound) +
                        " exceeds the feasible value " + std::to_string(oracle_value));
  }
  report.global_optimal = report.slack <= 1e-4 * scale;
  return report;
}

SandwichReport sandwich(const SolveResult& result, double oracle_value) {
  return sandwich(result.objective, oracle_value);
}

}  // namespace gwsos
