#pragma once

#include <optional>

#include "gwsos/oracle.hpp"
#include "gwsos/relax.hpp"
#include "gwsos/sdpsolve.hpp"

namespace gwsos {

inline constexpr double kSolvedErrorRatio = 1.0001;
inline constexpr double kSolvedEigenRatio = 1e-4;

struct Certificate {
  double lower_bound = 0.0;
  /// Objective of the coupling read off the first-order moments.
  double upper_bound = 0.0;
  double eigenvalue_ratio = 0.0;
  /// upper / lower; NaN on exact-zero instances.
  double error_ratio = 0.0;
  bool solved = false;
  /// lower_bound was at the zero threshold; solved then means upper_bound is
  /// zero too.
  bool exact_zero = false;
  /// The ratios come from a second solve restricted toward a rank-one point
  /// of the optimal face (see `certify`).
  bool refined = false;
  Coupling coupling;
};

/// Coupling from the moments of pi_ij (z_{e_ij}, or zt_{2e_ij} for the
/// square-root variables). Negative entries are clamped; a marginal
/// violation above 1e-8 is repaired by alternating row/column scaling.
/// Throws ToleranceError when the violation before repair exceeds 1e-4 or
/// the repaired coupling is still off by more than 1e-6.
Coupling extract_coupling(const SolveResult& result);

/// lambda_2 / lambda_1 of M_r(z) (M_{r/2}(P(zt)) for the square-root
/// variables); 0 when lambda_1 <= 1e-14.
double eigenvalue_ratio(const SolveResult& result);

/// objective(extracted coupling) / lower bound; NaN when the lower bound is
/// at the zero threshold.
double error_ratio(const SolveResult& result, const CostTensor& cost);

bool is_solved(double error_ratio, double eigenvalue_ratio,
               double err_threshold = kSolvedErrorRatio, double eig_threshold = kSolvedEigenRatio);

/// Lower bounds at or below this count as zero: 1e-12 plus what the solver
/// tolerance leaves on a cost of scale K.
double zero_lower_threshold(const SolveResult& result);
/// An exact-zero instance is solved when the upper bound is at or below this.
double zero_upper_threshold(const SolveResult& result);

struct CertifyOptions {
  double err_threshold = kSolvedErrorRatio;
  double eig_threshold = kSolvedEigenRatio;
  /// When the first solution is optimal but not rank one, re-solve with a
  /// penalty pulling toward the best nearby coupling.
  bool refine = true;
  /// Extra multistart descents searched for the refinement target; they
  /// matter when the extracted coupling is a stationary mixture.
  std::size_t refine_starts = 8;
  /// A known good coupling (for example an oracle result) also considered
  /// as the target.
  std::optional<Coupling> hint;
  SolverOptions solver;
};

/// Certificate for `result`, a solve of `problem` built from `cost`.
///
/// A first-order solver lands anywhere in the optimal face, typically at a
/// mixture when several couplings are optimal. If the certificate is not
/// solved but some coupling pi* (the best of a local descent from the
/// extracted coupling, a short multistart and `hint`) has objective within
/// the error-ratio threshold of the lower bound (under the zero threshold on
/// exact-zero instances), the problem is solved again with
/// eps * E||pi - pi*||^2 added to the objective (a linear function of the
/// moments). The ratios are then taken at the new solution,
/// provided its original objective stays within that threshold; the lower
/// bound always comes from `result`.
Certificate certify(const ConicProblem& problem, const SolveResult& result, const CostTensor& cost,
                    const CertifyOptions& options = {});

struct SandwichReport {
  double lower_bound = 0.0;
  double oracle_value = 0.0;
  /// oracle_value - lower_bound.
  double slack = 0.0;
  bool global_optimal = false;
};

/// Checks lower_bound - 1e-5 (1 + |oracle|) <= oracle and flags global
/// optimality when oracle - lower_bound <= 1e-4 (1 + |oracle|). Throws
/// SandwichError on violation.
SandwichReport sandwich(double lower_bound, double oracle_value);
SandwichReport sandwich(const SolveResult& result, double oracle_value);

}  // namespace gwsos
