#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "gwsos/relax.hpp"

namespace gwsos {

enum class SolveStatus { Optimal, MaxIterations, Infeasible, NumericalFailure };

std::string to_string(SolveStatus status);

struct SolverOptions {
  double tol = 1e-6;
  std::int64_t max_iter = 200'000;
  std::uint64_t seed = 0;
  /// Over-relaxation factor in (0, 2).
  double alpha = 1.6;
  double rho = 1.0;
  bool adaptive_rho = true;
  /// Residuals are evaluated every `check_interval` iterations.
  int check_interval = 10;
  /// Progress line to `log` every `log_interval` iterations (0 disables).
  int log_interval = 0;
  std::ostream* log = nullptr;
};

struct SolveResult {
  MomentVector moments;
  double objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  std::int64_t iterations = 0;
  SolveStatus status = SolveStatus::MaxIterations;
  double wall_time = 0.0;
  /// Tolerance the run was asked for.
  double tol = 1e-6;
  HierarchyKind kind = HierarchyKind::FirstLevelDNN;
  int level = 1;
  CouplingShape shape;
  /// K of the cost the problem was built from.
  double cost_scale = 1.0;
};

/// ADMM on the moment form: z is split from its cone images (PSD blocks,
/// nonnegative coordinates) while the affine equalities are kept in the
/// z-update, whose KKT matrix is factored once.
SolveResult solve(const ConicProblem& problem, const SolverOptions& options = {});

/// Euclidean projection of a symmetric matrix onto the PSD cone.
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& sym);

}  // namespace gwsos
