#pragma once

#include <array>
#include <string>

#include "gwsos/certify.hpp"

namespace gwsos {

struct DistanceOptions {
  HierarchyKind kind = HierarchyKind::FirstLevelDNN;
  int level = 1;
  double p = 2.0;
  /// Exponent on the distances inside the cost; 1 gives |d_X - d_Y|^p.
  double q = 1.0;
  /// The value is a p-th root of the lower bound, which magnifies solver
  /// error (an error e in the bound moves the value by about e^{1/p}), so
  /// distances are solved more tightly than single bounds.
  SolverOptions solver = [] {
    SolverOptions s;
    s.tol = 1e-12;
    return s;
  }();
  bool certify = true;
};

struct DistanceReport {
  /// max(lower bound, 0)^{1/p}.
  double value = 0.0;
  int level = 1;
  double p = 2.0;
  double q = 1.0;
  HierarchyKind kind = HierarchyKind::FirstLevelDNN;
  Certificate certificate;
  SolveStatus status = SolveStatus::MaxIterations;
  std::int64_t iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  double wall_time = 0.0;
};

DistanceReport distortion_distance(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                                   const DistanceOptions& options = {});

/// Moments over the triple product: variable (i, j, k) has index (i n + j) p + k.
struct GluedMoments {
  MomentVector z;
  int level = 1;
  std::size_t m = 0, n = 0, p = 0;
  Eigen::VectorXd alpha, beta, gamma;
};

/// Gluing of z1 in Pi_r(alpha, beta) and z2 in Pi_r(beta, gamma) along the
/// shared middle space: for gamma = prod_s pi_{i_s j_s k_s},
///   z_gamma = l_{z1}(prod pi1_{i_s j_s}) l_{z2}(prod pi2_{j_s k_s}) / prod beta_{j_s}.
/// Throws ToleranceError when an input misses its marginal equalities or
/// moment-matrix PSD condition by more than `tol`.
GluedMoments glue(const MomentVector& z1, const CouplingShape& s1, const MomentVector& z2,
                  const CouplingShape& s2, int level, double tol = 1e-6);

enum class GlueAxis {
  /// Sum over k: moments over (X, Y).
  XY,
  /// Sum over i: moments over (Y, Z).
  YZ,
  /// Sum over j: moments over (Z, X), variable (k, i) at index k m + i.
  ZX,
};

/// l(prod pi'_{u_s v_s}) = sum over every tuple of the summed index of
/// l_z(prod pi_{...}).
MomentVector glue_marginal(const GluedMoments& glued, GlueAxis axis);
CouplingShape glue_marginal_shape(const GluedMoments& glued, GlueAxis axis);

struct PiAudit {
  double max_equality_residual = 0.0;
  /// Minimum eigenvalue over the reduced localizing matrices of every
  /// squarefree subset.
  double min_eigenvalue = 0.0;
  bool pass(double eq_tol = 1e-10, double eig_tol = 1e-8) const {
    return max_equality_residual <= eq_tol && min_eigenvalue >= -eig_tol;
  }
};

/// Membership test for Pi_r(shape.mu, shape.nu).
PiAudit audit_pi(const MomentVector& z, const CouplingShape& shape, int level);

/// The (Z, X) marginal of a gluing, checked against Pi_r(gamma, alpha);
/// throws ToleranceError when the check fails.
MomentVector third_marginal(const GluedMoments& glued);

struct TriangleReport {
  double d_xy = 0.0;
  double d_yz = 0.0;
  double d_xz = 0.0;
  /// d_xy + d_yz - d_xz.
  double slack = 0.0;
  /// 1e-5 (1 + d_xy + d_yz).
  double tolerance = 0.0;
  bool pass = false;
  std::array<DistanceReport, 3> detail;
  /// On failure: the three values with their solver residuals.
  std::string message;
};

/// Three independent solves (run concurrently) and the inequality
/// d(X,Z) <= d(X,Y) + d(Y,Z) + tolerance.
TriangleReport triangle_check(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                              const MetricMeasureSpace& z, const DistanceOptions& options = {});

}  // namespace gwsos
