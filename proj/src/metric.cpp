#include "gwsos/metric.hpp"

#include <cmath>
#include <future>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace gwsos {

DistanceReport distortion_distance(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                                   const DistanceOptions& options) {
  if (!(options.p >= 1.0)) throw InvalidInput("distortion distance needs p >= 1");
  const CostTensor cost = build_cost_tensor(x, y, options.p, options.q);
  const ConicProblem problem =
      build_relaxation(options.kind, cost, x.weights(), y.weights(), options.level);
  const SolveResult result = solve(problem, options.solver);

  DistanceReport report;
  report.level = options.level;
  report.p = options.p;
  report.q = options.q;
  report.kind = options.kind;
  report.status = result.status;
  report.iterations = result.iterations;
  report.primal_residual = result.primal_residual;
  report.dual_residual = result.dual_residual;
  report.gap = result.gap;
  report.wall_time = result.wall_time;
  report.value = std::pow(std::max(result.objective, 0.0), 1.0 / options.p);
  report.certificate.lower_bound = result.objective;
  if (options.certify) {
    CertifyOptions copt;
    copt.solver = options.solver;
    try {
      report.certificate = certify(problem, result, cost, copt);
    } catch (const ToleranceError&) {
      // Moments too far from feasibility to read a coupling; keep the bound.
    }
  }
  return report;
}

namespace {

void check_input(const MomentVector& z, const CouplingShape& s, int level, double tol,
                 const char* name) {
  if (!z.basis() || z.basis()->num_vars() != s.m * s.n || z.basis()->max_degree() < 2 * level) {
    throw InvalidInput(std::string("glue: ") + name + " does not match its shape and level");
  }
  const double residual = marginal_residual(z, s, level);
  if (residual > tol) {
    throw ToleranceError(std::string("glue: ") + name + " misses the marginal equalities by " +
                         std::to_string(residual));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(moment_matrix(z, level),
                                                     Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -tol) {
    throw ToleranceError(std::string("glue: ") + name + " has an indefinite moment matrix");
  }
}

}  // namespace

GluedMoments glue(const MomentVector& z1, const CouplingShape& s1, const MomentVector& z2,
                  const CouplingShape& s2, int level, double tol) {
  if (level < 1) throw LevelError("glue: level must be >= 1");
  if (s1.n != s2.m || (s1.nu - s2.mu).cwiseAbs().maxCoeff() > 1e-12) {
    throw InvalidInput("glue: the middle space of the two couplings differs");
  }
  if ((s1.nu.array() <= 0.0).any()) throw InvalidInput("glue: middle weights must be positive");
  check_input(z1, s1, level, tol, "z1");
  check_input(z2, s2, level, tol, "z2");

  GluedMoments out;
  out.level = level;
  out.m = s1.m;
  out.n = s1.n;
  out.p = s2.n;
  out.alpha = s1.mu;
  out.beta = s1.nu;
  out.gamma = s2.nu;
  const std::size_t n = out.n;
  const std::size_t p = out.p;
  BasisPtr basis = enumerate_basis(out.m * n * p, 2 * level);
  Eigen::VectorXd values(static_cast<Eigen::Index>(basis->size()));
  for (std::size_t pos = 0; pos < basis->size(); ++pos) {
    MultiIndex a(s1.m * s1.n);
    MultiIndex b(s2.m * s2.n);
    double denom = 1.0;
    for (std::size_t v : (*basis)[pos].factors()) {
      const std::size_t k = v % p;
      const std::size_t j = (v / p) % n;
      const std::size_t i = v / (p * n);
      a.bump(i * n + j);
      b.bump(j * p + k);
      denom *= out.beta[static_cast<Eigen::Index>(j)];
    }
    values[static_cast<Eigen::Index>(pos)] = z1.riesz(a) * z2.riesz(b) / denom;
  }
  out.z = MomentVector(std::move(basis), std::move(values));
  return out;
}

CouplingShape glue_marginal_shape(const GluedMoments& glued, GlueAxis axis) {
  CouplingShape s;
  switch (axis) {
    case GlueAxis::XY:
      s.m = glued.m, s.n = glued.n, s.mu = glued.alpha, s.nu = glued.beta;
      break;
    case GlueAxis::YZ:
      s.m = glued.n, s.n = glued.p, s.mu = glued.beta, s.nu = glued.gamma;
      break;
    case GlueAxis::ZX:
      s.m = glued.p, s.n = glued.m, s.mu = glued.gamma, s.nu = glued.alpha;
      break;
  }
  return s;
}

MomentVector glue_marginal(const GluedMoments& glued, GlueAxis axis) {
  const CouplingShape shape = glue_marginal_shape(glued, axis);
  const std::size_t n = glued.n;
  const std::size_t p = glued.p;
  const std::size_t free_range = axis == GlueAxis::XY ? p : axis == GlueAxis::YZ ? glued.m : n;
  auto triple_index = [&](std::size_t u, std::size_t v, std::size_t w) {
    // (u, v) are the kept indices in target order, w the summed one.
    switch (axis) {
      case GlueAxis::XY: return (u * n + v) * p + w;
      case GlueAxis::YZ: return (w * n + u) * p + v;
      case GlueAxis::ZX: return (v * n + w) * p + u;
    }
    return std::size_t{0};
  };

  BasisPtr basis = enumerate_basis(shape.m * shape.n, 2 * glued.level);
  const std::size_t nv = glued.z.basis()->num_vars();
  Eigen::VectorXd values(static_cast<Eigen::Index>(basis->size()));
  for (std::size_t pos = 0; pos < basis->size(); ++pos) {
    const std::vector<std::size_t> factors = (*basis)[pos].factors();
    const std::size_t l = factors.size();
    std::vector<std::size_t> tuple(l, 0);
    double sum = 0.0;
    for (;;) {
      MultiIndex mono(nv);
      for (std::size_t s = 0; s < l; ++s) {
        mono.bump(triple_index(factors[s] / shape.n, factors[s] % shape.n, tuple[s]));
      }
      sum += glued.z.riesz(mono);
      std::size_t s = 0;
      while (s < l && ++tuple[s] == free_range) tuple[s++] = 0;
      if (s == l) break;
    }
    values[static_cast<Eigen::Index>(pos)] = sum;
  }
  return MomentVector(std::move(basis), std::move(values));
}

PiAudit audit_pi(const MomentVector& z, const CouplingShape& shape, int level) {
  PiAudit out;
  out.max_equality_residual = marginal_residual(z, shape, level);
  out.min_eigenvalue = std::numeric_limits<double>::infinity();
  const std::size_t nv = shape.m * shape.n;
  std::vector<std::size_t> subset;
  auto visit = [&](auto&& self, std::size_t next) -> void {
    const Eigen::MatrixXd mat = reduced_moment_matrix(z, shape, subset, level,
                                                      std::numeric_limits<double>::infinity());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mat, Eigen::EigenvaluesOnly);
    out.min_eigenvalue = std::min(out.min_eigenvalue, eig.eigenvalues().minCoeff());
    if (static_cast<int>(subset.size()) == 2 * level) return;
    for (std::size_t v = next; v < nv; ++v) {
      subset.push_back(v);
      self(self, v + 1);
      subset.pop_back();
    }
  };
  visit(visit, 0);
  return out;
}

MomentVector third_marginal(const GluedMoments& glued) {
  MomentVector z3 = glue_marginal(glued, GlueAxis::ZX);
  const PiAudit check = audit_pi(z3, glue_marginal_shape(glued, GlueAxis::ZX), glued.level);
  if (!check.pass()) {
    throw ToleranceError("third marginal fails the feasibility audit: equality residual " +
                         std::to_string(check.max_equality_residual) + ", min eigenvalue " +
                         std::to_string(check.min_eigenvalue));
  }
  return z3;
}

TriangleReport triangle_check(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                              const MetricMeasureSpace& z, const DistanceOptions& options) {
  auto run = [&](const MetricMeasureSpace& a, const MetricMeasureSpace& b) {
    return std::async(std::launch::async, [&a, &b, &options] {
      return distortion_distance(a, b, options);
    });
  };
  auto xy = run(x, y);
  auto yz = run(y, z);
  auto xz = run(x, z);
  TriangleReport report;
  report.detail = {xy.get(), yz.get(), xz.get()};
  report.d_xy = report.detail[0].value;
  report.d_yz = report.detail[1].value;
  report.d_xz = report.detail[2].value;
  report.slack = report.d_xy + report.d_yz - report.d_xz;
  report.tolerance = 1e-5 * (1.0 + report.d_xy + report.d_yz);
  report.pass = report.d_xz <= report.d_xy + report.d_yz + report.tolerance;
  if (!report.pass) {
    std::ostringstream msg;
    msg << "triangle inequality violated: d(X,Z) = " << report.d_xz << " > d(X,Y) + d(Y,Z) = "
        << report.d_xy << " + " << report.d_yz << " (tolerance " << report.tolerance << ")";
    const char* names[] = {"X,Y", "Y,Z", "X,Z"};
    for (int k = 0; k < 3; ++k) {
      const auto& d = report.detail[static_cast<std::size_t>(k)];
      msg << "; " << names[k] << ": " << to_string(d.status) << " primal " << d.primal_residual
          << " dual " << d.dual_residual << " gap " << d.gap;
    }
    report.message = msg.str();
  }
  return report;
}

}  // namespace gwsos
