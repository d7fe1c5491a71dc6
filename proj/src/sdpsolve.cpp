#include "gwsos/sdpsolve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace gwsos {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  if (lambda[0] >= 0.0) return sym;
  Eigen::Index first_pos = 0;
  while (first_pos < lambda.size() && lambda[first_pos] < 0.0) ++first_pos;
  const Eigen::Index keep = lambda.size() - first_pos;
  if (keep == 0) return Eigen::MatrixXd::Zero(sym.rows(), sym.cols());
  const auto v = eig.eigenvectors().rightCols(keep);
  return v * lambda.tail(keep).asDiagonal() * v.transpose();
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
// Primal residual below which a stalled run is never declared infeasible.
constexpr double kInfeasibleResidual = 1e-4;

/// Layout of the stacked cone vector: svec(PSD blocks) | nonneg | free.
/// A block with a face basis W is projected onto W S_+ W' instead of S_+.
struct ConeLayout {
  std::vector<int> dims;
  std::vector<const Eigen::MatrixXd*> faces;
  std::vector<Eigen::Index> offsets;
  Eigen::Index nonneg_offset = 0;
  Eigen::Index nonneg_count = 0;
  Eigen::Index free_offset = 0;
  Eigen::Index total = 0;
};

Eigen::Index svec_index(int row, int col) {
  return static_cast<Eigen::Index>(col) * (col + 1) / 2 + row;
}

void unpack(const Eigen::Ref<const Eigen::VectorXd>& v, int dim, Eigen::MatrixXd& out) {
  out.resize(dim, dim);
  for (int c = 0; c < dim; ++c) {
    for (int r = 0; r < c; ++r) {
      const double x = v[svec_index(r, c)] / kSqrt2;
      out(r, c) = x;
      out(c, r) = x;
    }
    out(c, c) = v[svec_index(c, c)];
  }
}

void pack(const Eigen::MatrixXd& m, Eigen::Ref<Eigen::VectorXd> v) {
  const int dim = static_cast<int>(m.rows());
  for (int c = 0; c < dim; ++c) {
    for (int r = 0; r < c; ++r) v[svec_index(r, c)] = kSqrt2 * m(r, c);
    v[svec_index(c, c)] = m(c, c);
  }
}

/// The cone image map G and its layout.
SpMat build_cone_map(const ConicProblem& prob, ConeLayout& layout) {
  const auto n = static_cast<Eigen::Index>(prob.num_coords());
  std::vector<Triplet> trips;
  std::vector<char> covered(static_cast<std::size_t>(n), 0);
  Eigen::Index offset = 0;
  for (const auto& block : prob.blocks) {
    layout.dims.push_back(block.dim);
    layout.faces.push_back(block.face.size() > 0 ? &block.face : nullptr);
    layout.offsets.push_back(offset);
    for (const auto& e : block.entries) {
      const int r = std::min(e.row, e.col);
      const int c = std::max(e.row, e.col);
      const double scale = r == c ? 1.0 : kSqrt2;
      trips.emplace_back(offset + svec_index(r, c), static_cast<Eigen::Index>(e.coord),
                         scale * e.coeff);
      covered[e.coord] = 1;
    }
    offset += static_cast<Eigen::Index>(block.dim) * (block.dim + 1) / 2;
  }
  layout.nonneg_offset = offset;
  for (std::size_t coord : prob.nonneg) {
    trips.emplace_back(offset++, static_cast<Eigen::Index>(coord), 1.0);
    covered[coord] = 1;
  }
  layout.nonneg_count = offset - layout.nonneg_offset;
  layout.free_offset = offset;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!covered[static_cast<std::size_t>(k)]) trips.emplace_back(offset++, k, 1.0);
  }
  layout.total = offset;
  SpMat g(layout.total, n);
  g.setFromTriplets(trips.begin(), trips.end());
  return g;
}

void project_cone(const ConeLayout& layout, Eigen::VectorXd& v, Eigen::MatrixXd& scratch) {
  for (std::size_t b = 0; b < layout.dims.size(); ++b) {
    const int dim = layout.dims[b];
    const Eigen::Index len = static_cast<Eigen::Index>(dim) * (dim + 1) / 2;
    auto seg = v.segment(layout.offsets[b], len);
    if (dim == 1) {
      seg[0] = std::max(seg[0], 0.0);
      continue;
    }
    unpack(seg, dim, scratch);
    if (const Eigen::MatrixXd* w = layout.faces[b]) {
      // Projection onto the face {W Y W' : Y PSD}.
      const Eigen::MatrixXd reduced = w->transpose() * scratch * *w;
      pack(*w * project_psd(reduced) * w->transpose(), seg);
    } else {
      pack(project_psd(scratch), seg);
    }
  }
  auto nn = v.segment(layout.nonneg_offset, layout.nonneg_count);
  nn = nn.cwiseMax(0.0);
}

/// Quasi-definite KKT system [G'G, A'; A, 0] factored once with a small
/// regularization and solved with iterative refinement against the exact
/// matrix.
class KktSolver {
 public:
  KktSolver(const SpMat& gtg, const SpMat& a) : n_(gtg.rows()), p_(a.rows()) {
    std::vector<Triplet> exact;
    std::vector<Triplet> reg;
    for (Eigen::Index k = 0; k < gtg.outerSize(); ++k) {
      for (SpMat::InnerIterator it(gtg, k); it; ++it) {
        exact.emplace_back(it.row(), it.col(), it.value());
      }
    }
    for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
      for (SpMat::InnerIterator it(a, k); it; ++it) {
        exact.emplace_back(n_ + it.row(), it.col(), it.value());
        exact.emplace_back(it.col(), n_ + it.row(), it.value());
      }
    }
    reg = exact;
    for (Eigen::Index k = 0; k < n_; ++k) reg.emplace_back(k, k, kPrimalReg);
    for (Eigen::Index k = 0; k < p_; ++k) reg.emplace_back(n_ + k, n_ + k, -kDualReg);
    exact_.resize(n_ + p_, n_ + p_);
    exact_.setFromTriplets(exact.begin(), exact.end());
    SpMat regularized(n_ + p_, n_ + p_);
    regularized.setFromTriplets(reg.begin(), reg.end());
    ldlt_.compute(regularized);
    ok_ = ldlt_.info() == Eigen::Success;
  }

  bool ok() const { return ok_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = ldlt_.solve(rhs);
    for (int step = 0; step < kRefineSteps; ++step) {
      const Eigen::VectorXd r = rhs - exact_ * x;
      x += ldlt_.solve(r);
    }
    return x;
  }

 private:
  static constexpr double kPrimalReg = 1e-10;
  static constexpr double kDualReg = 1e-8;
  static constexpr int kRefineSteps = 3;

  Eigen::Index n_, p_;
  SpMat exact_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool ok_ = false;
};

/// Rows of `a` (unit norm) that are linearly independent of the rows
/// eliminated before them; a pivot of the Gram matrix's LDL' factor is the
/// squared distance of its row to the span of the earlier ones.
std::vector<Eigen::Index> independent_rows(const SpMat& a) {
  constexpr double kPivotFloor = 1e-9;
  SpMat gram = a * SpMat(a.transpose());
  for (Eigen::Index k = 0; k < gram.rows(); ++k) gram.coeffRef(k, k) += 1e-14;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(gram);
  std::vector<Eigen::Index> kept;
  if (ldlt.info() != Eigen::Success) {
    for (Eigen::Index r = 0; r < a.rows(); ++r) kept.push_back(r);
    return kept;
  }
  const Eigen::VectorXd d = ldlt.vectorD();
  const auto& perm = ldlt.permutationP().indices();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    if (d[perm[r]] > kPivotFloor) kept.push_back(r);
  }
  return kept;
}

struct Metrics {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double pobj = 0.0;
  double dobj = 0.0;
  double worst() const { return std::max({primal, dual, gap}); }
};

}  // namespace

SolveResult solve(const ConicProblem& prob, const SolverOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!prob.basis) throw InvalidInput("solve: problem has no basis");
  if (!(opt.tol > 0.0)) throw InvalidInput("solve: tolerance must be positive");
  const auto n = static_cast<Eigen::Index>(prob.num_coords());
  const auto p = static_cast<Eigen::Index>(prob.equalities.size());

  // Objective scaled by 1/max(1, K); rows of A normalized.
  const double cscale = std::max(1.0, prob.cost_scale);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (const auto& [coord, coeff] : prob.objective) c[static_cast<Eigen::Index>(coord)] += coeff;
  const Eigen::VectorXd c_hat = c / cscale;

  std::vector<Triplet> a_trips;
  std::vector<Triplet> a_raw_trips;
  Eigen::VectorXd b(p), b_full_hat(p);
  for (Eigen::Index r = 0; r < p; ++r) {
    const auto& row = prob.equalities[static_cast<std::size_t>(r)];
    double norm2 = 0.0;
    for (const auto& [coord, coeff] : row.terms) norm2 += coeff * coeff;
    const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 1.0;
    for (const auto& [coord, coeff] : row.terms) {
      a_trips.emplace_back(r, static_cast<Eigen::Index>(coord), coeff * inv);
      a_raw_trips.emplace_back(r, static_cast<Eigen::Index>(coord), coeff);
    }
    b[r] = row.rhs;
    b_full_hat[r] = row.rhs * inv;
  }
  SpMat a_full(p, n), a_raw(p, n);
  a_full.setFromTriplets(a_trips.begin(), a_trips.end());
  a_raw.setFromTriplets(a_raw_trips.begin(), a_raw_trips.end());

  // Redundant rows leave the KKT matrix singular and let the multipliers
  // drift; keep a maximal independent subset.
  const std::vector<Eigen::Index> kept = independent_rows(a_full);
  const auto p_kept = static_cast<Eigen::Index>(kept.size());
  SpMat select(p_kept, p);
  {
    std::vector<Triplet> sel;
    for (Eigen::Index k = 0; k < p_kept; ++k) sel.emplace_back(k, kept[static_cast<std::size_t>(k)], 1.0);
    select.setFromTriplets(sel.begin(), sel.end());
  }
  const SpMat a = select * a_full;
  const Eigen::VectorXd b_hat = select * b_full_hat;
  const SpMat at = a.transpose();

  ConeLayout layout;
  const SpMat g = build_cone_map(prob, layout);
  const SpMat gt = g.transpose();
  const SpMat gtg = gt * g;
  KktSolver kkt(gtg, a);

  SolveResult result;
  result.kind = prob.kind;
  result.level = prob.level;
  result.shape = prob.shape;
  result.cost_scale = prob.cost_scale;
  result.tol = opt.tol;
  auto finish = [&](const Eigen::VectorXd& z, const Metrics& mt, std::int64_t iters,
                    SolveStatus status) {
    result.moments = MomentVector(prob.basis, z);
    result.objective = mt.pobj;
    result.dual_objective = mt.dobj;
    result.primal_residual = mt.primal;
    result.dual_residual = mt.dual;
    result.gap = mt.gap;
    result.iterations = iters;
    result.status = status;
    result.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
  };
  if (!kkt.ok()) {
    return finish(Eigen::VectorXd::Zero(n), Metrics{}, 0, SolveStatus::NumericalFailure);
  }

  const Eigen::Index m = layout.total;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(p_kept);
  if (opt.seed != 0) {
    // Seeded starts perturb the initial cone point.
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal(0.0, 1e-3);
    for (Eigen::Index k = 0; k < m; ++k) s[k] = normal(rng);
    Eigen::MatrixXd scratch;
    project_cone(layout, s, scratch);
  }
  double rho = opt.rho;
  const double alpha = opt.alpha;

  Eigen::VectorXd rhs(n + p_kept);
  Eigen::VectorXd gz(m), xhat(m), s_prev(m);
  Eigen::MatrixXd scratch;
  const double b_norm = b.norm();
  const double c_hat_norm = c_hat.norm();

  Metrics best;
  double best_score = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_z = z;
  bool have_best = false;

  // Infeasibility tracking over windows of iterations.
  constexpr int kWindow = 500;
  Eigen::VectorXd u_window = u;
  Eigen::VectorXd du_prev;
  int aligned_windows = 0;
  double prev_cone_gap = std::numeric_limits<double>::infinity();

  std::int64_t iter = 0;
  auto compute_metrics = [&]() {
    Metrics mt;
    const double cone_gap = (gz - s).norm();
    const double cone_scale = 1.0 + std::max(gz.norm(), s.norm());
    const double eq_res = (a_raw * z - b).norm() / (1.0 + b_norm);
    mt.primal = std::max(cone_gap / cone_scale, eq_res);
    // Dual estimate: y = -rho*nu, S = -rho*u.
    const Eigen::VectorXd aty = -rho * (at * nu);
    const Eigen::VectorXd gts = -rho * (gt * u);
    const Eigen::VectorXd rd = c_hat - aty - gts;
    mt.dual = rd.norm() / (1.0 + std::max({c_hat_norm, aty.norm(), gts.norm()}));
    mt.pobj = c.dot(z);
    mt.dobj = cscale * b_hat.dot(-rho * nu);
    mt.gap = std::abs(mt.pobj - mt.dobj) / (1.0 + std::abs(mt.pobj) + std::abs(mt.dobj));
    return mt;
  };

  for (iter = 1; iter <= opt.max_iter; ++iter) {
    rhs.head(n) = gt * (s - u) - c_hat / rho;
    rhs.tail(p_kept) = b_hat;
    const Eigen::VectorXd sol = kkt.solve(rhs);
    z = sol.head(n);
    nu = sol.tail(p_kept);
    gz = g * z;
    xhat = alpha * gz + (1.0 - alpha) * s;
    s_prev = s;
    s = xhat + u;
    project_cone(layout, s, scratch);
    u += xhat - s;

    if (!z.allFinite() || !u.allFinite()) {
      return finish(have_best ? best_z : z, best, iter, SolveStatus::NumericalFailure);
    }

    const bool check = iter % opt.check_interval == 0 || iter == opt.max_iter;
    if (!check) continue;
    const Metrics mt = compute_metrics();
    if (mt.worst() < best_score) {
      best_score = mt.worst();
      best = mt;
      best_z = z;
      have_best = true;
    }
    if (opt.log && opt.log_interval > 0 && iter % opt.log_interval == 0) {
      char line[160];
      std::snprintf(line, sizeof line,
                    "iter %8lld  pres %.3e  dres %.3e  gap %.3e  obj %.8e  rho %.2e\n",
                    static_cast<long long>(iter), mt.primal, mt.dual, mt.gap, mt.pobj, rho);
      *opt.log << line;
    }
    if (mt.worst() <= opt.tol) return finish(z, mt, iter, SolveStatus::Optimal);

    if (iter % kWindow == 0) {
      const Eigen::VectorXd du = (u - u_window) / kWindow;
      const double cone_gap = (gz - s).norm();
      if (du_prev.size() == du.size() && du.norm() > 1e-8 && du_prev.norm() > 1e-8) {
        const double cosine = du.dot(du_prev) / (du.norm() * du_prev.norm());
        if (cosine > 0.999 && cone_gap >= 0.99 * prev_cone_gap && mt.primal > kInfeasibleResidual) {
          ++aligned_windows;
        } else {
          aligned_windows = 0;
        }
      }
      if (aligned_windows >= 3 && iter >= 2000) {
        return finish(have_best ? best_z : z, best, iter, SolveStatus::Infeasible);
      }
      prev_cone_gap = cone_gap;
      du_prev = du;
      u_window = u;
    }

    if (opt.adaptive_rho && iter % (opt.check_interval * 5) == 0) {
      const double ratio = mt.primal / std::max(mt.dual, 1e-30);
      if (ratio > 5.0 || ratio < 0.2) {
        const double factor = std::clamp(std::sqrt(ratio), 0.1, 10.0);
        const double new_rho = std::clamp(rho * factor, kRhoMin, kRhoMax);
        if (new_rho != rho) {
          u *= rho / new_rho;
          rho = new_rho;
          du_prev.resize(0);
          aligned_windows = 0;
          u_window = u;
        }
      }
    }
  }
  return finish(have_best ? best_z : z, best, opt.max_iter, SolveStatus::MaxIterations);
}

}  // namespace gwsos
