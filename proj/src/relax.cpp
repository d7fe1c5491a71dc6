#include "gwsos/relax.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <Eigen/Eigenvalues>

namespace gwsos {

std::string to_string(HierarchyKind kind) {
  switch (kind) {
    case HierarchyKind::Schmudgen: return "schmudgen";
    case HierarchyKind::Putinar: return "putinar";
    case HierarchyKind::Combined: return "combined";
    case HierarchyKind::FirstLevelDNN: return "first-level";
  }
  return "unknown";
}

HierarchyKind parse_hierarchy(const std::string& name) {
  if (name == "schmudgen") return HierarchyKind::Schmudgen;
  if (name == "putinar") return HierarchyKind::Putinar;
  if (name == "combined") return HierarchyKind::Combined;
  if (name == "first-level") return HierarchyKind::FirstLevelDNN;
  throw InvalidInput("unknown hierarchy '" + name +
                     "' (expected schmudgen|putinar|combined|first-level)");
}

// ---------------------------------------------------------------------------
// MomentVector

MomentVector::MomentVector(BasisPtr basis, Eigen::VectorXd values)
    : basis_(std::move(basis)), values_(std::move(values)) {
  if (!basis_ || static_cast<std::size_t>(values_.size()) != basis_->size()) {
    throw InvalidInput("MomentVector: value count does not match the basis");
  }
}

MomentVector MomentVector::unit(BasisPtr basis) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis->size()));
  v[0] = 1.0;
  return MomentVector(std::move(basis), std::move(v));
}

MomentVector MomentVector::dirac(BasisPtr basis, const Eigen::VectorXd& point) {
  if (static_cast<std::size_t>(point.size()) != basis->num_vars()) {
    throw InvalidInput("MomentVector::dirac: point dimension mismatch");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(basis->size()));
  for (std::size_t pos = 0; pos < basis->size(); ++pos) {
    double value = 1.0;
    for (std::size_t var : (*basis)[pos].factors()) value *= point[static_cast<Eigen::Index>(var)];
    v[static_cast<Eigen::Index>(pos)] = value;
  }
  return MomentVector(std::move(basis), std::move(v));
}

double MomentVector::riesz(const MultiIndex& monomial) const {
  return values_[static_cast<Eigen::Index>(basis_->index_of(monomial))];
}

// ---------------------------------------------------------------------------
// Constraint assembly helpers

namespace {

void check_marginals(std::size_t m, std::size_t n, const Eigen::VectorXd& mu,
                     const Eigen::VectorXd& nu) {
  if (static_cast<std::size_t>(mu.size()) != m || static_cast<std::size_t>(nu.size()) != n) {
    throw InvalidInput("marginal lengths do not match the cost tensor");
  }
}

LinearTerms canonical(LinearTerms terms) {
  std::sort(terms.begin(), terms.end());
  LinearTerms out;
  for (const auto& [coord, coeff] : terms) {
    if (!out.empty() && out.back().first == coord) {
      out.back().second += coeff;
    } else {
      out.emplace_back(coord, coeff);
    }
  }
  std::erase_if(out, [](const auto& t) { return t.second == 0.0; });
  return out;
}

struct RowHash {
  std::size_t operator()(const LinearEquality& row) const noexcept {
    std::uint64_t h = std::bit_cast<std::uint64_t>(row.rhs);
    for (const auto& [coord, coeff] : row.terms) {
      h ^= coord + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h ^= std::bit_cast<std::uint64_t>(coeff) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

struct RowEq {
  bool operator()(const LinearEquality& a, const LinearEquality& b) const noexcept {
    return a.rhs == b.rhs && a.terms == b.terms;
  }
};

/// Collects scalar equalities, dropping exact duplicates and empty rows.
class EqualitySet {
 public:
  void add(LinearTerms terms, double rhs) {
    LinearEquality row{canonical(std::move(terms)), rhs};
    if (row.terms.empty()) {
      if (row.rhs != 0.0) throw InvalidInput("inconsistent constant equality");
      return;
    }
    if (seen_.insert(row).second) rows_.push_back(std::move(row));
  }
  std::vector<LinearEquality> take() { return std::move(rows_); }

 private:
  std::unordered_set<LinearEquality, RowHash, RowEq> seen_;
  std::vector<LinearEquality> rows_;
};

/// Flattens M_t(g z) = 0 into scalar rows; entries that share alpha+beta
/// collapse in the de-duplicating set.
void add_localizing_equalities(const MonomialBasis& basis, const Polynomial& g, int t,
                               EqualitySet& out) {
  if (t < 0) return;
  const std::size_t rows = basis.prefix_size(t);
  for (std::size_t a = 0; a < rows; ++a) {
    for (std::size_t b = a; b < rows; ++b) {
      const MultiIndex shift = basis[a] + basis[b];
      LinearTerms terms;
      terms.reserve(g.size());
      for (const auto& [mono, coeff] : g) {
        terms.emplace_back(basis.index_of(mono + shift), coeff);
      }
      out.add(std::move(terms), 0.0);
    }
  }
}

std::size_t pair_index(const CouplingShape& s, std::size_t i, std::size_t j) { return i * s.n + j; }

/// The four (Mar) families at level r, plus z_0 = 1.
std::vector<LinearEquality> marginal_equalities(const MonomialBasis& basis,
                                                const CouplingShape& s, int level) {
  const std::size_t nv = s.m * s.n;
  EqualitySet eqs;
  eqs.add({{0, 1.0}}, 1.0);
  const int t = level - 1;
  const MultiIndex zero(nv);

  auto row_poly = [&](std::size_t i) {
    Polynomial g;
    for (std::size_t j = 0; j < s.n; ++j) g.emplace_back(MultiIndex::unit(nv, pair_index(s, i, j)), 1.0);
    g.emplace_back(zero, -s.mu[static_cast<Eigen::Index>(i)]);
    return g;
  };
  auto col_poly = [&](std::size_t j) {
    Polynomial g;
    for (std::size_t i = 0; i < s.m; ++i) g.emplace_back(MultiIndex::unit(nv, pair_index(s, i, j)), 1.0);
    g.emplace_back(zero, -s.nu[static_cast<Eigen::Index>(j)]);
    return g;
  };
  auto times_var = [](Polynomial g, const MultiIndex& e) {
    for (auto& [mono, coeff] : g) mono = mono + e;
    return g;
  };

  for (std::size_t i = 0; i < s.m; ++i) add_localizing_equalities(basis, row_poly(i), t, eqs);
  for (std::size_t j = 0; j < s.n; ++j) add_localizing_equalities(basis, col_poly(j), t, eqs);
  for (std::size_t i1 = 0; i1 < s.m; ++i1) {
    const Polynomial g = row_poly(i1);
    for (std::size_t a = 0; a < nv; ++a) {
      add_localizing_equalities(basis, times_var(g, MultiIndex::unit(nv, a)), t, eqs);
    }
  }
  for (std::size_t j1 = 0; j1 < s.n; ++j1) {
    const Polynomial g = col_poly(j1);
    for (std::size_t a = 0; a < nv; ++a) {
      add_localizing_equalities(basis, times_var(g, MultiIndex::unit(nv, a)), t, eqs);
    }
  }
  return eqs.take();
}

/// Row polynomials sum_j pi_ij - mu_i and column polynomials
/// sum_i pi_ij - nu_j; with `squared`, every pi is replaced by x^2.
std::vector<Polynomial> marginal_polynomials(const CouplingShape& s, bool squared) {
  const std::size_t nv = s.m * s.n;
  const int power = squared ? 2 : 1;
  auto var = [&](std::size_t a) {
    MultiIndex mono(nv);
    mono.bump(a, power);
    return mono;
  };
  std::vector<Polynomial> out;
  for (std::size_t i = 0; i < s.m; ++i) {
    Polynomial g{{MultiIndex(nv), -s.mu[static_cast<Eigen::Index>(i)]}};
    for (std::size_t j = 0; j < s.n; ++j) g.emplace_back(var(pair_index(s, i, j)), 1.0);
    out.push_back(std::move(g));
  }
  for (std::size_t j = 0; j < s.n; ++j) {
    Polynomial g{{MultiIndex(nv), -s.nu[static_cast<Eigen::Index>(j)]}};
    for (std::size_t i = 0; i < s.m; ++i) g.emplace_back(var(pair_index(s, i, j)), 1.0);
    out.push_back(std::move(g));
  }
  return out;
}

/// Face basis for a block whose rows are the degree-<=t monomials: the
/// orthogonal complement of { g x^beta : deg(g x^beta) <= t }.
Eigen::MatrixXd face_basis(const MonomialBasis& basis, int t, const std::vector<Polynomial>& gens) {
  const auto dim = static_cast<Eigen::Index>(basis.prefix_size(t));
  std::vector<Eigen::VectorXd> kernel;
  for (const auto& g : gens) {
    int deg = 0;
    for (const auto& [mono, coeff] : g) deg = std::max(deg, mono.degree());
    if (deg > t) continue;
    const std::size_t shifts = basis.prefix_size(t - deg);
    for (std::size_t b = 0; b < shifts; ++b) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
      for (const auto& [mono, coeff] : g) v[static_cast<Eigen::Index>(basis.index_of(mono + basis[b]))] += coeff;
      kernel.push_back(std::move(v));
    }
  }
  if (kernel.empty()) return {};
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& v : kernel) gram.noalias() += v * v.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double cutoff = 1e-10 * std::max(1.0, eig.eigenvalues().maxCoeff());
  Eigen::Index keep = 0;
  while (keep < dim && eig.eigenvalues()[keep] <= cutoff) ++keep;
  return eig.eigenvectors().leftCols(keep);
}

/// PSD block M_t(e z) over the degree-<=t prefix of `basis`.
PsdBlock localizing_block(const MonomialBasis& basis, const MultiIndex& shift, int t,
                          std::string label) {
  PsdBlock block;
  block.label = std::move(label);
  const std::size_t dim = basis.prefix_size(t);
  block.dim = static_cast<int>(dim);
  block.entries.reserve(dim * (dim + 1) / 2);
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      block.entries.push_back({static_cast<int>(a), static_cast<int>(b),
                               basis.index_of(shift + basis[a] + basis[b]), 1.0});
    }
  }
  return block;
}

LinearTerms quadratic_objective(const MonomialBasis& basis, const CostTensor& cost,
                                bool squared_vars) {
  const std::size_t nv = cost.pairs();
  LinearTerms terms;
  terms.reserve(nv * (nv + 1) / 2);
  for (std::size_t a = 0; a < nv; ++a) {
    for (std::size_t b = a; b < nv; ++b) {
      const double coeff = a == b ? cost.at_pairs(a, a) : cost.at_pairs(a, b) + cost.at_pairs(b, a);
      if (coeff == 0.0) continue;
      MultiIndex mono(nv);
      mono.bump(a, squared_vars ? 2 : 1);
      mono.bump(b, squared_vars ? 2 : 1);
      terms.emplace_back(basis.index_of(mono), coeff);
    }
  }
  return canonical(std::move(terms));
}

std::string subset_label(const std::vector<std::size_t>& subset) {
  std::string out = "M(e{";
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (k) out += ',';
    out += std::to_string(subset[k]);
  }
  return out + "}z)";
}

CouplingShape make_shape(const CostTensor& cost, const Eigen::VectorXd& mu,
                         const Eigen::VectorXd& nu) {
  check_marginals(cost.m(), cost.n(), mu, nu);
  return CouplingShape{cost.m(), cost.n(), mu, nu};
}

void require_level(int level, int min_level, HierarchyKind kind) {
  if (level < min_level) {
    throw LevelError(to_string(kind) + " relaxation requires level >= " +
                     std::to_string(min_level) + ", got " + std::to_string(level));
  }
}

}  // namespace

std::size_t quadratic_coord(const MonomialBasis& basis, std::size_t a, std::size_t b) {
  MultiIndex mono(basis.num_vars());
  mono.bump(a);
  mono.bump(b);
  return basis.index_of(mono);
}

// ---------------------------------------------------------------------------
// Builders

ConicProblem schmudgen_constraints(const CouplingShape& shape, int level,
                                   const BuildLimits& limits) {
  require_level(level, 1, HierarchyKind::Schmudgen);
  check_marginals(shape.m, shape.n, shape.mu, shape.nu);
  const std::size_t nv = shape.m * shape.n;
  Count subsets = 0;
  for (int k = 0; k <= 2 * level; ++k) {
    subsets += binomial(nv, static_cast<Count>(k));
    if (subsets > limits.max_subsets) {
      throw CapacityError("Schmudgen level " + std::to_string(level) + " needs more than " +
                          std::to_string(limits.max_subsets) +
                          " localizing blocks (sum_{k<=2r} binom(mn,k))");
    }
  }

  ConicProblem prob;
  prob.basis = enumerate_basis(nv, 2 * level, limits.max_basis);
  prob.kind = HierarchyKind::Schmudgen;
  prob.level = level;
  prob.shape = shape;
  const MonomialBasis& basis = *prob.basis;

  // Squarefree subsets I in lexicographic order, |I| <= 2r.
  std::vector<std::size_t> subset;
  auto visit = [&](auto&& self, std::size_t next) -> void {
    MultiIndex shift(nv);
    for (std::size_t v : subset) shift.bump(v);
    const int d = (static_cast<int>(subset.size()) + 1) / 2;
    const int t = level - d;
    if (t == 0) {
      prob.nonneg.push_back(basis.index_of(shift));
    } else {
      prob.blocks.push_back(localizing_block(basis, shift, t, subset_label(subset)));
    }
    if (static_cast<int>(subset.size()) == 2 * level) return;
    for (std::size_t v = next; v < nv; ++v) {
      subset.push_back(v);
      self(self, v + 1);
      subset.pop_back();
    }
  };
  visit(visit, 0);
  std::sort(prob.nonneg.begin(), prob.nonneg.end());
  const std::vector<Polynomial> gens = marginal_polynomials(shape, false);
  std::vector<Eigen::MatrixXd> faces(static_cast<std::size_t>(level) + 1);
  for (int t = 1; t <= level; ++t) faces[static_cast<std::size_t>(t)] = face_basis(basis, t, gens);
  for (auto& block : prob.blocks) {
    for (int t = 1; t <= level; ++t) {
      if (static_cast<Count>(block.dim) == basis.prefix_size(t)) block.face = faces[static_cast<std::size_t>(t)];
    }
  }
  prob.equalities = marginal_equalities(basis, shape, level);
  return prob;
}

ConicProblem build_schmudgen(const CostTensor& cost, const Eigen::VectorXd& mu,
                             const Eigen::VectorXd& nu, int level, const BuildLimits& limits) {
  ConicProblem prob = schmudgen_constraints(make_shape(cost, mu, nu), level, limits);
  prob.objective = quadratic_objective(*prob.basis, cost, false);
  prob.cost_scale = std::max(1.0, cost.max_abs());
  return prob;
}

ConicProblem build_putinar(const CostTensor& cost, const Eigen::VectorXd& mu,
                           const Eigen::VectorXd& nu, int level, const BuildLimits& limits) {
  require_level(level, 2, HierarchyKind::Putinar);
  ConicProblem prob;
  prob.shape = make_shape(cost, mu, nu);
  const std::size_t nv = cost.pairs();
  prob.basis = enumerate_basis(nv, 2 * level, limits.max_basis);
  prob.kind = HierarchyKind::Putinar;
  prob.level = level;
  const MonomialBasis& basis = *prob.basis;

  prob.blocks.push_back(localizing_block(basis, MultiIndex(nv), level, "M(z~)"));
  prob.blocks.back().face = face_basis(basis, level, marginal_polynomials(prob.shape, true));

  EqualitySet eqs;
  eqs.add({{0, 1.0}}, 1.0);
  auto square = [&](std::size_t i, std::size_t j) {
    MultiIndex mono(nv);
    mono.bump(cost.pair(i, j), 2);
    return mono;
  };
  for (std::size_t i = 0; i < cost.m(); ++i) {
    Polynomial g{{MultiIndex(nv), mu[static_cast<Eigen::Index>(i)]}};
    for (std::size_t j = 0; j < cost.n(); ++j) g.emplace_back(square(i, j), -1.0);
    add_localizing_equalities(basis, g, level - 1, eqs);
  }
  for (std::size_t j = 0; j < cost.n(); ++j) {
    Polynomial g{{MultiIndex(nv), nu[static_cast<Eigen::Index>(j)]}};
    for (std::size_t i = 0; i < cost.m(); ++i) g.emplace_back(square(i, j), -1.0);
    add_localizing_equalities(basis, g, level - 1, eqs);
  }
  prob.equalities = eqs.take();
  prob.objective = quadratic_objective(basis, cost, true);
  prob.cost_scale = std::max(1.0, cost.max_abs());
  return prob;
}

ConicProblem build_combined(const CostTensor& cost, const Eigen::VectorXd& mu,
                            const Eigen::VectorXd& nu, int level, const BuildLimits& limits) {
  require_level(level, 1, HierarchyKind::Combined);
  ConicProblem prob;
  prob.shape = make_shape(cost, mu, nu);
  const std::size_t nv = cost.pairs();
  prob.basis = enumerate_basis(nv, 2 * level, limits.max_basis);
  prob.kind = HierarchyKind::Combined;
  prob.level = level;
  const MonomialBasis& basis = *prob.basis;

  PsdBlock block;
  block.label = "M~(z)";
  block.dim = static_cast<int>(basis.size());
  for (std::size_t a = 0; a < basis.size(); ++a) {
    for (std::size_t b = a; b < basis.size(); ++b) {
      const MultiIndex sum = basis[a] + basis[b];
      if (!sum.is_even()) continue;
      block.entries.push_back(
          {static_cast<int>(a), static_cast<int>(b), basis.index_of(sum.half()), 1.0});
    }
  }
  block.face = face_basis(basis, 2 * level, marginal_polynomials(prob.shape, true));
  prob.blocks.push_back(std::move(block));
  prob.equalities = marginal_equalities(basis, prob.shape, level);
  prob.objective = quadratic_objective(basis, cost, false);
  prob.cost_scale = std::max(1.0, cost.max_abs());
  return prob;
}

ConicProblem build_first_level(const CostTensor& cost, const Eigen::VectorXd& mu,
                               const Eigen::VectorXd& nu, const BuildLimits& limits) {
  ConicProblem prob;
  prob.shape = make_shape(cost, mu, nu);
  const std::size_t nv = cost.pairs();
  prob.basis = enumerate_basis(nv, 2, limits.max_basis);
  prob.kind = HierarchyKind::FirstLevelDNN;
  prob.level = 1;
  const MonomialBasis& basis = *prob.basis;
  prob.blocks.push_back(localizing_block(basis, MultiIndex(nv), 1, "M_1(z)"));
  prob.blocks.back().face = face_basis(basis, 1, marginal_polynomials(prob.shape, false));
  for (std::size_t pos = basis.degree_begin(2); pos < basis.size(); ++pos) {
    prob.nonneg.push_back(pos);
  }
  prob.equalities = marginal_equalities(basis, prob.shape, 1);
  prob.objective = quadratic_objective(basis, cost, false);
  prob.cost_scale = std::max(1.0, cost.max_abs());
  return prob;
}

ConicProblem build_relaxation(HierarchyKind kind, const CostTensor& cost,
                              const Eigen::VectorXd& mu, const Eigen::VectorXd& nu, int level,
                              const BuildLimits& limits) {
  switch (kind) {
    case HierarchyKind::Schmudgen: return build_schmudgen(cost, mu, nu, level, limits);
    case HierarchyKind::Putinar: return build_putinar(cost, mu, nu, level, limits);
    case HierarchyKind::Combined: return build_combined(cost, mu, nu, level, limits);
    case HierarchyKind::FirstLevelDNN:
      if (level != 1) throw LevelError("first-level relaxation is only defined at level 1");
      return build_first_level(cost, mu, nu, limits);
  }
  throw InvalidInput("unknown hierarchy kind");
}

// ---------------------------------------------------------------------------
// P / Q maps

MomentVector project_P(const MomentVector& z_tilde) {
  const MonomialBasis& src = *z_tilde.basis();
  if (src.max_degree() < 2 || src.max_degree() % 2 != 0) {
    throw InvalidInput("project_P: input basis degree must be even and >= 2, got " +
                       std::to_string(src.max_degree()));
  }
  BasisPtr dst = enumerate_basis(src.num_vars(), src.max_degree() / 2);
  Eigen::VectorXd out(static_cast<Eigen::Index>(dst->size()));
  for (std::size_t pos = 0; pos < dst->size(); ++pos) {
    out[static_cast<Eigen::Index>(pos)] = z_tilde.riesz((*dst)[pos].doubled());
  }
  return MomentVector(std::move(dst), std::move(out));
}

MomentVector extend_Q(const MomentVector& z, Count limit) {
  const MonomialBasis& src = *z.basis();
  BasisPtr dst = enumerate_basis(src.num_vars(), 2 * src.max_degree(), limit);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dst->size()));
  for (std::size_t pos = 0; pos < src.size(); ++pos) {
    out[static_cast<Eigen::Index>(dst->index_of(src[pos].doubled()))] = z[pos];
  }
  return MomentVector(std::move(dst), std::move(out));
}

// ---------------------------------------------------------------------------
// Moment and localizing matrices

Eigen::MatrixXd moment_matrix(const MomentVector& z, const Polynomial& g, int degree) {
  const MonomialBasis& basis = *z.basis();
  int g_degree = 0;
  for (const auto& [mono, coeff] : g) g_degree = std::max(g_degree, mono.degree());
  if (degree < 0 || g_degree + 2 * degree > basis.max_degree()) {
    throw OutOfBasisError("localizing matrix of order " + std::to_string(degree) +
                          " with a degree-" + std::to_string(g_degree) +
                          " polynomial needs moments beyond degree " +
                          std::to_string(basis.max_degree()));
  }
  const std::size_t dim = basis.prefix_size(degree);
  Eigen::MatrixXd out(dim, dim);
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      const MultiIndex shift = basis[a] + basis[b];
      double value = 0.0;
      for (const auto& [mono, coeff] : g) value += coeff * z.riesz(mono + shift);
      out(a, b) = value;
      out(b, a) = value;
    }
  }
  return out;
}

Eigen::MatrixXd moment_matrix(const MomentVector& z, int degree) {
  return moment_matrix(z, Polynomial{{MultiIndex(z.basis()->num_vars()), 1.0}}, degree);
}

double marginal_residual(const MomentVector& z, const CouplingShape& shape, int level) {
  if (z.basis()->num_vars() != shape.m * shape.n) {
    throw InvalidInput("marginal_residual: moment vector is not over m*n variables");
  }
  double worst = 0.0;
  for (const auto& row : marginal_equalities(*z.basis(), shape, level)) {
    double value = -row.rhs;
    for (const auto& [coord, coeff] : row.terms) value += coeff * z[coord];
    worst = std::max(worst, std::abs(value));
  }
  return worst;
}

Eigen::MatrixXd reduced_moment_matrix(const MomentVector& z, const CouplingShape& shape,
                                      const std::vector<std::size_t>& subset, int level,
                                      double tol) {
  const double residual = marginal_residual(z, shape, level);
  if (residual > tol) {
    throw ToleranceError("reduced moment matrix needs the marginal equalities; residual " +
                         std::to_string(residual) + " exceeds " + std::to_string(tol));
  }
  const std::size_t nv = shape.m * shape.n;
  MultiIndex e(nv);
  for (std::size_t v : subset) {
    if (e[v] != 0) throw InvalidInput("reduced_moment_matrix: subset has repeated variables");
    e.bump(v);
  }
  const int t = level - (static_cast<int>(subset.size()) + 1) / 2;
  if (t < 0) throw InvalidInput("reduced_moment_matrix: subset too large for the level");
  const Eigen::MatrixXd full = moment_matrix(z, Polynomial{{e, 1.0}}, t);
  const MonomialBasis& basis = *z.basis();
  const auto begin = static_cast<Eigen::Index>(basis.degree_begin(t));
  const auto count = static_cast<Eigen::Index>(basis.prefix_size(t)) - begin;
  return full.block(begin, begin, count, count);
}

// ---------------------------------------------------------------------------
// Evaluation

Eigen::MatrixXd assemble_block(const PsdBlock& block, const Eigen::VectorXd& z) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(block.dim, block.dim);
  for (const auto& e : block.entries) {
    out(e.row, e.col) += e.coeff * z[static_cast<Eigen::Index>(e.coord)];
  }
  out.triangularView<Eigen::StrictlyLower>() = out.transpose().triangularView<Eigen::StrictlyLower>();
  return out;
}

FeasibilityAudit audit(const ConicProblem& problem, const Eigen::VectorXd& z) {
  FeasibilityAudit out;
  for (const auto& row : problem.equalities) {
    double value = -row.rhs;
    for (const auto& [coord, coeff] : row.terms) value += coeff * z[static_cast<Eigen::Index>(coord)];
    out.max_equality_residual = std::max(out.max_equality_residual, std::abs(value));
  }
  out.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& block : problem.blocks) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(assemble_block(block, z),
                                                       Eigen::EigenvaluesOnly);
    out.min_eigenvalue = std::min(out.min_eigenvalue, eig.eigenvalues()[0]);
  }
  if (problem.blocks.empty()) out.min_eigenvalue = 0.0;
  out.min_nonneg = std::numeric_limits<double>::infinity();
  for (std::size_t coord : problem.nonneg) {
    out.min_nonneg = std::min(out.min_nonneg, z[static_cast<Eigen::Index>(coord)]);
  }
  if (problem.nonneg.empty()) out.min_nonneg = 0.0;
  return out;
}

double evaluate_objective(const ConicProblem& problem, const Eigen::VectorXd& z) {
  double value = 0.0;
  for (const auto& [coord, coeff] : problem.objective) {
    value += coeff * z[static_cast<Eigen::Index>(coord)];
  }
  return value;
}

// ---------------------------------------------------------------------------
// SDPA

void write_sdpa(const ConicProblem& problem, std::ostream& out) {
  const std::size_t n_coords = problem.num_coords();
  // z_0 = 1 rows become redundant once z_0 is substituted.
  std::vector<const LinearEquality*> rows;
  for (const auto& row : problem.equalities) {
    if (row.terms.size() == 1 && row.terms[0].first == 0) continue;
    rows.push_back(&row);
  }
  const std::size_t lp_dim = problem.nonneg.size() + 2 * rows.size();

  out.precision(17);
  out << "* gwsos " << to_string(problem.kind) << " level " << problem.level << '\n';
  out << "* variables x_k = z[k], k = 1.." << (n_coords - 1) << "; z[0] fixed to 1\n";
  double offset = 0.0;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_coords));
  for (const auto& [coord, coeff] : problem.objective) c[static_cast<Eigen::Index>(coord)] += coeff;
  offset = c[0];
  out << "* objective offset " << offset << '\n';
  out << (n_coords - 1) << '\n';
  const std::size_t n_blocks = problem.blocks.size() + (lp_dim > 0 ? 1 : 0);
  out << n_blocks << '\n';
  for (const auto& block : problem.blocks) out << block.dim << ' ';
  if (lp_dim > 0) out << '-' << lp_dim;
  out << '\n';
  for (std::size_t k = 1; k < n_coords; ++k) {
    out << c[static_cast<Eigen::Index>(k)] << (k + 1 < n_coords ? " " : "");
  }
  out << '\n';

  // Merge duplicate (k, block, row, col) contributions before writing.
  std::map<std::tuple<std::size_t, int, int, int>, double> entries;
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    for (const auto& e : problem.blocks[b].entries) {
      // Matrix = sum_k F_k x_k - F_0 and z_0 contributes constant coeff.
      const double sign = e.coord == 0 ? -1.0 : 1.0;
      entries[{e.coord, static_cast<int>(b) + 1, e.row + 1, e.col + 1}] += sign * e.coeff;
    }
  }
  const int lp_block = static_cast<int>(problem.blocks.size()) + 1;
  int diag = 1;
  for (std::size_t coord : problem.nonneg) {
    entries[{coord, lp_block, diag, diag}] += coord == 0 ? -1.0 : 1.0;
    ++diag;
  }
  for (const LinearEquality* row : rows) {
    for (int sign : {1, -1}) {
      double constant = -row->rhs;
      for (const auto& [coord, coeff] : row->terms) {
        if (coord == 0) {
          constant += coeff;
        } else {
          entries[{coord, lp_block, diag, diag}] += sign * coeff;
        }
      }
      if (constant != 0.0) entries[{0, lp_block, diag, diag}] += -sign * constant;
      ++diag;
    }
  }
  for (const auto& [key, value] : entries) {
    if (value == 0.0) continue;
    const auto& [k, blk, r, col] = key;
    out << k << ' ' << blk << ' ' << r << ' ' << col << ' ' << value << '\n';
  }
}

SdpaProblem read_sdpa(std::istream& in) {
  std::string text;
  {
    std::ostringstream buf;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '*' || line[0] == '"') continue;
      for (char& ch : line) {
        if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
      }
      buf << line << '\n';
    }
    text = buf.str();
  }
  std::istringstream ss(text);
  SdpaProblem prob;
  int n_blocks = 0;
  if (!(ss >> prob.num_vars >> n_blocks)) throw ParseError("SDPA: missing header");
  prob.block_struct.resize(static_cast<std::size_t>(n_blocks));
  for (int& b : prob.block_struct) {
    if (!(ss >> b)) throw ParseError("SDPA: truncated block structure");
  }
  prob.c.resize(prob.num_vars);
  for (int k = 0; k < prob.num_vars; ++k) {
    if (!(ss >> prob.c[k])) throw ParseError("SDPA: truncated objective vector");
  }
  SdpaProblem::Entry e{};
  while (ss >> e.k >> e.block >> e.row >> e.col >> e.value) prob.entries.push_back(e);
  if (!ss.eof()) throw ParseError("SDPA: malformed entry line");
  return prob;
}

}  // namespace gwsos
