#include <doctest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "gwsos/relax.hpp"
#include "support.hpp"

using namespace gwsos;

namespace {

MomentVector random_moments(testing::Rng& rng, const BasisPtr& basis) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(static_cast<Eigen::Index>(basis->size()));
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = g(rng);
  v[0] = 1.0;
  return MomentVector(basis, v);
}

Polynomial random_polynomial(testing::Rng& rng, std::size_t nv, int degree) {
  std::normal_distribution<double> g;
  auto basis = enumerate_basis(nv, degree);
  Polynomial p;
  for (const auto& mono : basis->entries()) {
    if (rng() % 2) p.emplace_back(mono, g(rng));
  }
  if (p.empty()) p.emplace_back(MultiIndex(nv), 1.0);
  return p;
}

// Entry (a, b) = sum_gamma g_gamma z_{gamma + a + b}, with rows enumerated
// by an independent nested loop over exponent vectors.
Eigen::MatrixXd brute_localizing(const MomentVector& z, const Polynomial& g, int r) {
  const std::size_t nv = z.basis()->num_vars();
  std::vector<MultiIndex> rows;
  for (const auto& e : z.basis()->entries()) {
    if (e.degree() <= r) rows.push_back(e);
  }
  const auto k = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd out(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      double s = 0.0;
      for (const auto& [mono, coeff] : g) {
        std::vector<int> e(nv);
        for (std::size_t v = 0; v < nv; ++v) {
          e[v] = mono[v] + rows[static_cast<std::size_t>(a)][v] + rows[static_cast<std::size_t>(b)][v];
        }
        s += coeff * z.riesz(MultiIndex(e));
      }
      out(a, b) = s;
    }
  }
  return out;
}

struct Instance {
  CostTensor cost;
  Eigen::VectorXd mu, nu;
  Eigen::MatrixXd dx, dy;
};

Instance random_instance(testing::Rng& rng, std::size_t m, std::size_t n, bool uniform = false) {
  auto x = testing::random_space(rng, m, uniform);
  auto y = testing::random_space(rng, n, uniform);
  return {build_cost_tensor(x, y, 2, 1), x.weights(), y.weights(), x.distances(), y.distances()};
}

void check_rank_one_feasible(const ConicProblem& prob, const MomentVector& z, double objective) {
  const FeasibilityAudit a = audit(prob, z.values());
  CHECK(a.max_equality_residual <= 1e-12);
  CHECK(a.min_eigenvalue >= -1e-12);
  CHECK(a.min_nonneg >= 0.0);
  CHECK(evaluate_objective(prob, z.values()) == doctest::Approx(objective).epsilon(1e-12));
}

}  // namespace

TEST_SUITE("relax") {

TEST_CASE("moment vectors address only their basis") {
  auto basis = enumerate_basis(2, 2);
  auto z = MomentVector::unit(basis);
  CHECK(z[0] == 1.0);
  CHECK(z.values().tail(5).isZero());
  CHECK_THROWS_AS(z.riesz(MultiIndex(std::vector<int>{3, 0})), OutOfBasisError);
  auto d = MomentVector::dirac(basis, Eigen::Vector2d(0.5, 2.0));
  CHECK(d.riesz(MultiIndex(std::vector<int>{1, 1})) == 1.0);
  CHECK(d.riesz(MultiIndex(std::vector<int>{0, 2})) == 4.0);
}

TEST_CASE("moment and localizing matrices of a univariate Dirac") {
  auto basis = enumerate_basis(1, 3);
  auto z = testing::dirac_moments(basis, Eigen::VectorXd::Constant(1, 0.5));
  Eigen::Matrix2d m1;
  m1 << 1, 0.5, 0.5, 0.25;
  CHECK((moment_matrix(z, 1) - m1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(testing::min_eigenvalue(moment_matrix(z, 1)) == doctest::Approx(0.0).epsilon(1e-15));
  Polynomial g{{MultiIndex(std::vector<int>{1}), 1.0}};
  Eigen::Matrix2d m1g;
  m1g << 0.5, 0.25, 0.25, 0.125;
  CHECK((moment_matrix(z, g, 1) - m1g).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("moment and localizing matrices match the definitional double loop") {
  testing::Rng rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t nv = 2 + trial % 3;
    const int r = 1 + trial % 2;
    const int gdeg = trial % 3;
    auto basis = enumerate_basis(nv, 2 * r + gdeg);
    auto z = random_moments(rng, basis);
    CHECK(moment_matrix(z, r) == brute_localizing(z, {{MultiIndex(nv), 1.0}}, r));
    auto g = random_polynomial(rng, nv, gdeg);
    const Eigen::MatrixXd fast = moment_matrix(z, g, r);
    const Eigen::MatrixXd slow = brute_localizing(z, g, r);
    CHECK((fast - slow).cwiseAbs().maxCoeff() <= 1e-13 * (1.0 + slow.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("block entries are linear in the moments") {
  testing::Rng rng(21);
  auto inst = random_instance(rng, 2, 2);
  for (auto kind : {HierarchyKind::Schmudgen, HierarchyKind::Combined, HierarchyKind::FirstLevelDNN,
                    HierarchyKind::Putinar}) {
    const int level = kind == HierarchyKind::Putinar ? 2 : 1;
    auto prob = build_relaxation(kind, inst.cost, inst.mu, inst.nu, level);
    auto z1 = random_moments(rng, prob.basis).values();
    auto z2 = random_moments(rng, prob.basis).values();
    for (const auto& block : prob.blocks) {
      const Eigen::MatrixXd a = assemble_block(block, z1);
      const Eigen::MatrixXd b = assemble_block(block, z2);
      CHECK((assemble_block(block, 2.0 * z1) - 2.0 * a).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((assemble_block(block, z1 + z2) - a - b).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(a == a.transpose());
    }
    for (const auto& [coord, coeff] : prob.objective) CHECK(coord < prob.num_coords());
  }
}

TEST_CASE("schmudgen level one census on 2x2") {
  testing::Rng rng(4);
  auto inst = random_instance(rng, 2, 2);
  auto prob = build_schmudgen(inst.cost, inst.mu, inst.nu, 1);
  CHECK(prob.basis->size() == 15);
  REQUIRE(prob.blocks.size() == 1);
  CHECK(prob.blocks[0].dim == 5);
  // Squarefree subsets of size 1 and 2 give 1x1 localizing blocks, kept as
  // nonnegative coordinates: 4 linear and 6 cross monomials.
  CHECK(prob.nonneg.size() == 10);
  std::set<int> degrees;
  for (auto c : prob.nonneg) degrees.insert((*prob.basis)[c].degree());
  CHECK(degrees == std::set<int>{1, 2});
}

TEST_CASE("schmudgen level two census counts squarefree subsets") {
  testing::Rng rng(4);
  auto inst = random_instance(rng, 2, 2);
  auto prob = build_schmudgen(inst.cost, inst.mu, inst.nu, 2);
  // |I| <= 4 over 4 variables; blocks of size > 1 are PSD blocks, the rest
  // nonnegativity rows.
  const std::size_t subsets = 1 + 4 + 6 + 4 + 1;
  CHECK(prob.blocks.size() + prob.nonneg.size() == subsets);
  std::map<int, int> dims;
  for (const auto& b : prob.blocks) dims[b.dim]++;
  CHECK(dims[static_cast<int>(basis_size(4, 2))] == 1);
  CHECK(dims[static_cast<int>(basis_size(4, 1))] == 4 + 6);
  CHECK(prob.nonneg.size() == 5);
}

TEST_CASE("marginal equality count equals a dense brute-force generator") {
  testing::Rng rng(8);
  for (auto [m, n, r] : std::vector<std::tuple<std::size_t, std::size_t, int>>{
           {1, 1, 1}, {2, 1, 1}, {2, 2, 1}, {2, 3, 1}, {3, 3, 1}, {2, 2, 2}}) {
    auto inst = random_instance(rng, m, n);
    auto prob = build_schmudgen(inst.cost, inst.mu, inst.nu, r);
    const auto& basis = *prob.basis;
    const std::size_t nv = m * n;
    std::vector<Polynomial> gens;
    for (std::size_t i = 0; i < m; ++i) {
      Polynomial g{{MultiIndex(nv), -inst.mu[static_cast<Eigen::Index>(i)]}};
      for (std::size_t j = 0; j < n; ++j) g.emplace_back(MultiIndex::unit(nv, i * n + j), 1.0);
      gens.push_back(g);
    }
    for (std::size_t j = 0; j < n; ++j) {
      Polynomial g{{MultiIndex(nv), -inst.nu[static_cast<Eigen::Index>(j)]}};
      for (std::size_t i = 0; i < m; ++i) g.emplace_back(MultiIndex::unit(nv, i * n + j), 1.0);
      gens.push_back(g);
    }
    const std::size_t base = gens.size();
    for (std::size_t k = 0; k < base; ++k) {
      for (std::size_t a = 0; a < nv; ++a) {
        Polynomial h = gens[k];
        for (auto& [mono, c] : h) mono = mono + MultiIndex::unit(nv, a);
        gens.push_back(h);
      }
    }
    std::set<std::vector<double>> rows;
    std::vector<double> one(basis.size() + 1, 0.0);
    one[0] = 1.0;
    one.back() = 1.0;
    rows.insert(one);
    for (const auto& g : gens) {
      for (const auto& alpha : basis.entries()) {
        if (alpha.degree() > r - 1) continue;
        for (const auto& beta : basis.entries()) {
          if (beta.degree() > r - 1) continue;
          std::vector<double> row(basis.size() + 1, 0.0);
          for (const auto& [mono, c] : g) row[basis.index_of(mono + alpha + beta)] += c;
          bool nonzero = false;
          for (std::size_t k = 0; k < basis.size(); ++k) nonzero |= row[k] != 0.0;
          if (nonzero) rows.insert(row);
        }
      }
    }
    CHECK(prob.equalities.size() == rows.size());
  }
}

TEST_CASE("rank-one couplings are feasible with the GW objective") {
  testing::Rng rng(31);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t m = 1 + trial % 3, n = 1 + (trial / 3) % 3;
    auto inst = random_instance(rng, m, n, trial % 2 == 0);
    const Eigen::MatrixXd pi = testing::random_coupling(rng, inst.mu, inst.nu);
    const double value = testing::gw_objective(inst.dx, inst.dy, pi, 2, 1);
    const Eigen::VectorXd x = testing::flatten(pi);
    for (int r : {1, 2}) {
      if (r == 2 && m * n > 6) continue;
      auto s = build_schmudgen(inst.cost, inst.mu, inst.nu, r);
      check_rank_one_feasible(s, testing::dirac_moments(s.basis, x), value);
      auto c = build_combined(inst.cost, inst.mu, inst.nu, r);
      check_rank_one_feasible(c, testing::dirac_moments(c.basis, x), value);
    }
    auto f = build_first_level(inst.cost, inst.mu, inst.nu);
    check_rank_one_feasible(f, testing::dirac_moments(f.basis, x), value);
    if (m * n <= 6) {
      auto p = build_putinar(inst.cost, inst.mu, inst.nu, 2);
      check_rank_one_feasible(p, testing::dirac_moments(p.basis, x.cwiseSqrt()), value);
    }
  }
}

TEST_CASE("combined block parity pattern at m = n = 1") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(1, 1);
  auto x = MetricMeasureSpace::from_distances(d);
  auto prob = build_combined(build_cost_tensor(x, x, 2, 1), x.weights(), x.weights(), 1);
  REQUIRE(prob.blocks.size() == 1);
  REQUIRE(prob.blocks[0].dim == 3);
  Eigen::VectorXd z(3);
  z << 1.0, 0.3, 0.7;
  const Eigen::MatrixXd b = assemble_block(prob.blocks[0], z);
  CHECK(b(0, 1) == 0.0);
  CHECK(b(1, 2) == 0.0);
  CHECK(b(0, 2) == 0.3);
  CHECK(b(1, 1) == 0.3);
  CHECK(b(2, 2) == 0.7);
}

TEST_CASE("combined block is the moment matrix of the square-root extension") {
  testing::Rng rng(12);
  auto inst = random_instance(rng, 2, 2);
  for (int r : {1, 2}) {
    auto prob = build_combined(inst.cost, inst.mu, inst.nu, r);
    auto z = random_moments(rng, prob.basis);
    const Eigen::MatrixXd block = assemble_block(prob.blocks[0], z.values());
    CHECK(block == moment_matrix(extend_Q(z), 2 * r));
    if (r == 1) {
      // {1, pi_a} rows: the even entries of M_1(z) survive, the odd ones vanish.
      const Eigen::MatrixXd m1 = moment_matrix(z, 1);
      CHECK(block(0, 0) == m1(0, 0));
      for (int a = 1; a < 5; ++a) {
        CHECK(block(0, a) == 0.0);
        CHECK(block(a, a) == m1(0, a));
      }
    }
  }
}

TEST_CASE("square-root maps P and Q") {
  auto b4 = enumerate_basis(3, 4);
  auto unit = project_P(MomentVector::unit(b4));
  CHECK(unit.basis()->max_degree() == 2);
  CHECK(unit[0] == 1.0);
  CHECK(unit.values().tail(unit.size() - 1).isZero());

  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b4->size()));
  v[0] = 1.0;
  v[static_cast<Eigen::Index>(b4->index_of(MultiIndex(std::vector<int>{2, 0, 0})))] = 0.3;
  auto p = project_P(MomentVector(b4, v));
  CHECK(p.riesz(MultiIndex(std::vector<int>{1, 0, 0})) == 0.3);

  auto b2 = enumerate_basis(3, 2);
  auto q = extend_Q(MomentVector::unit(b2));
  CHECK(q[0] == 1.0);
  CHECK(q.values().tail(q.size() - 1).isZero());

  testing::Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    auto z = random_moments(rng, b2);
    CHECK(project_P(extend_Q(z)).values() == z.values());
  }
}

TEST_CASE("square-root maps transfer feasibility between hierarchies") {
  testing::Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    auto inst = random_instance(rng, 2, 2);
    auto s1 = build_schmudgen(inst.cost, inst.mu, inst.nu, 1);
    auto p2 = build_putinar(inst.cost, inst.mu, inst.nu, 2);
    // A mixture of three rank-one points is feasible for S-DGW-1.
    Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s1.num_coords()));
    Eigen::VectorXd zt = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p2.num_coords()));
    for (int k = 0; k < 3; ++k) {
      const Eigen::VectorXd x = testing::flatten(testing::random_coupling(rng, inst.mu, inst.nu));
      z += testing::dirac_moments(s1.basis, x).values() / 3.0;
      zt += testing::dirac_moments(p2.basis, x.cwiseSqrt()).values() / 3.0;
    }
    CHECK(audit(s1, z).feasible(1e-12, 1e-12));
    const auto q = extend_Q(MomentVector(s1.basis, z));
    CHECK(audit(p2, q.values()).feasible(1e-9, 1e-9));
    CHECK(evaluate_objective(p2, q.values()) == doctest::Approx(evaluate_objective(s1, z)));
    CHECK(audit(p2, zt).feasible(1e-12, 1e-12));
    CHECK(audit(s1, project_P(MomentVector(p2.basis, zt)).values()).feasible(1e-12, 1e-12));
  }
}

TEST_CASE("putinar rows imply the ball identity") {
  testing::Rng rng(3);
  auto inst = random_instance(rng, 2, 3);
  auto prob = build_putinar(inst.cost, inst.mu, inst.nu, 2);
  // At any point satisfying the rows, sum_a zt_{2 e_a} = 1. Verify on random
  // solutions of the equality system.
  const auto k = static_cast<Eigen::Index>(prob.num_coords());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(prob.equalities.size()), k);
  Eigen::VectorXd b(a.rows());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (const auto& [c, v] : prob.equalities[static_cast<std::size_t>(r)].terms) a(r, static_cast<Eigen::Index>(c)) += v;
    b[r] = prob.equalities[static_cast<std::size_t>(r)].rhs;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  const Eigen::VectorXd particular = cod.solve(b);
  const Eigen::MatrixXd null = cod.matrixZ().bottomRows(k - cod.rank()).transpose();
  const Eigen::MatrixXd kernel = cod.colsPermutation() * null;
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd w(kernel.cols());
    for (Eigen::Index c = 0; c < w.size(); ++c) w[c] = g(rng);
    const Eigen::VectorXd z = particular + kernel * w;
    REQUIRE((a * z - b).cwiseAbs().maxCoeff() <= 1e-9);
    double sum = 0.0;
    for (std::size_t v = 0; v < 6; ++v) {
      MultiIndex sq(6);
      sq.bump(v, 2);
      sum += z[static_cast<Eigen::Index>(prob.basis->index_of(sq))];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("reduced moment matrices") {
  testing::Rng rng(41);
  auto inst = random_instance(rng, 2, 2);
  const auto shape = testing::shape_of(inst.mu, inst.nu);
  auto basis = enumerate_basis(4, 4);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis->size()));
  for (int k = 0; k < 4; ++k) {
    z += testing::dirac_moments(basis, testing::flatten(testing::random_coupling(rng, inst.mu, inst.nu)))
             .values() / 4.0;
  }
  const MomentVector zm(basis, z);
  const auto b2 = enumerate_basis(4, 2);
  const MomentVector z1(b2, z.head(static_cast<Eigen::Index>(b2->size())));
  const Eigen::MatrixXd full = moment_matrix(z1, 1);
  CHECK(reduced_moment_matrix(z1, shape, {}, 1) == full.bottomRightCorner(4, 4));

  // On measures supported in the coupling polytope every reduced matrix and
  // every full localizing matrix is PSD.
  for (std::vector<std::size_t> subset : std::vector<std::vector<std::size_t>>{
           {}, {0}, {1, 2}, {0, 3}, {0, 1, 2}, {0, 1, 2, 3}}) {
    CHECK(testing::min_eigenvalue(reduced_moment_matrix(zm, shape, subset, 2)) >= -1e-12);
    Polynomial e{{MultiIndex(4), 1.0}};
    for (auto v : subset) e[0].first.bump(v);
    const int t = 2 - (static_cast<int>(subset.size()) + 1) / 2;
    CHECK(testing::min_eigenvalue(moment_matrix(zm, e, t)) >= -1e-12);
  }

  Eigen::VectorXd bad = z1.values();
  bad[1] += 1e-3;
  CHECK_THROWS_AS(reduced_moment_matrix(MomentVector(b2, bad), shape, {}, 1), ToleranceError);
}

TEST_CASE("level and capacity guards") {
  testing::Rng rng(1);
  auto inst = random_instance(rng, 2, 2);
  CHECK_THROWS_AS(build_putinar(inst.cost, inst.mu, inst.nu, 1), LevelError);
  CHECK_THROWS_AS(build_schmudgen(inst.cost, inst.mu, inst.nu, 0), LevelError);
  CHECK_THROWS_AS(build_relaxation(HierarchyKind::FirstLevelDNN, inst.cost, inst.mu, inst.nu, 2),
                  LevelError);
  BuildLimits tight;
  tight.max_subsets = 5;
  CHECK_THROWS_AS(build_schmudgen(inst.cost, inst.mu, inst.nu, 1, tight), CapacityError);
  tight = {};
  tight.max_basis = 10;
  CHECK_THROWS_AS(build_first_level(inst.cost, inst.mu, inst.nu, tight), CapacityError);
  CHECK_THROWS_AS(build_first_level(inst.cost, inst.mu, Eigen::VectorXd::Ones(3) / 3, {}), InvalidInput);
}

TEST_CASE("hierarchy names round trip") {
  for (auto kind : {HierarchyKind::Schmudgen, HierarchyKind::Putinar, HierarchyKind::Combined,
                    HierarchyKind::FirstLevelDNN}) {
    CHECK(parse_hierarchy(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_hierarchy("lasserre"), InvalidInput);
}

TEST_CASE("SDPA export evaluates to the same blocks") {
  testing::Rng rng(77);
  auto inst = random_instance(rng, 2, 2);
  for (auto kind : {HierarchyKind::FirstLevelDNN, HierarchyKind::Schmudgen}) {
    auto prob = build_relaxation(kind, inst.cost, inst.mu, inst.nu, 1);
    std::stringstream buf;
    write_sdpa(prob, buf);
    const SdpaProblem sdpa = read_sdpa(buf);
    CHECK(sdpa.num_vars == static_cast<int>(prob.num_coords()) - 1);
    REQUIRE(sdpa.block_struct.size() == prob.blocks.size() + 1);

    auto z = random_moments(rng, prob.basis).values();
    std::vector<Eigen::MatrixXd> mats;
    for (int dim : sdpa.block_struct) {
      const int d = std::abs(dim);
      mats.push_back(Eigen::MatrixXd::Zero(d, d));
    }
    for (const auto& e : sdpa.entries) {
      const double x = e.k == 0 ? -1.0 : z[e.k];
      auto& mat = mats[static_cast<std::size_t>(e.block - 1)];
      mat(e.row - 1, e.col - 1) += e.value * x;
      if (e.row != e.col) mat(e.col - 1, e.row - 1) += e.value * x;
    }
    for (std::size_t b = 0; b < prob.blocks.size(); ++b) {
      CHECK((mats[b] - assemble_block(prob.blocks[b], z)).cwiseAbs().maxCoeff() <= 1e-12);
    }
    double obj = 0.0;
    for (int k = 1; k <= sdpa.num_vars; ++k) obj += sdpa.c[k - 1] * z[k];
    CHECK(obj == doctest::Approx(evaluate_objective(prob, z)));
  }
}

}
