#include <doctest.h>

#include <cmath>
#include <random>

#include "gwsos/metric.hpp"
#include "support.hpp"

using namespace gwsos;

namespace {

MetricMeasureSpace two_points(double d) {
  Eigen::MatrixXd m(2, 2);
  m << 0, d, d, 0;
  return MetricMeasureSpace::from_distances(m);
}

/// Mixture of Diracs at random couplings: a feasible point of every level.
MomentVector mixture(testing::Rng& rng, const Eigen::VectorXd& mu, const Eigen::VectorXd& nu, int level,
                     int atoms = 3) {
  auto basis = enumerate_basis(static_cast<std::size_t>(mu.size() * nu.size()), 2 * level);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis->size()));
  for (int k = 0; k < atoms; ++k) {
    z += testing::dirac_moments(basis, testing::flatten(testing::random_coupling(rng, mu, nu))).values() /
         atoms;
  }
  return MomentVector(basis, z);
}

/// Composite measure of two couplings through the middle weights beta:
/// mass pi1_ij pi2_jk / beta_j at (i, j, k).
Eigen::VectorXd composite(const Eigen::MatrixXd& pi1, const Eigen::MatrixXd& pi2,
                          const Eigen::VectorXd& beta) {
  const Eigen::Index m = pi1.rows(), n = pi1.cols(), p = pi2.cols();
  Eigen::VectorXd x(m * n * p);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < p; ++k) x[(i * n + j) * p + k] = pi1(i, j) * pi2(j, k) / beta[j];
  return x;
}

}  // namespace

TEST_SUITE("metric") {

TEST_CASE("self distance vanishes") {
  testing::Rng rng(10);
  for (std::size_t m : {2u, 3u, 4u}) {
    for (double p : {1.0, 2.0}) {
      auto x = testing::random_space(rng, m, m % 2 == 0);
      DistanceOptions opt;
      opt.p = p;
      const DistanceReport r = distortion_distance(x, x, opt);
      CHECK(r.value >= 0.0);
      CHECK(r.value <= 1e-5);
      CHECK(r.certificate.solved);
    }
  }
}

TEST_CASE("distance is symmetric") {
  testing::Rng rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    auto x = testing::random_space(rng, 3), y = testing::random_space(rng, 2 + trial);
    const double a = distortion_distance(x, y).value;
    const double b = distortion_distance(y, x).value;
    CHECK(std::abs(a - b) <= 1e-6 * (1 + a));
  }
}

TEST_CASE("two-point spaces at twice the scale") {
  const DistanceReport r = distortion_distance(two_points(1), two_points(2));
  CHECK(r.value <= std::sqrt(0.5) + 1e-6);
  CHECK(r.value == doctest::Approx(std::sqrt(r.certificate.lower_bound)));
}

TEST_CASE("gluing single-atom spaces gives the forced Dirac") {
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  auto basis = enumerate_basis(1, 2);
  auto z = testing::dirac_moments(basis, one);
  const GluedMoments g = glue(z, testing::shape_of(one, one), z, testing::shape_of(one, one), 1);
  CHECK(g.z.values() == z.values());
}

TEST_CASE("gluing rank-one inputs gives the composite measure") {
  testing::Rng rng(18);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t m = 2, n = 2 + trial % 2, p = 2;
    const Eigen::VectorXd alpha = testing::random_weights(rng, m), beta = testing::random_weights(rng, n),
                          gamma = testing::random_weights(rng, p);
    const Eigen::MatrixXd pi1 = testing::random_coupling(rng, alpha, beta);
    const Eigen::MatrixXd pi2 = testing::random_coupling(rng, beta, gamma);
    auto z1 = testing::dirac_moments(enumerate_basis(m * n, 2), testing::flatten(pi1));
    auto z2 = testing::dirac_moments(enumerate_basis(n * p, 2), testing::flatten(pi2));
    const GluedMoments g =
        glue(z1, testing::shape_of(alpha, beta), z2, testing::shape_of(beta, gamma), 1);
    const auto expected = testing::dirac_moments(g.z.basis(), composite(pi1, pi2, beta));
    CHECK((g.z.values() - expected.values()).cwiseAbs().maxCoeff() <= 1e-14);

    // The (Z, X) marginal is the Dirac at the composed coupling, transposed.
    const Eigen::MatrixXd composed = (pi1 * beta.cwiseInverse().asDiagonal() * pi2).transpose();
    const MomentVector z3 = third_marginal(g);
    const auto direct = testing::dirac_moments(z3.basis(), testing::flatten(composed));
    CHECK((z3.values() - direct.values()).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("marginal recovery and third-marginal feasibility on mixtures") {
  testing::Rng rng(19);
  for (int level : {1, 2}) {
    for (int trial = 0; trial < 4; ++trial) {
      const Eigen::VectorXd alpha = testing::random_weights(rng, 2), beta = testing::random_weights(rng, 2),
                            gamma = testing::random_weights(rng, 2);
      const auto z1 = mixture(rng, alpha, beta, level);
      const auto z2 = mixture(rng, beta, gamma, level);
      const auto s1 = testing::shape_of(alpha, beta), s2 = testing::shape_of(beta, gamma);
      const GluedMoments g = glue(z1, s1, z2, s2, level);
      CHECK((glue_marginal(g, GlueAxis::XY).values() - z1.values()).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((glue_marginal(g, GlueAxis::YZ).values() - z2.values()).cwiseAbs().maxCoeff() <= 1e-12);
      const MomentVector z3 = third_marginal(g);
      const PiAudit a = audit_pi(z3, glue_marginal_shape(g, GlueAxis::ZX), level);
      CHECK(a.pass());
      CHECK(a.max_equality_residual <= 1e-12);
    }
  }
}

TEST_CASE("gluing rejects infeasible or mismatched inputs") {
  testing::Rng rng(20);
  const Eigen::VectorXd a = testing::random_weights(rng, 2), b = testing::random_weights(rng, 2);
  auto z = mixture(rng, a, b, 1);
  const auto s = testing::shape_of(a, b);
  auto bad = z;
  bad.values()[1] += 1e-3;
  CHECK_THROWS_AS(glue(bad, s, z, testing::shape_of(b, b), 1), ToleranceError);
  CHECK_THROWS_AS(glue(z, s, z, s, 1), InvalidInput);
}

TEST_CASE("audit flags a moment vector outside the coupling set") {
  testing::Rng rng(22);
  const Eigen::VectorXd a = testing::random_weights(rng, 2), b = testing::random_weights(rng, 2);
  auto z = mixture(rng, a, b, 1);
  // Make a cross moment negative: the matching 1x1 reduced block fails.
  const auto basis = z.basis();
  MultiIndex cross(4);
  cross.bump(0);
  cross.bump(3);
  z.values()[static_cast<Eigen::Index>(basis->index_of(cross))] = -0.01;
  const PiAudit audit = audit_pi(z, testing::shape_of(a, b), 1);
  CHECK(audit.min_eigenvalue < -1e-8);
  CHECK_FALSE(audit.pass());
}

TEST_CASE("triangle checks on degenerate triples") {
  testing::Rng rng(24);
  auto x = testing::random_space(rng, 3);
  auto z = testing::random_space(rng, 3);
  const TriangleReport same = triangle_check(x, x, x);
  CHECK(same.pass);
  CHECK(std::abs(same.slack) <= 1e-5);
  const TriangleReport partial = triangle_check(x, x, z);
  CHECK(partial.pass);
  CHECK(partial.d_xy <= 1e-5);
  CHECK(std::abs(partial.d_yz - partial.d_xz) <= 1e-5 * (1 + partial.d_xz));
}

}
