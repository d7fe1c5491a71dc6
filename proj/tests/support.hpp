#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gwsos/metric.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline Eigen::MatrixXd random_points(Rng& rng, std::size_t m, std::size_t dim = 2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd p(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index k = 0; k < p.cols(); ++k) p(i, k) = u(rng);
  return p;
}

/// Strictly positive probability vector.
inline Eigen::VectorXd random_weights(Rng& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Eigen::VectorXd w(static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = u(rng);
  return w / w.sum();
}

inline gwsos::MetricMeasureSpace random_space(Rng& rng, std::size_t m, bool uniform = true) {
  if (uniform) return gwsos::MetricMeasureSpace::from_points(random_points(rng, m));
  return gwsos::MetricMeasureSpace::from_points(random_points(rng, m), random_weights(rng, m));
}

/// North-west corner vertex of the transportation polytope for the given
/// row and column orders.
inline Eigen::MatrixXd north_west(const Eigen::VectorXd& mu, const Eigen::VectorXd& nu,
                                  const std::vector<Eigen::Index>& rows,
                                  const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(mu.size(), nu.size());
  Eigen::VectorXd r = mu, c = nu;
  std::size_t a = 0, b = 0;
  while (a < rows.size() && b < cols.size()) {
    const double t = std::min(r[rows[a]], c[cols[b]]);
    pi(rows[a], cols[b]) = t;
    r[rows[a]] -= t;
    c[cols[b]] -= t;
    if (r[rows[a]] <= c[cols[b]]) ++a;
    else ++b;
  }
  return pi;
}

/// Random coupling: convex combination of north-west corner vertices under
/// shuffled orders.
inline Eigen::MatrixXd random_coupling(Rng& rng, const Eigen::VectorXd& mu,
                                       const Eigen::VectorXd& nu, int pieces = 3) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(mu.size()));
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(nu.size()));
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> lambda(static_cast<std::size_t>(pieces));
  for (auto& l : lambda) l = u(rng);
  const double total = std::accumulate(lambda.begin(), lambda.end(), 0.0);
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(mu.size(), nu.size());
  for (double l : lambda) {
    std::shuffle(rows.begin(), rows.end(), rng);
    std::shuffle(cols.begin(), cols.end(), rng);
    pi += (l / total) * north_west(mu, nu, rows, cols);
  }
  return pi;
}

/// Moments of the Dirac at `point`, by direct products.
inline gwsos::MomentVector dirac_moments(const gwsos::BasisPtr& basis, const Eigen::VectorXd& point) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(basis->size()));
  for (std::size_t pos = 0; pos < basis->size(); ++pos) {
    double x = 1.0;
    const auto& idx = (*basis)[pos];
    for (std::size_t k = 0; k < idx.num_vars(); ++k) {
      for (int e = 0; e < idx[k]; ++e) x *= point[static_cast<Eigen::Index>(k)];
    }
    v[static_cast<Eigen::Index>(pos)] = x;
  }
  return gwsos::MomentVector(basis, v);
}

/// Row-major flattening pi_ij -> x_{i n + j}.
inline Eigen::VectorXd flatten(const Eigen::MatrixXd& pi) {
  Eigen::VectorXd x(pi.size());
  for (Eigen::Index i = 0; i < pi.rows(); ++i)
    for (Eigen::Index j = 0; j < pi.cols(); ++j) x[i * pi.cols() + j] = pi(i, j);
  return x;
}

/// Definitional GW objective: four nested loops over the distance matrices.
inline double gw_objective(const Eigen::MatrixXd& dx, const Eigen::MatrixXd& dy,
                           const Eigen::MatrixXd& pi, double p, double q) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < dx.rows(); ++i)
    for (Eigen::Index j = 0; j < dy.rows(); ++j)
      for (Eigen::Index k = 0; k < dx.rows(); ++k)
        for (Eigen::Index l = 0; l < dy.rows(); ++l)
          s += std::pow(std::abs(std::pow(dx(i, k), q) - std::pow(dy(j, l), q)), p) * pi(i, j) *
               pi(k, l);
  return s;
}

inline double min_eigenvalue(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

inline gwsos::CouplingShape shape_of(const Eigen::VectorXd& mu, const Eigen::VectorXd& nu) {
  return {static_cast<std::size_t>(mu.size()), static_cast<std::size_t>(nu.size()), mu, nu};
}

}  // namespace testing
