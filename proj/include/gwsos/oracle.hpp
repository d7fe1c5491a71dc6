#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gwsos/spaces.hpp"

namespace gwsos {

/// m x n coupling matrix; rows follow the source space, columns the target.
using Coupling = Eigen::MatrixXd;

enum class OracleMethod { Multistart, VertexEnum, ExactScalar };

std::string to_string(OracleMethod method);

struct OracleResult {
  Coupling best_coupling;
  double best_value = 0.0;
  std::size_t starts = 0;
  OracleMethod method = OracleMethod::Multistart;
  /// Distinct vertices visited by vertex enumeration (0 otherwise).
  std::size_t vertices = 0;
};

/// sum_{ijkl} L_{ij,kl} pi_ij pi_kl, compensated summation.
double objective(const CostTensor& cost, const Coupling& pi);

/// Gradient of `objective` with respect to pi.
Eigen::MatrixXd objective_gradient(const CostTensor& cost, const Coupling& pi);

/// Largest absolute deviation of the row/column sums from (mu, nu).
double marginal_violation(const Coupling& pi, const Eigen::VectorXd& mu, const Eigen::VectorXd& nu);

/// Euclidean projection onto {pi >= 0, pi 1 = mu, pi' 1 = nu}: Dykstra's
/// alternating projections to 1e-12, then an exact spanning-tree correction.
Coupling project_transport(const Eigen::MatrixXd& y, const Eigen::VectorXd& mu,
                           const Eigen::VectorXd& nu);

struct LocalResult {
  Coupling coupling;
  double value = 0.0;
  int iterations = 0;
  /// Infinity norm of pi - P(pi - grad) at the terminal point.
  double stationarity = 0.0;
};

/// Projected gradient with Armijo backtracking from a feasible start.
LocalResult local_descent(const CostTensor& cost, const Eigen::VectorXd& mu,
                          const Eigen::VectorXd& nu, const Coupling& start, int max_iter = 20'000,
                          double stop = 1e-10);

/// Best of `starts` local descents from Dirichlet-random feasible points.
/// Start k draws from its own stream seeded by (seed, k), so the first k
/// starts of a larger run are the same points. Workers come from
/// GWSOS_WORKERS (default: hardware concurrency).
OracleResult multistart(const CostTensor& cost, const Eigen::VectorXd& mu,
                        const Eigen::VectorXd& nu, std::size_t starts, std::uint64_t seed);

/// All vertices of the transportation polytope (m, n <= 4).
std::vector<Coupling> transport_vertices(const Eigen::VectorXd& mu, const Eigen::VectorXd& nu);

/// Minimum over the polytope vertices and a multistart run. Still only an
/// upper bound: the objective is indefinite, so optima may be interior.
OracleResult vertex_enumeration(const CostTensor& cost, const Eigen::VectorXd& mu,
                                const Eigen::VectorXd& nu, std::size_t starts = 64,
                                std::uint64_t seed = 0);

/// Exact minimum when the polytope has dimension <= 1 (m or n is 1, or
/// m = n = 2): the objective restricted to a segment is a scalar quadratic.
OracleResult exact_scalar(const CostTensor& cost, const Eigen::VectorXd& mu,
                          const Eigen::VectorXd& nu);

/// exact_scalar when it applies, else vertex enumeration when m, n <= 4, else
/// multistart.
OracleResult best_oracle(const CostTensor& cost, const Eigen::VectorXd& mu,
                         const Eigen::VectorXd& nu, std::size_t starts, std::uint64_t seed);

}  // namespace gwsos
