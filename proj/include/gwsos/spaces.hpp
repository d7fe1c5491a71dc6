#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gwsos/errors.hpp"

namespace gwsos {

/// A finite metric space with a probability vector over its points.
///
/// Invariants after construction: symmetric distances with zero diagonal,
/// strictly positive weights summing to one. Zero-mass atoms are dropped and
/// `original_index` maps surviving points back to their input rows. Departures
/// from the triangle inequality are recorded in `warnings` but accepted.
class MetricMeasureSpace {
 public:
  MetricMeasureSpace() = default;

  /// Euclidean distances between the rows of `points`.
  static MetricMeasureSpace from_points(const Eigen::MatrixXd& points,
                                        std::optional<Eigen::VectorXd> weights = {});
  /// Square distance matrix; repaired (symmetrized, zero diagonal) with a
  /// warning when needed, rejected when negative.
  static MetricMeasureSpace from_distances(const Eigen::MatrixXd& distances,
                                           std::optional<Eigen::VectorXd> weights = {});

  std::size_t size() const { return static_cast<std::size_t>(weights_.size()); }
  const Eigen::MatrixXd& distances() const { return distances_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  double distance(std::size_t a, std::size_t b) const { return distances_(a, b); }
  const std::vector<std::size_t>& original_index() const { return original_index_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  void finalize(std::optional<Eigen::VectorXd> weights);

  Eigen::MatrixXd distances_;
  Eigen::VectorXd weights_;
  std::vector<std::size_t> original_index_;
  std::vector<std::string> warnings_;
};

/// Numeric CSV: comma separated, blank lines and lines starting with '#'
/// skipped. Every row must have the same number of columns.
Eigen::MatrixXd read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& values);

MetricMeasureSpace load_point_cloud(const std::filesystem::path& path,
                                    const std::optional<std::filesystem::path>& weights = {});
MetricMeasureSpace load_distance_matrix(const std::filesystem::path& path,
                                        const std::optional<std::filesystem::path>& weights = {});

/// L[i][j][k][l] = |d_X(x_i,x_k)^q - d_Y(y_j,y_l)^q|^p, stored densely over
/// the pair index a = i*n + j.
class CostTensor {
 public:
  CostTensor(std::size_t m, std::size_t n, double p, double q, std::vector<double> entries);

  std::size_t m() const { return m_; }
  std::size_t n() const { return n_; }
  std::size_t pairs() const { return m_ * n_; }
  double p() const { return p_; }
  double q() const { return q_; }
  /// K = max |L|.
  double max_abs() const { return max_abs_; }

  std::size_t pair(std::size_t i, std::size_t j) const { return i * n_ + j; }
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return entries_[pair(i, j) * pairs() + pair(k, l)];
  }
  /// Entry addressed by pair indices a = (i,j), b = (k,l).
  double at_pairs(std::size_t a, std::size_t b) const { return entries_[a * pairs() + b]; }
  const std::vector<double>& entries() const { return entries_; }

 private:
  std::size_t m_, n_;
  double p_, q_;
  std::vector<double> entries_;
  double max_abs_ = 0.0;
};

CostTensor build_cost_tensor(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                             double p, double q);

}  // namespace gwsos
