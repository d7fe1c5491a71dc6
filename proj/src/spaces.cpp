#include "gwsos/spaces.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gwsos {

namespace {

constexpr double kAsymmetryTol = 1e-9;
constexpr double kWeightSumTol = 1e-12;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

Eigen::MatrixXd read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    std::vector<double> row;
    std::stringstream ss(stripped);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      const std::string token = trim(cell);
      char* end = nullptr;
      errno = 0;
      const double value = std::strtod(token.c_str(), &end);
      if (token.empty() || end != token.c_str() + token.size() || errno == ERANGE ||
          !std::isfinite(value)) {
        throw ParseError(path.string() + ": row " + std::to_string(line_no) + ", column " +
                         std::to_string(col) + ": cannot parse '" + token + "' as a real");
      }
      row.push_back(value);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InvalidInput(path.string() + ": row " + std::to_string(line_no) + " has " +
                         std::to_string(row.size()) + " columns, expected " +
                         std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path.string() + ": no data rows");
  Eigen::MatrixXd out(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) out(r, c) = rows[r][c];
  }
  return out;
}

void write_csv_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& values) {
  std::ofstream out(path);
  if (!out) throw InvalidInput(path.string() + ": cannot open for writing");
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) out << ',';
      out << values(r, c);
    }
    out << '\n';
  }
}

MetricMeasureSpace MetricMeasureSpace::from_points(const Eigen::MatrixXd& points,
                                                   std::optional<Eigen::VectorXd> weights) {
  if (points.rows() == 0) throw InvalidInput("point cloud is empty");
  const Eigen::Index m = points.rows();
  MetricMeasureSpace space;
  space.distances_.resize(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    space.distances_(a, a) = 0.0;
    for (Eigen::Index b = a + 1; b < m; ++b) {
      const double d = (points.row(a) - points.row(b)).norm();
      space.distances_(a, b) = d;
      space.distances_(b, a) = d;
    }
  }
  space.finalize(std::move(weights));
  return space;
}

MetricMeasureSpace MetricMeasureSpace::from_distances(const Eigen::MatrixXd& distances,
                                                      std::optional<Eigen::VectorXd> weights) {
  if (distances.rows() != distances.cols()) {
    throw InvalidInput("distance matrix is " + std::to_string(distances.rows()) + "x" +
                       std::to_string(distances.cols()) + ", expected square");
  }
  if (distances.rows() == 0) throw InvalidInput("distance matrix is empty");
  if ((distances.array() < 0.0).any()) throw InvalidInput("distance matrix has negative entries");
  MetricMeasureSpace space;
  const double scale = std::max(1.0, distances.cwiseAbs().maxCoeff());
  const double asym = (distances - distances.transpose()).cwiseAbs().maxCoeff();
  if (asym > kAsymmetryTol * scale) {
    space.warnings_.push_back("distance matrix asymmetric (max deviation " +
                              std::to_string(asym) + "); symmetrized");
  }
  space.distances_ = 0.5 * (distances + distances.transpose());
  if (space.distances_.diagonal().cwiseAbs().maxCoeff() > 0.0) {
    space.warnings_.push_back("distance matrix has nonzero diagonal; forced to zero");
    space.distances_.diagonal().setZero();
  }
  space.finalize(std::move(weights));
  return space;
}

void MetricMeasureSpace::finalize(std::optional<Eigen::VectorXd> weights) {
  const Eigen::Index m = distances_.rows();
  Eigen::VectorXd w;
  if (weights) {
    w = *weights;
    if (w.size() != m) {
      throw InvalidInput("weight vector has " + std::to_string(w.size()) +
                         " entries for a space of " + std::to_string(m) + " points");
    }
    for (Eigen::Index a = 0; a < m; ++a) {
      if (!std::isfinite(w(a)) || w(a) < 0.0) {
        throw InvalidInput("weight " + std::to_string(a + 1) + " is negative or not finite");
      }
    }
  } else {
    w = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  }
  const double total = w.sum();
  if (!(total > 0.0)) throw InvalidInput("weights sum to zero");
  if (std::abs(total - 1.0) > kWeightSumTol) w /= total;

  std::vector<Eigen::Index> keep;
  for (Eigen::Index a = 0; a < m; ++a) {
    if (w(a) > 0.0) keep.push_back(a);
  }
  if (static_cast<Eigen::Index>(keep.size()) != m) {
    warnings_.push_back(std::to_string(m - keep.size()) + " zero-mass atom(s) dropped");
    Eigen::MatrixXd d(keep.size(), keep.size());
    Eigen::VectorXd kept(keep.size());
    for (std::size_t a = 0; a < keep.size(); ++a) {
      kept(a) = w(keep[a]);
      for (std::size_t b = 0; b < keep.size(); ++b) d(a, b) = distances_(keep[a], keep[b]);
    }
    distances_ = std::move(d);
    w = kept / kept.sum();
  }
  weights_ = std::move(w);
  original_index_.assign(keep.begin(), keep.end());

  const Eigen::Index k = distances_.rows();
  double worst = 0.0;
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      for (Eigen::Index c = 0; c < k; ++c) {
        worst = std::max(worst, distances_(a, c) - distances_(a, b) - distances_(b, c));
      }
    }
  }
  if (worst > 1e-12 * std::max(1.0, distances_.maxCoeff())) {
    warnings_.push_back("triangle inequality violated by up to " + std::to_string(worst));
  }
}

namespace {

std::optional<Eigen::VectorXd> load_weights(const std::optional<std::filesystem::path>& path) {
  if (!path) return std::nullopt;
  const Eigen::MatrixXd w = read_csv_matrix(*path);
  if (w.cols() != 1) throw InvalidInput(path->string() + ": weights file must have one column");
  return Eigen::VectorXd(w.col(0));
}

}  // namespace

MetricMeasureSpace load_point_cloud(const std::filesystem::path& path,
                                    const std::optional<std::filesystem::path>& weights) {
  return MetricMeasureSpace::from_points(read_csv_matrix(path), load_weights(weights));
}

MetricMeasureSpace load_distance_matrix(const std::filesystem::path& path,
                                        const std::optional<std::filesystem::path>& weights) {
  return MetricMeasureSpace::from_distances(read_csv_matrix(path), load_weights(weights));
}

CostTensor::CostTensor(std::size_t m, std::size_t n, double p, double q,
                       std::vector<double> entries)
    : m_(m), n_(n), p_(p), q_(q), entries_(std::move(entries)) {
  if (entries_.size() != m * n * m * n) throw InvalidInput("CostTensor: wrong entry count");
  for (double v : entries_) {
    if (!std::isfinite(v)) throw InvalidInput("CostTensor: non-finite entry (overflow)");
    max_abs_ = std::max(max_abs_, std::abs(v));
  }
}

CostTensor build_cost_tensor(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                             double p, double q) {
  if (!(p >= 1.0) || !(q >= 1.0)) throw InvalidInput("cost exponents p and q must be >= 1");
  const std::size_t m = x.size();
  const std::size_t n = y.size();
  const std::size_t pairs = m * n;
  std::vector<double> entries(pairs * pairs);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      const double dx = std::pow(x.distance(i, k), q);
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t l = 0; l < n; ++l) {
          const double dy = std::pow(y.distance(j, l), q);
          entries[(i * n + j) * pairs + (k * n + l)] = std::pow(std::abs(dx - dy), p);
        }
      }
    }
  }
  return CostTensor(m, n, p, q, std::move(entries));
}

}  // namespace gwsos
