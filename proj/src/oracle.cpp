#include "gwsos/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

namespace gwsos {

std::string to_string(OracleMethod method) {
  switch (method) {
    case OracleMethod::Multistart: return "multistart";
    case OracleMethod::VertexEnum: return "vertex_enumeration";
    case OracleMethod::ExactScalar: return "exact_scalar";
  }
  return "unknown";
}

namespace {

constexpr double kProjectionTol = 1e-12;
constexpr int kDykstraMaxIter = 200'000;

/// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

void check_shape(const CostTensor& cost, const Coupling& pi) {
  if (static_cast<std::size_t>(pi.rows()) != cost.m() ||
      static_cast<std::size_t>(pi.cols()) != cost.n()) {
    throw InvalidInput("coupling is " + std::to_string(pi.rows()) + "x" +
                       std::to_string(pi.cols()) + ", cost expects " + std::to_string(cost.m()) +
                       "x" + std::to_string(cost.n()));
  }
}

Eigen::VectorXd flatten(const Coupling& pi) {
  Eigen::VectorXd v(pi.size());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    for (Eigen::Index j = 0; j < pi.cols(); ++j) v[i * pi.cols() + j] = pi(i, j);
  }
  return v;
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> cost_matrix(const CostTensor& cost) {
  const auto k = static_cast<Eigen::Index>(cost.pairs());
  return Eigen::Map<const RowMajor>(cost.entries().data(), k, k);
}

/// Projection onto {pi 1 = mu, pi' 1 = nu}.
void project_affine(Eigen::MatrixXd& x, const Eigen::VectorXd& mu, const Eigen::VectorXd& nu) {
  const double m = static_cast<double>(x.rows());
  const double n = static_cast<double>(x.cols());
  const Eigen::VectorXd r = mu - x.rowwise().sum();
  const Eigen::VectorXd c = nu - x.colwise().sum().transpose();
  const double s = r.sum();
  const Eigen::VectorXd a = (r.array() - s / m) / n;
  const Eigen::VectorXd b = c / m;
  x.colwise() += a;
  x.rowwise() += b.transpose();
}

/// Edges of an m x n bipartite graph are (i, j); row i is node i, column j
/// is node m + j. Solves the tree system "edge values summed at each node
/// equal its demand" by leaf elimination.
std::vector<double> solve_tree(const std::vector<std::pair<int, int>>& edges, int m, int n,
                               Eigen::VectorXd row_demand, Eigen::VectorXd col_demand) {
  const int nodes = m + n;
  std::vector<std::vector<int>> incident(static_cast<std::size_t>(nodes));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    incident[static_cast<std::size_t>(edges[e].first)].push_back(static_cast<int>(e));
    incident[static_cast<std::size_t>(m + edges[e].second)].push_back(static_cast<int>(e));
  }
  std::vector<int> degree(static_cast<std::size_t>(nodes));
  for (int v = 0; v < nodes; ++v) degree[v] = static_cast<int>(incident[v].size());
  std::vector<char> used(edges.size(), 0);
  std::vector<double> value(edges.size(), 0.0);
  auto demand = [&](int v) -> double& { return v < m ? row_demand[v] : col_demand[v - m]; };
  std::vector<int> queue;
  for (int v = 0; v < nodes; ++v) {
    if (degree[v] == 1) queue.push_back(v);
  }
  while (!queue.empty()) {
    const int v = queue.back();
    queue.pop_back();
    if (degree[v] != 1) continue;
    int edge = -1;
    for (int e : incident[v]) {
      if (!used[e]) edge = e;
    }
    used[edge] = 1;
    const int u = v < m ? m + edges[edge].second : edges[edge].first;
    value[edge] = demand(v);
    demand(u) -= value[edge];
    demand(v) = 0.0;
    --degree[v];
    if (--degree[u] == 1) queue.push_back(u);
  }
  return value;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int size) : parent(static_cast<std::size_t>(size)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

/// Restores the marginals of a nonnegative near-feasible x exactly (up to
/// rounding) by moving mass along a maximum-weight spanning tree.
void tree_correction(Eigen::MatrixXd& x, const Eigen::VectorXd& mu, const Eigen::VectorXd& nu) {
  const int m = static_cast<int>(x.rows());
  const int n = static_cast<int>(x.cols());
  for (int round = 0; round < 8; ++round) {
    const Eigen::VectorXd r = mu - x.rowwise().sum();
    const Eigen::VectorXd c = nu - x.colwise().sum().transpose();
    if (std::max(r.cwiseAbs().maxCoeff(), c.cwiseAbs().maxCoeff()) == 0.0) return;
    std::vector<std::pair<int, int>> order;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) order.emplace_back(i, j);
    }
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
      return x(a.first, a.second) > x(b.first, b.second);
    });
    UnionFind uf(m + n);
    std::vector<std::pair<int, int>> tree;
    for (const auto& [i, j] : order) {
      if (uf.unite(i, m + j)) tree.emplace_back(i, j);
    }
    const std::vector<double> delta = solve_tree(tree, m, n, r, c);
    bool clamped = false;
    for (std::size_t e = 0; e < tree.size(); ++e) {
      double& v = x(tree[e].first, tree[e].second);
      v += delta[e];
      if (v < 0.0) {
        v = 0.0;
        clamped = true;
      }
    }
    if (!clamped) return;
  }
}

bool lex_less(const Coupling& a, const Coupling& b) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != b(i, j)) return a(i, j) < b(i, j);
    }
  }
  return false;
}

/// True when (value, pi) should replace the incumbent (best, best_pi).
bool better(double value, const Coupling& pi, double best, const Coupling& best_pi) {
  if (best_pi.size() == 0) return true;
  const double tie = 1e-13 * (1.0 + std::abs(best));
  if (value < best - tie) return true;
  if (value > best + tie) return false;
  return lex_less(pi, best_pi);
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GWSOS_WORKERS")) {
    const long requested = std::strtol(env, nullptr, 10);
    if (requested > 0) workers = static_cast<std::size_t>(requested);
  }
  return std::max<std::size_t>(1, std::min(workers, jobs));
}

/// Dirichlet(1,...,1) draw scaled to the marginals, then made exactly
/// feasible.
Coupling random_start(const Eigen::VectorXd& mu, const Eigen::VectorXd& nu, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  Eigen::MatrixXd x(mu.size(), nu.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = gamma(rng) + 1e-300;
  }
  x /= x.sum();
  for (int it = 0; it < 10'000; ++it) {
    x.array().colwise() *= (mu.array() / x.rowwise().sum().array());
    x.array().rowwise() *= (nu.array() / x.colwise().sum().transpose().array()).transpose();
    if (marginal_violation(x, mu, nu) <= kProjectionTol) break;
  }
  return project_transport(x, mu, nu);
}

void check_marginals(const Eigen::VectorXd& mu, const Eigen::VectorXd& nu) {
  if (mu.size() == 0 || nu.size() == 0) throw InvalidInput("empty marginal");
  if ((mu.array() < 0.0).any() || (nu.array() < 0.0).any()) {
    throw InvalidInput("marginals must be nonnegative");
  }
  if (std::abs(mu.sum() - nu.sum()) > 1e-9) throw InvalidInput("marginals have different mass");
}

}  // namespace

double objective(const CostTensor& cost, const Coupling& pi) {
  check_shape(cost, pi);
  const Eigen::VectorXd v = flatten(pi);
  const std::size_t k = cost.pairs();
  CompensatedSum sum;
  for (std::size_t a = 0; a < k; ++a) {
    if (v[a] == 0.0) continue;
    for (std::size_t b = 0; b < k; ++b) sum.add(cost.at_pairs(a, b) * v[a] * v[b]);
  }
  return sum.value();
}

Eigen::MatrixXd objective_gradient(const CostTensor& cost, const Coupling& pi) {
  check_shape(cost, pi);
  const auto l = cost_matrix(cost);
  const Eigen::VectorXd v = flatten(pi);
  const Eigen::VectorXd g = l * v + l.transpose() * v;
  Eigen::MatrixXd out(pi.rows(), pi.cols());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    for (Eigen::Index j = 0; j < pi.cols(); ++j) out(i, j) = g[i * pi.cols() + j];
  }
  return out;
}

double marginal_violation(const Coupling& pi, const Eigen::VectorXd& mu,
                          const Eigen::VectorXd& nu) {
  const double rows = (pi.rowwise().sum() - mu).cwiseAbs().maxCoeff();
  const double cols = (pi.colwise().sum().transpose() - nu).cwiseAbs().maxCoeff();
  return std::max(rows, cols);
}

Coupling project_transport(const Eigen::MatrixXd& y, const Eigen::VectorXd& mu,
                           const Eigen::VectorXd& nu) {
  if (y.rows() != mu.size() || y.cols() != nu.size()) {
    throw InvalidInput("project_transport: shape does not match marginals");
  }
  Eigen::MatrixXd x = y.cwiseMax(0.0);
  if (marginal_violation(x, mu, nu) > kProjectionTol) {
    x = y;
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(y.rows(), y.cols());
    Eigen::MatrixXd a;
    for (int it = 0; it < kDykstraMaxIter; ++it) {
      a = x;
      project_affine(a, mu, nu);
      x = (a + q).cwiseMax(0.0);
      q += a - x;
      if (it % 8 == 7 && marginal_violation(x, mu, nu) <= kProjectionTol) break;
    }
  }
  tree_correction(x, mu, nu);
  return x;
}

LocalResult local_descent(const CostTensor& cost, const Eigen::VectorXd& mu,
                          const Eigen::VectorXd& nu, const Coupling& start, int max_iter,
                          double stop) {
  check_shape(cost, start);
  const auto l = cost_matrix(cost);
  const double lipschitz = std::max((l + l.transpose()).cwiseAbs().rowwise().sum().maxCoeff(), 1e-12);
  const double scale = std::max(1.0, cost.max_abs());
  double step = 1.0 / lipschitz;

  LocalResult out;
  out.coupling = start;
  out.value = objective(cost, start);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::MatrixXd g = objective_gradient(cost, out.coupling);
    Coupling next;
    double next_value = 0.0;
    Eigen::MatrixXd d;
    for (;;) {
      next = project_transport(out.coupling - step * g, mu, nu);
      d = next - out.coupling;
      next_value = objective(cost, next);
      const double model = out.value + (g.array() * d.array()).sum() + d.squaredNorm() / (2.0 * step);
      if (next_value <= model + 1e-15 * (1.0 + std::abs(out.value)) || step < 1e-14 / lipschitz) break;
      step *= 0.5;
    }
    out.iterations = it + 1;
    out.stationarity = d.cwiseAbs().maxCoeff() / (step * scale);
    if (next_value <= out.value) {
      out.coupling = std::move(next);
      out.value = next_value;
    }
    if (out.stationarity <= stop) break;
    step = std::min(2.0 * step, 1.0 / lipschitz * 64.0);
  }
  out.value = objective(cost, out.coupling);
  return out;
}

OracleResult multistart(const CostTensor& cost, const Eigen::VectorXd& mu,
                        const Eigen::VectorXd& nu, std::size_t starts, std::uint64_t seed) {
  check_marginals(mu, nu);
  if (starts == 0) throw InvalidInput("multistart: starts must be >= 1");
  std::vector<LocalResult> runs(starts);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t k = next++; k < starts; k = next++) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
      std::mt19937_64 rng(seq);
      runs[k] = local_descent(cost, mu, nu, random_start(mu, nu, rng));
    }
  };
  const std::size_t workers = worker_count(starts);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  OracleResult out;
  out.method = OracleMethod::Multistart;
  out.starts = starts;
  for (const auto& run : runs) {
    if (better(run.value, run.coupling, out.best_value, out.best_coupling)) {
      out.best_value = run.value;
      out.best_coupling = run.coupling;
    }
  }
  return out;
}

std::vector<Coupling> transport_vertices(const Eigen::VectorXd& mu, const Eigen::VectorXd& nu) {
  check_marginals(mu, nu);
  const int m = static_cast<int>(mu.size());
  const int n = static_cast<int>(nu.size());
  if (m > 4 || n > 4) {
    throw CapacityError("vertex enumeration is limited to m, n <= 4 (got " + std::to_string(m) +
                        "x" + std::to_string(n) + ")");
  }
  const int cells = m * n;
  const int tree_size = m + n - 1;
  std::vector<Coupling> vertices;
  std::vector<char> pick(static_cast<std::size_t>(cells), 0);
  std::fill(pick.begin(), pick.begin() + tree_size, 1);
  do {
    std::vector<std::pair<int, int>> edges;
    UnionFind uf(m + n);
    bool acyclic = true;
    for (int c = 0; c < cells && acyclic; ++c) {
      if (!pick[c]) continue;
      edges.emplace_back(c / n, c % n);
      acyclic = uf.unite(c / n, m + c % n);
    }
    if (!acyclic) continue;
    const std::vector<double> values = solve_tree(edges, m, n, mu, nu);
    if (*std::min_element(values.begin(), values.end()) < -1e-13) continue;
    Coupling x = Coupling::Zero(m, n);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      x(edges[e].first, edges[e].second) = std::max(values[e], 0.0);
    }
    const bool seen = std::any_of(vertices.begin(), vertices.end(), [&](const Coupling& v) {
      return (v - x).cwiseAbs().maxCoeff() <= 1e-12;
    });
    if (!seen) vertices.push_back(std::move(x));
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return vertices;
}

OracleResult vertex_enumeration(const CostTensor& cost, const Eigen::VectorXd& mu,
                                const Eigen::VectorXd& nu, std::size_t starts,
                                std::uint64_t seed) {
  const std::vector<Coupling> vertices = transport_vertices(mu, nu);
  OracleResult out = multistart(cost, mu, nu, std::max<std::size_t>(starts, 1), seed);
  out.vertices = vertices.size();
  for (const auto& v : vertices) {
    const double value = objective(cost, v);
    if (better(value, v, out.best_value, out.best_coupling)) {
      out.best_value = value;
      out.best_coupling = v;
      out.method = OracleMethod::VertexEnum;
    }
  }
  return out;
}

OracleResult exact_scalar(const CostTensor& cost, const Eigen::VectorXd& mu,
                          const Eigen::VectorXd& nu) {
  check_marginals(mu, nu);
  const Eigen::Index m = mu.size();
  const Eigen::Index n = nu.size();
  OracleResult out;
  out.method = OracleMethod::ExactScalar;
  if (m == 1 || n == 1) {
    out.best_coupling = mu * nu.transpose() / mu.sum();
    out.best_value = objective(cost, out.best_coupling);
    return out;
  }
  if (m != 2 || n != 2) throw InvalidInput("exact_scalar needs m = 1, n = 1 or m = n = 2");
  // pi(t) = [[t, mu0 - t], [nu0 - t, mu1 - nu0 + t]].
  const double lo = std::max(0.0, nu[0] - mu[1]);
  const double hi = std::min(mu[0], nu[0]);
  auto at = [&](double t) {
    Coupling pi(2, 2);
    pi << t, mu[0] - t, nu[0] - t, mu[1] - nu[0] + t;
    return pi.cwiseMax(0.0).eval();
  };
  std::vector<double> candidates{lo, hi};
  // f(t) = f(lo) + b (t - lo) + a (t - lo)^2 along direction D.
  Coupling dir(2, 2);
  dir << 1, -1, -1, 1;
  const Coupling base = at(lo);
  const double b = (objective_gradient(cost, base).array() * dir.array()).sum();
  const double a = objective(cost, dir);
  if (a > 0.0) {
    const double t = lo - b / (2.0 * a);
    if (t > lo && t < hi) candidates.push_back(t);
  }
  for (double t : candidates) {
    const Coupling pi = at(t);
    const double value = objective(cost, pi);
    if (better(value, pi, out.best_value, out.best_coupling)) {
      out.best_value = value;
      out.best_coupling = pi;
    }
  }
  return out;
}

OracleResult best_oracle(const CostTensor& cost, const Eigen::VectorXd& mu,
                         const Eigen::VectorXd& nu, std::size_t starts, std::uint64_t seed) {
  const Eigen::Index m = mu.size();
  const Eigen::Index n = nu.size();
  if (m == 1 || n == 1 || (m == 2 && n == 2)) return exact_scalar(cost, mu, nu);
  if (m <= 4 && n <= 4) return vertex_enumeration(cost, mu, nu, starts, seed);
  return multistart(cost, mu, nu, starts, seed);
}

}  // namespace gwsos
