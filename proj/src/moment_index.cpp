#include "gwsos/moment_index.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <tuple>

namespace gwsos {

namespace {

Count checked_mul(Count a, Count b) {
  Count out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw CapacityError("integer overflow in combinatorial count");
  }
  return out;
}

}  // namespace

Count binomial(Count n, Count k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  // result * (n - k + i) / i stays integral at every step; divide by the gcd
  // first so the intermediate product overflows only when the result would.
  Count result = 1;
  for (Count i = 1; i <= k; ++i) {
    Count num = n - k + i;
    Count den = i;
    Count g = std::gcd(result, den);
    result /= g;
    den /= g;
    g = std::gcd(num, den);
    num /= g;
    den /= g;
    result = checked_mul(result, num) / den;
  }
  return result;
}

Count basis_size(std::size_t num_vars, std::size_t degree) {
  if (num_vars < 1) throw InvalidInput("basis_size: need at least one variable");
  return binomial(static_cast<Count>(num_vars) + degree, degree);
}

MultiIndex::MultiIndex(std::vector<int> exponents)
    : exponents_(std::move(exponents)) {
  for (int e : exponents_) {
    if (e < 0) throw InvalidInput("MultiIndex: negative exponent");
    degree_ += e;
  }
}

MultiIndex MultiIndex::unit(std::size_t num_vars, std::size_t var) {
  MultiIndex idx(num_vars);
  idx.bump(var);
  return idx;
}

void MultiIndex::bump(std::size_t var, int count) {
  exponents_.at(var) += count;
  degree_ += count;
  if (exponents_[var] < 0) throw InvalidInput("MultiIndex: negative exponent");
}

bool MultiIndex::is_even() const {
  return std::all_of(exponents_.begin(), exponents_.end(),
                     [](int e) { return e % 2 == 0; });
}

MultiIndex MultiIndex::half() const {
  std::vector<int> out(exponents_.size());
  for (std::size_t v = 0; v < out.size(); ++v) {
    if (exponents_[v] % 2 != 0) throw InvalidInput("MultiIndex::half: odd exponent");
    out[v] = exponents_[v] / 2;
  }
  return MultiIndex(std::move(out));
}

MultiIndex MultiIndex::doubled() const {
  std::vector<int> out(exponents_);
  for (int& e : out) e *= 2;
  return MultiIndex(std::move(out));
}

std::vector<std::size_t> MultiIndex::factors() const {
  std::vector<std::size_t> out;
  out.reserve(degree_);
  for (std::size_t v = 0; v < exponents_.size(); ++v) {
    for (int c = 0; c < exponents_[v]; ++c) out.push_back(v);
  }
  return out;
}

MultiIndex MultiIndex::operator+(const MultiIndex& other) const {
  if (other.num_vars() != num_vars()) {
    throw InvalidInput("MultiIndex: variable count mismatch");
  }
  MultiIndex out(*this);
  for (std::size_t v = 0; v < exponents_.size(); ++v) {
    out.exponents_[v] += other.exponents_[v];
  }
  out.degree_ += other.degree_;
  return out;
}

std::string MultiIndex::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t v = 0; v < exponents_.size(); ++v) {
    if (v) os << ',';
    os << exponents_[v];
  }
  os << ')';
  return os.str();
}

std::size_t MultiIndexHash::operator()(const MultiIndex& idx) const noexcept {
  // FNV-1a over the exponents.
  std::uint64_t h = 1469598103934665603ULL;
  for (int e : idx.exponents()) {
    h ^= static_cast<std::uint64_t>(e) + 0x9e;
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

Count multinomial_weight(const MultiIndex& tau) {
  // Product of binomials: choose positions for each variable in turn.
  Count result = 1;
  Count placed = 0;
  for (int e : tau.exponents()) {
    placed += static_cast<Count>(e);
    result = checked_mul(result, binomial(placed, static_cast<Count>(e)));
  }
  return result;
}

namespace {

// Exponent vectors of total degree exactly d, descending lexicographically.
void enumerate_degree(std::size_t num_vars, int d, std::vector<int>& scratch,
                      std::size_t var, std::vector<MultiIndex>& out) {
  if (var + 1 == num_vars) {
    scratch[var] = d;
    out.emplace_back(scratch);
    return;
  }
  for (int e = d; e >= 0; --e) {
    scratch[var] = e;
    enumerate_degree(num_vars, d - e, scratch, var + 1, out);
  }
  scratch[var] = 0;
}

}  // namespace

MonomialBasis::MonomialBasis(std::size_t num_vars, int max_degree, Count limit)
    : num_vars_(num_vars), max_degree_(max_degree) {
  if (num_vars < 1) throw InvalidInput("MonomialBasis: need at least one variable");
  if (max_degree < 0) throw InvalidInput("MonomialBasis: negative degree");
  const Count total = basis_size(num_vars, static_cast<std::size_t>(max_degree));
  if (total > limit) {
    throw CapacityError("monomial basis of " + std::to_string(total) +
                        " entries exceeds the limit of " + std::to_string(limit));
  }
  entries_.reserve(total);
  prefix_.reserve(max_degree + 1);
  std::vector<int> scratch(num_vars, 0);
  for (int d = 0; d <= max_degree; ++d) {
    enumerate_degree(num_vars, d, scratch, 0, entries_);
    prefix_.push_back(entries_.size());
  }
  lookup_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) lookup_.emplace(entries_[i], i);
}

std::optional<std::size_t> MonomialBasis::find(const MultiIndex& idx) const {
  if (idx.num_vars() != num_vars_ || idx.degree() > max_degree_) return std::nullopt;
  auto it = lookup_.find(idx);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t MonomialBasis::index_of(const MultiIndex& idx) const {
  if (auto pos = find(idx)) return *pos;
  throw OutOfBasisError("monomial " + idx.to_string() + " is outside the degree-" +
                        std::to_string(max_degree_) + " basis");
}

std::size_t MonomialBasis::index_of_sum(std::size_t a, std::size_t b) const {
  return index_of(entries_[a] + entries_[b]);
}

std::size_t MonomialBasis::prefix_size(int d) const {
  if (d < 0) return 0;
  if (d >= max_degree_) return entries_.size();
  return prefix_[d];
}

BasisPtr enumerate_basis(std::size_t num_vars, int degree, Count limit) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, int>, BasisPtr> cache;
  {
    std::lock_guard lock(mutex);
    auto it = cache.find({num_vars, degree});
    if (it != cache.end()) {
      if (it->second->size() > limit) {
        throw CapacityError("monomial basis exceeds the configured limit");
      }
      return it->second;
    }
  }
  auto basis = std::make_shared<const MonomialBasis>(num_vars, degree, limit);
  std::lock_guard lock(mutex);
  return cache.try_emplace({num_vars, degree}, std::move(basis)).first->second;
}

}  // namespace gwsos
