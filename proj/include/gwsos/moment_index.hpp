#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gwsos/errors.hpp"

namespace gwsos {

using Count = std::uint64_t;

/// Default ceiling on the number of monomials a basis may hold.
inline constexpr Count kDefaultBasisLimit = 2'000'000;

/// binomial(num_vars + degree, degree), exact; throws CapacityError on
/// overflow of Count.
Count basis_size(std::size_t num_vars, std::size_t degree);

/// binomial(n, k), exact; throws CapacityError on overflow.
Count binomial(Count n, Count k);

/// Exponent vector of a monomial in num_vars variables.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::size_t num_vars) : exponents_(num_vars, 0) {}
  explicit MultiIndex(std::vector<int> exponents);

  static MultiIndex unit(std::size_t num_vars, std::size_t var);

  std::size_t num_vars() const { return exponents_.size(); }
  int degree() const { return degree_; }
  int operator[](std::size_t var) const { return exponents_[var]; }
  std::span<const int> exponents() const { return exponents_; }

  /// Adds `count` to the exponent of `var`.
  void bump(std::size_t var, int count = 1);

  /// True when every exponent is even.
  bool is_even() const;
  /// Exponent-wise half; requires is_even().
  MultiIndex half() const;
  MultiIndex doubled() const;

  /// The variables of this monomial listed with multiplicity, ascending.
  std::vector<std::size_t> factors() const;

  MultiIndex operator+(const MultiIndex& other) const;
  bool operator==(const MultiIndex& other) const = default;

  std::string to_string() const;

 private:
  std::vector<int> exponents_;
  int degree_ = 0;
};

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& idx) const noexcept;
};

/// |tau|! / (tau_1! ... tau_n!): the number of ordered tuples of unit
/// multi-indices summing to tau.
Count multinomial_weight(const MultiIndex& tau);

/// All monomials in num_vars variables of degree at most max_degree, in
/// graded lexicographic order: ascending total degree, then descending
/// exponent vectors (so x1 precedes x2 within a degree).
class MonomialBasis {
 public:
  MonomialBasis(std::size_t num_vars, int max_degree,
                Count limit = kDefaultBasisLimit);

  std::size_t num_vars() const { return num_vars_; }
  int max_degree() const { return max_degree_; }
  std::size_t size() const { return entries_.size(); }
  const MultiIndex& operator[](std::size_t pos) const { return entries_[pos]; }
  const std::vector<MultiIndex>& entries() const { return entries_; }

  /// Position of `idx`; throws OutOfBasisError when absent.
  std::size_t index_of(const MultiIndex& idx) const;
  std::optional<std::size_t> find(const MultiIndex& idx) const;

  /// Position of the product of two basis entries.
  std::size_t index_of_sum(std::size_t a, std::size_t b) const;

  /// Number of leading entries with degree <= d (a prefix, by the ordering).
  std::size_t prefix_size(int d) const;
  /// First position holding an entry of degree exactly d.
  std::size_t degree_begin(int d) const { return prefix_size(d - 1); }

 private:
  std::size_t num_vars_;
  int max_degree_;
  std::vector<MultiIndex> entries_;
  std::vector<std::size_t> prefix_;  // prefix_[d] = #entries with degree <= d
  std::unordered_map<MultiIndex, std::size_t, MultiIndexHash> lookup_;
};

using BasisPtr = std::shared_ptr<const MonomialBasis>;

/// Builds (or reuses from a process-wide cache) the basis for the given shape.
BasisPtr enumerate_basis(std::size_t num_vars, int degree,
                         Count limit = kDefaultBasisLimit);

}  // namespace gwsos
