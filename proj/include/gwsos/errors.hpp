#pragma once

#include <stdexcept>
#include <string>

namespace gwsos {

/// Raised when a combinatorial count or a problem size exceeds what the
/// platform integer type or a configured limit can hold.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; the message carries the row/column location.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that parses but violates a model invariant (negative weight,
/// non-square matrix, dimension mismatch, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A moment vector was addressed at a monomial outside its basis.
class OutOfBasisError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A relaxation was requested at a level it is not defined for.
class LevelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical precondition (marginal equalities, feasibility) does not hold
/// to the required tolerance.
class ToleranceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An SDP lower bound exceeded a feasible upper bound beyond tolerance.
class SandwichError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gwsos
