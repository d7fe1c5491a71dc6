#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gwsos/moment_index.hpp"
#include "gwsos/spaces.hpp"

namespace gwsos {

enum class HierarchyKind { Schmudgen, Putinar, Combined, FirstLevelDNN };

std::string to_string(HierarchyKind kind);
HierarchyKind parse_hierarchy(const std::string& name);

/// A truncated pseudo-moment sequence: values aligned with `basis`.
class MomentVector {
 public:
  MomentVector() = default;
  MomentVector(BasisPtr basis, Eigen::VectorXd values);
  /// The zero sequence with z_0 = 1.
  static MomentVector unit(BasisPtr basis);
  /// Moments of the Dirac measure at `point`: z_alpha = point^alpha.
  static MomentVector dirac(BasisPtr basis, const Eigen::VectorXd& point);

  const BasisPtr& basis() const { return basis_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  /// Riesz functional on a monomial; throws OutOfBasisError outside the basis.
  double riesz(const MultiIndex& monomial) const;
  double operator[](std::size_t pos) const { return values_[static_cast<Eigen::Index>(pos)]; }

 private:
  BasisPtr basis_;
  Eigen::VectorXd values_;
};

/// Sparse linear form over moment coordinates.
using LinearTerms = std::vector<std::pair<std::size_t, double>>;

/// One PSD block: entry (row, col), row <= col, equals sum coeff * z[coord].
struct BlockEntry {
  int row;
  int col;
  std::size_t coord;
  double coeff;
};

struct PsdBlock {
  std::string label;
  int dim = 0;
  std::vector<BlockEntry> entries;
  /// Orthonormal columns spanning a subspace that contains the block's range
  /// at every point satisfying the equalities (empty: no reduction known).
  /// The complement is spanned by coefficient vectors of g * x^beta for the
  /// marginal polynomials g, which the equalities force into the kernel.
  Eigen::MatrixXd face;
};

struct LinearEquality {
  LinearTerms terms;
  double rhs = 0.0;
};

/// Marginals and shape of the coupling the moments describe.
struct CouplingShape {
  std::size_t m = 0;
  std::size_t n = 0;
  Eigen::VectorXd mu;
  Eigen::VectorXd nu;
};

/// min objective.z  s.t.  equalities, every block PSD, z[nonneg] >= 0.
struct ConicProblem {
  BasisPtr basis;
  HierarchyKind kind = HierarchyKind::FirstLevelDNN;
  int level = 1;
  CouplingShape shape;
  std::vector<PsdBlock> blocks;
  std::vector<LinearEquality> equalities;
  LinearTerms objective;
  std::vector<std::size_t> nonneg;
  /// K = max |L| of the cost the objective came from (1 when unknown).
  double cost_scale = 1.0;

  std::size_t num_coords() const { return basis ? basis->size() : 0; }
};

struct BuildLimits {
  Count max_basis = kDefaultBasisLimit;
  /// Cap on sum_{k <= 2r} binom(mn, k), the localizing-block count.
  Count max_subsets = 200'000;
};

/// Schmudgen-type level-r relaxation with the (Mar) marginal families.
ConicProblem build_schmudgen(const CostTensor& cost, const Eigen::VectorXd& mu,
                             const Eigen::VectorXd& nu, int level, const BuildLimits& limits = {});
/// The same feasible set with a zero objective; used for feasibility audits.
ConicProblem schmudgen_constraints(const CouplingShape& shape, int level,
                                   const BuildLimits& limits = {});
/// Putinar-type relaxation over the square-root variables; level >= 2.
ConicProblem build_putinar(const CostTensor& cost, const Eigen::VectorXd& mu,
                           const Eigen::VectorXd& nu, int level, const BuildLimits& limits = {});
/// Single parity-patterned PSD block over the degree-2r basis plus (Mar).
ConicProblem build_combined(const CostTensor& cost, const Eigen::VectorXd& mu,
                            const Eigen::VectorXd& nu, int level, const BuildLimits& limits = {});
/// Doubly nonnegative first level: M_1(z) PSD, z_{ij,kl} >= 0, (Mar) at r = 1.
ConicProblem build_first_level(const CostTensor& cost, const Eigen::VectorXd& mu,
                               const Eigen::VectorXd& nu, const BuildLimits& limits = {});
ConicProblem build_relaxation(HierarchyKind kind, const CostTensor& cost,
                              const Eigen::VectorXd& mu, const Eigen::VectorXd& nu, int level,
                              const BuildLimits& limits = {});

/// Coordinate of the monomial pi_a * pi_b (pair indices) in a basis over the
/// coupling variables.
std::size_t quadratic_coord(const MonomialBasis& basis, std::size_t a, std::size_t b);

/// P(zt)_alpha = zt_{2 alpha}; the output basis has half the degree.
MomentVector project_P(const MomentVector& z_tilde);
/// Q(z)_{2 alpha} = z_alpha, every other coordinate 0; doubles the degree.
MomentVector extend_Q(const MomentVector& z, Count limit = kDefaultBasisLimit);

/// Polynomial as a sparse list of (monomial, coefficient).
using Polynomial = std::vector<std::pair<MultiIndex, double>>;

/// Localizing matrix M_r(g z): rows/cols over monomials of degree <= r,
/// entry (a, b) = sum_gamma g_gamma z_{gamma + a + b}.
Eigen::MatrixXd moment_matrix(const MomentVector& z, const Polynomial& g, int degree);
/// M_r(z) (g = 1).
Eigen::MatrixXd moment_matrix(const MomentVector& z, int degree);

/// Residual of the (Mar) equalities at z, max absolute value over all rows.
double marginal_residual(const MomentVector& z, const CouplingShape& shape, int level);

/// Principal submatrix of M_{r-d_I}(e_I z) on the monomials of degree exactly
/// r - d_I. Throws ToleranceError when z violates (Mar) by more than `tol`.
Eigen::MatrixXd reduced_moment_matrix(const MomentVector& z, const CouplingShape& shape,
                                      const std::vector<std::size_t>& subset, int level,
                                      double tol = 1e-8);

/// Evaluates a block at z.
Eigen::MatrixXd assemble_block(const PsdBlock& block, const Eigen::VectorXd& z);

struct FeasibilityAudit {
  double max_equality_residual = 0.0;
  double min_eigenvalue = 0.0;      // over all PSD blocks
  double min_nonneg = 0.0;          // over nonneg coordinates
  bool feasible(double eq_tol, double eig_tol) const {
    return max_equality_residual <= eq_tol && min_eigenvalue >= -eig_tol && min_nonneg >= -eig_tol;
  }
};

FeasibilityAudit audit(const ConicProblem& problem, const Eigen::VectorXd& z);

/// Objective value at z.
double evaluate_objective(const ConicProblem& problem, const Eigen::VectorXd& z);

/// Sparse SDPA text export. The free variables are the moment coordinates
/// other than z_0 (fixed to 1); equalities and nonnegativity go to one
/// diagonal (LP) block.
void write_sdpa(const ConicProblem& problem, std::ostream& out);

struct SdpaProblem {
  int num_vars = 0;
  std::vector<int> block_struct;
  Eigen::VectorXd c;
  /// (matrix index k, block, row, col, value); k = 0 is F_0. 1-based as in
  /// the file.
  struct Entry {
    int k, block, row, col;
    double value;
  };
  std::vector<Entry> entries;
};

SdpaProblem read_sdpa(std::istream& in);

}  // namespace gwsos
