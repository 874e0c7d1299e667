#ifndef SPEM_BASIS_HPP
#define SPEM_BASIS_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "spem/design.hpp"

namespace spem {

/// Tensor-product Legendre basis: maximum degree `p` (per main effect, or
/// summed over the dimensions of an interaction) and at most `m` interacting
/// dimensions, over `d` inputs.
struct BasisSpec {
  int p = 0;
  int m = 1;
  int d = 1;

  BasisSpec() = default;
  BasisSpec(int degree, int max_interaction, int dims);

  friend bool operator==(const BasisSpec&, const BasisSpec&) = default;
};

/// Exponent multi-index (a_1, ..., a_d).
using TermIndex = std::vector<int>;

/// P_k(2x - 1) by the three-term recurrence. Throws if x is outside [0,1].
double legendre_shifted(int k, double x);

/// Intercept, main effects and interactions in graded-lexicographic order:
/// total degree ascending, then exponent tuples in descending lexicographic
/// order (x1 ranks above x2).
std::vector<TermIndex> enumerate_terms(const BasisSpec& spec);

/// n x q regression matrix F with F(i,j) = prod_k P_{a_k}(2 x_ik - 1).
Eigen::MatrixXd build_basis_matrix(const DesignMatrix& x, const BasisSpec& spec);

/// As build_basis_matrix but without the unit-cube check; used for
/// prediction points that extrapolate beyond the training box.
Eigen::MatrixXd build_basis_rows(const Eigen::MatrixXd& points, const BasisSpec& spec);

struct BasisCandidateResult {
  BasisSpec spec;
  Eigen::Index q = 0;
  double nse = 0.0;
};

struct BasisSelection {
  BasisSpec best;
  std::vector<BasisCandidateResult> report;  // same order as the candidates
};

/// Fits OLS on the training set for each candidate and scores the holdout
/// predictions by Nash-Sutcliffe efficiency. Ties go to the smaller basis.
BasisSelection select_basis(const DesignMatrix& train_x, const Eigen::VectorXd& train_y,
                            const DesignMatrix& holdout_x, const Eigen::VectorXd& holdout_y,
                            const std::vector<BasisSpec>& candidates);

void write_terms_csv(const std::string& path, const std::vector<TermIndex>& terms);

}  // namespace spem

#endif  // SPEM_BASIS_HPP
