#ifndef SPEM_SPARSECOV_HPP
#define SPEM_SPARSECOV_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <utility>
#include <vector>

#include "spem/correlation.hpp"
#include "spem/design.hpp"

namespace spem {

using Index = Eigen::Index;

/// Pairs (i, j), i < j, whose separations are below tau in every dimension,
/// sorted lexicographically.
using NeighborPairs = std::vector<std::pair<Index, Index>>;

/// Sweep along the dimension with the smallest range, filtering the others.
/// Falls back to a full double loop when the sweep window would cover more
/// than half of the points.
NeighborPairs find_interacting_pairs(const DesignMatrix& x, const RangeVector& tau);
NeighborPairs find_interacting_pairs(const Eigen::MatrixXd& points, const Eigen::VectorXd& tau);

/// Number of interacting pairs without materializing them.
std::size_t count_interacting_pairs(const Eigen::MatrixXd& points, const Eigen::VectorXd& tau);

/// Symmetric matrix stored as upper triangle plus diagonal in compressed-row
/// form. Each row lists the diagonal first, then strictly increasing columns.
class SparseSymMatrix {
 public:
  SparseSymMatrix() = default;
  SparseSymMatrix(Index n, std::vector<Index> row_ptr, std::vector<Index> col_idx, std::vector<double> values);

  static SparseSymMatrix identity(Index n);
  /// Upper triangle of a dense symmetric matrix, dropping exact zeros.
  static SparseSymMatrix from_dense(const Eigen::MatrixXd& dense);

  [[nodiscard]] Index n() const noexcept { return n_; }
  [[nodiscard]] std::size_t nnz() const noexcept { return values_.size(); }
  [[nodiscard]] std::size_t off_diagonal_nnz() const noexcept { return values_.size() - static_cast<std::size_t>(n_); }
  [[nodiscard]] const std::vector<Index>& row_ptr() const noexcept { return row_ptr_; }
  [[nodiscard]] const std::vector<Index>& col_idx() const noexcept { return col_idx_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

  [[nodiscard]] bool same_pattern(const SparseSymMatrix& other) const {
    return n_ == other.n_ && row_ptr_ == other.row_ptr_ && col_idx_ == other.col_idx_;
  }
  /// y = R x.
  [[nodiscard]] Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;
  [[nodiscard]] Eigen::MatrixXd to_dense() const;
  /// Adds `value` to every diagonal entry.
  [[nodiscard]] SparseSymMatrix add_diagonal(double value) const;

 private:
  Index n_ = 0;
  std::vector<Index> row_ptr_;
  std::vector<Index> col_idx_;
  std::vector<double> values_;
};

/// Correlation matrix for a fully compactly supported model: unit diagonal
/// plus the interacting pairs, with entries that round to zero dropped.
SparseSymMatrix build_sparse_correlation(const DesignMatrix& x, const ProductCorrelationModel& model);
SparseSymMatrix build_sparse_correlation(const DesignMatrix& x, const ProductCorrelationModel& model,
                                         const NeighborPairs& pairs);

/// Proportion of nonzero off-diagonal entries, n_offdiag / (n (n - 1)).
double sparsity(const SparseSymMatrix& r);

enum class Ordering { Amd, Natural };

/// Symbolic analysis: permutation, elimination tree and column layout of the factor.
struct CholeskySymbolic {
  Index n = 0;
  std::vector<Index> perm;  // perm[new] = old
  std::vector<Index> pinv;  // pinv[old] = new
  std::vector<Index> parent;
  std::vector<Index> col_ptr;  // of the lower factor L = Q'
  // Permuted upper triangle of R, column-compressed, as a gather map into R's values.
  std::vector<Index> a_col_ptr;
  std::vector<Index> a_row_idx;
  std::vector<std::size_t> a_source;
};

/// R[perm, perm] = Q'Q with Q upper triangular. Q is stored row-compressed,
/// which is the column-compressed layout of L = Q'. Immutable.
class CholeskyFactor {
 public:
  CholeskyFactor(std::shared_ptr<const CholeskySymbolic> symbolic, std::vector<Index> row_idx, std::vector<double> values);

  [[nodiscard]] Index n() const noexcept { return symbolic_->n; }
  [[nodiscard]] const std::vector<Index>& perm() const noexcept { return symbolic_->perm; }
  [[nodiscard]] const std::vector<Index>& pinv() const noexcept { return symbolic_->pinv; }
  [[nodiscard]] std::size_t nnz() const noexcept { return values_.size(); }
  [[nodiscard]] const CholeskySymbolic& symbolic() const noexcept { return *symbolic_; }
  [[nodiscard]] double diagonal(Index k) const { return values_[static_cast<std::size_t>(symbolic_->col_ptr[static_cast<std::size_t>(k)])]; }

  /// Dense copy of Q (permuted coordinates).
  [[nodiscard]] Eigen::MatrixXd upper_dense() const;

  /// W with Q'W = B[perm], so that W'W = B'R^{-1}B.
  [[nodiscard]] Eigen::MatrixXd solve_transposed(const Eigen::MatrixXd& b) const;

  /// Sparse right-hand side given as (original row, value) entries; returns the
  /// nonzero pattern (permuted rows, ascending) and values of the solution.
  void solve_transposed_sparse(const std::vector<std::pair<Index, double>>& rhs, std::vector<Index>& pattern,
                               std::vector<double>& values, std::vector<double>& work,
                               std::vector<char>& mark) const;

 private:
  std::shared_ptr<const CholeskySymbolic> symbolic_;
  std::vector<Index> row_idx_;
  std::vector<double> values_;
};

/// Factorizes sparse symmetric positive definite matrices, reusing the
/// symbolic analysis while the sparsity pattern is unchanged.
class SparseCholeskySolver {
 public:
  explicit SparseCholeskySolver(Ordering ordering = Ordering::Amd) : ordering_(ordering) {}

  /// Throws NotPositiveDefinite (with the pivot's original row index).
  CholeskyFactor factorize(const SparseSymMatrix& r);
  /// Number of symbolic analyses performed so far.
  [[nodiscard]] std::size_t analyses() const noexcept { return analyses_; }

 private:
  Ordering ordering_;
  std::shared_ptr<const CholeskySymbolic> symbolic_;
  SparseSymMatrix pattern_;
  std::size_t analyses_ = 0;
};

CholeskyFactor sparse_cholesky(const SparseSymMatrix& r, Ordering ordering = Ordering::Amd);
/// Factorization with a caller-supplied permutation (perm[new] = old).
CholeskyFactor sparse_cholesky(const SparseSymMatrix& r, const std::vector<Index>& perm);

/// log det R = 2 sum log diag(Q).
double logdet(const CholeskyFactor& f);
Eigen::MatrixXd solve_transposed(const CholeskyFactor& f, const Eigen::MatrixXd& b);

/// Binary dump: "SPCM", little-endian u64 n and nnz, u64 row pointers,
/// u64 column indices, IEEE-754 doubles.
void write_spcm(const std::filesystem::path& path, const SparseSymMatrix& r);
SparseSymMatrix read_spcm(const std::filesystem::path& path);

/// Training points within the compact support of a query point, found by a
/// binary-searched window along the dimension with the smallest range.
class CrossNeighborIndex {
 public:
  CrossNeighborIndex(const Eigen::MatrixXd& training, const ProductCorrelationModel& model);
  /// (training row, correlation) for every nonzero correlation with `query`.
  void query(const Eigen::RowVectorXd& query, std::vector<std::pair<Index, double>>& out) const;

 private:
  const Eigen::MatrixXd* training_;
  const ProductCorrelationModel* model_;
  Index sweep_dim_ = 0;
  std::vector<Index> order_;
  std::vector<double> keys_;
};

/// Factorized correlation matrix seen through the whitening map W = Q'^{-1} P B.
/// Implemented by the sparse path and a dense reference path.
class CorrelationFactor {
 public:
  virtual ~CorrelationFactor() = default;
  [[nodiscard]] virtual Index n() const = 0;
  [[nodiscard]] virtual double logdet() const = 0;
  [[nodiscard]] virtual Eigen::MatrixXd whiten(const Eigen::MatrixXd& b) const = 0;
  /// Correlations between the training points and `query`, whitened. The
  /// result is sparse in whitened coordinates.
  virtual void whiten_cross(const Eigen::RowVectorXd& query, std::vector<Index>& pattern,
                            std::vector<double>& values) const = 0;
  /// Number of stored off-diagonal correlations (upper triangle).
  [[nodiscard]] virtual std::size_t off_diagonal_nnz() const = 0;
};

struct FactorOptions {
  double jitter = 0.0;
  bool force_dense = false;
  Ordering ordering = Ordering::Amd;
};

/// Builds and factorizes R for the given model: the sparse path when every
/// dimension is compactly supported (unless forced dense), the dense path
/// otherwise. `solver` carries the symbolic cache between calls and may be null.
std::unique_ptr<CorrelationFactor> factorize_correlation(const DesignMatrix& x, const ProductCorrelationModel& model,
                                                         const FactorOptions& options = {},
                                                         SparseCholeskySolver* solver = nullptr);

}  // namespace spem

#endif  // SPEM_SPARSECOV_HPP
