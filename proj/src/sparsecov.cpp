#include "spem/sparsecov.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/Sparse>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "spem/error.hpp"

namespace spem {

namespace {

Index argmin(const Eigen::VectorXd& v) {
  Index k = 0;
  v.minCoeff(&k);
  return k;
}

// Row-major copy so the per-pair dimension filter reads contiguous memory.
std::vector<double> row_major(const Eigen::MatrixXd& points) {
  const Index n = points.rows();
  const Index d = points.cols();
  std::vector<double> out(static_cast<std::size_t>(n * d));
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k) out[static_cast<std::size_t>(i * d + k)] = points(i, k);
  return out;
}

template <class Visit>
void for_each_pair(const Eigen::MatrixXd& points, const Eigen::VectorXd& tau, Visit&& visit) {
  const Index n = points.rows();
  const Index d = points.cols();
  if (tau.size() != d) throw Error(ErrorKind::Domain, "range vector length does not match the design dimension");
  const auto rows = row_major(points);
  auto close = [&](Index i, Index j) {
    const double* a = rows.data() + i * d;
    const double* b = rows.data() + j * d;
    for (Index k = 0; k < d; ++k) {
      if (!(std::abs(a[k] - b[k]) < tau(k))) return false;
    }
    return true;
  };
  const Index s = argmin(tau);
  if (2.0 * tau(s) > 0.5) {
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j)
        if (close(i, j)) visit(i, j);
    return;
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return points(a, s) < points(b, s); });
  for (Index a = 0; a < n; ++a) {
    const Index i = order[static_cast<std::size_t>(a)];
    const double xi = points(i, s);
    for (Index b = a + 1; b < n; ++b) {
      const Index j = order[static_cast<std::size_t>(b)];
      if (!(points(j, s) - xi < tau(s))) break;
      if (close(i, j)) visit(std::min(i, j), std::max(i, j));
    }
  }
}

}  // namespace

NeighborPairs find_interacting_pairs(const Eigen::MatrixXd& points, const Eigen::VectorXd& tau) {
  NeighborPairs pairs;
  for_each_pair(points, tau, [&](Index i, Index j) { pairs.emplace_back(i, j); });
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

NeighborPairs find_interacting_pairs(const DesignMatrix& x, const RangeVector& tau) {
  return find_interacting_pairs(x.points(), tau.values());
}

std::size_t count_interacting_pairs(const Eigen::MatrixXd& points, const Eigen::VectorXd& tau) {
  std::size_t count = 0;
  for_each_pair(points, tau, [&](Index, Index) { ++count; });
  return count;
}

// ---------------------------------------------------------------------------

SparseSymMatrix::SparseSymMatrix(Index n, std::vector<Index> row_ptr, std::vector<Index> col_idx,
                                 std::vector<double> values)
    : n_(n), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)), values_(std::move(values)) {
  if (row_ptr_.size() != static_cast<std::size_t>(n_ + 1) || col_idx_.size() != values_.size() ||
      row_ptr_.back() != static_cast<Index>(values_.size())) {
    throw Error(ErrorKind::Domain, "inconsistent compressed-row arrays");
  }
  for (Index i = 0; i < n_; ++i) {
    const Index begin = row_ptr_[static_cast<std::size_t>(i)];
    const Index end = row_ptr_[static_cast<std::size_t>(i + 1)];
    if (end <= begin || col_idx_[static_cast<std::size_t>(begin)] != i) {
      throw Error(ErrorKind::Domain, "row " + std::to_string(i) + " must start with its diagonal entry");
    }
    for (Index p = begin + 1; p < end; ++p) {
      if (col_idx_[static_cast<std::size_t>(p)] <= col_idx_[static_cast<std::size_t>(p - 1)] ||
          col_idx_[static_cast<std::size_t>(p)] >= n_) {
        throw Error(ErrorKind::Domain, "row " + std::to_string(i) + " has unsorted or out-of-range columns");
      }
    }
  }
}

SparseSymMatrix SparseSymMatrix::identity(Index n) {
  std::vector<Index> rp(static_cast<std::size_t>(n + 1));
  std::iota(rp.begin(), rp.end(), Index{0});
  std::vector<Index> ci(static_cast<std::size_t>(n));
  std::iota(ci.begin(), ci.end(), Index{0});
  return SparseSymMatrix(n, std::move(rp), std::move(ci), std::vector<double>(static_cast<std::size_t>(n), 1.0));
}

SparseSymMatrix SparseSymMatrix::from_dense(const Eigen::MatrixXd& dense) {
  const Index n = dense.rows();
  std::vector<Index> rp{0};
  std::vector<Index> ci;
  std::vector<double> v;
  for (Index i = 0; i < n; ++i) {
    ci.push_back(i);
    v.push_back(dense(i, i));
    for (Index j = i + 1; j < n; ++j) {
      if (dense(i, j) != 0.0) {
        ci.push_back(j);
        v.push_back(dense(i, j));
      }
    }
    rp.push_back(static_cast<Index>(v.size()));
  }
  return SparseSymMatrix(n, std::move(rp), std::move(ci), std::move(v));
}

Eigen::VectorXd SparseSymMatrix::multiply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n_);
  for (Index i = 0; i < n_; ++i) {
    for (Index p = row_ptr_[static_cast<std::size_t>(i)]; p < row_ptr_[static_cast<std::size_t>(i + 1)]; ++p) {
      const Index j = col_idx_[static_cast<std::size_t>(p)];
      const double v = values_[static_cast<std::size_t>(p)];
      y(i) += v * x(j);
      if (j != i) y(j) += v * x(i);
    }
  }
  return y;
}

Eigen::MatrixXd SparseSymMatrix::to_dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, n_);
  for (Index i = 0; i < n_; ++i) {
    for (Index p = row_ptr_[static_cast<std::size_t>(i)]; p < row_ptr_[static_cast<std::size_t>(i + 1)]; ++p) {
      const Index j = col_idx_[static_cast<std::size_t>(p)];
      out(i, j) = values_[static_cast<std::size_t>(p)];
      out(j, i) = values_[static_cast<std::size_t>(p)];
    }
  }
  return out;
}

SparseSymMatrix SparseSymMatrix::add_diagonal(double value) const {
  auto v = values_;
  for (Index i = 0; i < n_; ++i) v[static_cast<std::size_t>(row_ptr_[static_cast<std::size_t>(i)])] += value;
  return SparseSymMatrix(n_, row_ptr_, col_idx_, std::move(v));
}

SparseSymMatrix build_sparse_correlation(const DesignMatrix& x, const ProductCorrelationModel& model,
                                         const NeighborPairs& pairs) {
  if (!model.compact_support()) {
    throw Error(ErrorKind::Config, "sparse assembly needs a compactly supported family in every dimension");
  }
  if (model.d() != x.d()) throw Error(ErrorKind::Domain, "model dimension does not match the design");
  const Index n = x.n();
  const Index d = x.d();
  const auto& pts = x.points();
  std::vector<Index> rp(static_cast<std::size_t>(n + 1), 0);
  std::vector<Index> ci;
  std::vector<double> v;
  ci.reserve(pairs.size() + static_cast<std::size_t>(n));
  v.reserve(pairs.size() + static_cast<std::size_t>(n));
  std::size_t p = 0;
  for (Index i = 0; i < n; ++i) {
    ci.push_back(i);
    v.push_back(1.0);
    for (; p < pairs.size() && pairs[p].first == i; ++p) {
      const Index j = pairs[p].second;
      double r = 1.0;
      for (Index k = 0; k < d && r != 0.0; ++k) {
        r *= model.families()[static_cast<std::size_t>(k)].evaluate(std::abs(pts(i, k) - pts(j, k)), model.ranges()[k]);
      }
      if (r != 0.0) {
        ci.push_back(j);
        v.push_back(r);
      }
    }
    rp[static_cast<std::size_t>(i + 1)] = static_cast<Index>(v.size());
  }
  return SparseSymMatrix(n, std::move(rp), std::move(ci), std::move(v));
}

SparseSymMatrix build_sparse_correlation(const DesignMatrix& x, const ProductCorrelationModel& model) {
  if (!model.compact_support()) {
    throw Error(ErrorKind::Config, "sparse assembly needs a compactly supported family in every dimension");
  }
  return build_sparse_correlation(x, model, find_interacting_pairs(x, model.ranges()));
}

double sparsity(const SparseSymMatrix& r) {
  const auto n = static_cast<double>(r.n());
  if (r.n() < 2) return 0.0;
  return 2.0 * static_cast<double>(r.off_diagonal_nnz()) / (n * (n - 1.0));
}

// ---------------------------------------------------------------------------
// Up-looking sparse Cholesky on the permuted upper triangle.

namespace {

std::vector<Index> amd_permutation(const SparseSymMatrix& r) {
  const Index n = r.n();
  std::vector<Eigen::Triplet<double, int>> trips;
  trips.reserve(2 * r.nnz());
  for (Index i = 0; i < n; ++i) {
    for (Index p = r.row_ptr()[static_cast<std::size_t>(i)]; p < r.row_ptr()[static_cast<std::size_t>(i + 1)]; ++p) {
      const Index j = r.col_idx()[static_cast<std::size_t>(p)];
      trips.emplace_back(static_cast<int>(i), static_cast<int>(j), 1.0);
      if (i != j) trips.emplace_back(static_cast<int>(j), static_cast<int>(i), 1.0);
    }
  }
  Eigen::SparseMatrix<double, Eigen::ColMajor, int> a(static_cast<int>(n), static_cast<int>(n));
  a.setFromTriplets(trips.begin(), trips.end());
  Eigen::AMDOrdering<int> amd;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm;
  amd(a, perm);
  // The ordering's indices map new positions to original rows.
  std::vector<Index> out(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = perm.indices()(k);
  return out;
}

std::shared_ptr<const CholeskySymbolic> analyze(const SparseSymMatrix& r, std::vector<Index> perm) {
  auto sym = std::make_shared<CholeskySymbolic>();
  const Index n = r.n();
  const auto un = static_cast<std::size_t>(n);
  sym->n = n;
  if (perm.size() != un) throw Error(ErrorKind::Domain, "permutation length does not match the matrix");
  sym->pinv.assign(un, -1);
  for (std::size_t k = 0; k < un; ++k) {
    const Index old = perm[k];
    if (old < 0 || old >= n || sym->pinv[static_cast<std::size_t>(old)] != -1) {
      throw Error(ErrorKind::Domain, "invalid permutation");
    }
    sym->pinv[static_cast<std::size_t>(old)] = static_cast<Index>(k);
  }
  sym->perm = std::move(perm);

  // Permuted upper triangle, column-compressed.
  std::vector<Index> count(un, 0);
  for (Index i = 0; i < n; ++i) {
    for (Index p = r.row_ptr()[static_cast<std::size_t>(i)]; p < r.row_ptr()[static_cast<std::size_t>(i + 1)]; ++p) {
      const Index a = sym->pinv[static_cast<std::size_t>(i)];
      const Index b = sym->pinv[static_cast<std::size_t>(r.col_idx()[static_cast<std::size_t>(p)])];
      ++count[static_cast<std::size_t>(std::max(a, b))];
    }
  }
  sym->a_col_ptr.assign(un + 1, 0);
  for (std::size_t k = 0; k < un; ++k) sym->a_col_ptr[k + 1] = sym->a_col_ptr[k] + count[k];
  sym->a_row_idx.resize(r.nnz());
  sym->a_source.resize(r.nnz());
  std::vector<Index> next(sym->a_col_ptr.begin(), sym->a_col_ptr.end() - 1);
  for (Index i = 0; i < n; ++i) {
    for (Index p = r.row_ptr()[static_cast<std::size_t>(i)]; p < r.row_ptr()[static_cast<std::size_t>(i + 1)]; ++p) {
      const Index a = sym->pinv[static_cast<std::size_t>(i)];
      const Index b = sym->pinv[static_cast<std::size_t>(r.col_idx()[static_cast<std::size_t>(p)])];
      const auto slot = static_cast<std::size_t>(next[static_cast<std::size_t>(std::max(a, b))]++);
      sym->a_row_idx[slot] = std::min(a, b);
      sym->a_source[slot] = static_cast<std::size_t>(p);
    }
  }

  // Elimination tree.
  sym->parent.assign(un, -1);
  std::vector<Index> ancestor(un, -1);
  for (Index k = 0; k < n; ++k) {
    for (Index p = sym->a_col_ptr[static_cast<std::size_t>(k)]; p < sym->a_col_ptr[static_cast<std::size_t>(k + 1)]; ++p) {
      Index i = sym->a_row_idx[static_cast<std::size_t>(p)];
      while (i != -1 && i < k) {
        const Index inext = ancestor[static_cast<std::size_t>(i)];
        ancestor[static_cast<std::size_t>(i)] = k;
        if (inext == -1) sym->parent[static_cast<std::size_t>(i)] = k;
        i = inext;
      }
    }
  }

  // Column counts of L from the row patterns (row k of L = reach of column k of A in the tree).
  std::vector<Index> colcount(un, 1);
  std::vector<Index> visited(un, -1);
  for (Index k = 0; k < n; ++k) {
    visited[static_cast<std::size_t>(k)] = k;
    for (Index p = sym->a_col_ptr[static_cast<std::size_t>(k)]; p < sym->a_col_ptr[static_cast<std::size_t>(k + 1)]; ++p) {
      for (Index i = sym->a_row_idx[static_cast<std::size_t>(p)]; visited[static_cast<std::size_t>(i)] != k;
           i = sym->parent[static_cast<std::size_t>(i)]) {
        visited[static_cast<std::size_t>(i)] = k;
        ++colcount[static_cast<std::size_t>(i)];
      }
    }
  }
  sym->col_ptr.assign(un + 1, 0);
  for (std::size_t k = 0; k < un; ++k) sym->col_ptr[k + 1] = sym->col_ptr[k] + colcount[k];
  return sym;
}

CholeskyFactor numeric(const std::shared_ptr<const CholeskySymbolic>& sym, const SparseSymMatrix& r) {
  const Index n = sym->n;
  const auto un = static_cast<std::size_t>(n);
  const auto nnz_l = static_cast<std::size_t>(sym->col_ptr[un]);
  std::vector<Index> li(nnz_l);
  std::vector<double> lx(nnz_l);
  std::vector<Index> next(sym->col_ptr.begin(), sym->col_ptr.end() - 1);
  std::vector<double> x(un, 0.0);
  std::vector<Index> stack(un);
  std::vector<Index> visited(un, -1);
  const auto& rv = r.values();
  for (Index k = 0; k < n; ++k) {
    // Nonzero pattern of row k of L, in topological order, in stack[top..n).
    Index top = n;
    visited[static_cast<std::size_t>(k)] = k;
    for (Index p = sym->a_col_ptr[static_cast<std::size_t>(k)]; p < sym->a_col_ptr[static_cast<std::size_t>(k + 1)]; ++p) {
      const Index row = sym->a_row_idx[static_cast<std::size_t>(p)];
      x[static_cast<std::size_t>(row)] += rv[sym->a_source[static_cast<std::size_t>(p)]];
      Index len = 0;
      for (Index i = row; visited[static_cast<std::size_t>(i)] != k; i = sym->parent[static_cast<std::size_t>(i)]) {
        stack[static_cast<std::size_t>(len++)] = i;
        visited[static_cast<std::size_t>(i)] = k;
      }
      while (len > 0) stack[static_cast<std::size_t>(--top)] = stack[static_cast<std::size_t>(--len)];
    }
    double diag = x[static_cast<std::size_t>(k)];
    x[static_cast<std::size_t>(k)] = 0.0;
    for (; top < n; ++top) {
      const Index i = stack[static_cast<std::size_t>(top)];
      const Index start = sym->col_ptr[static_cast<std::size_t>(i)];
      const double lki = x[static_cast<std::size_t>(i)] / lx[static_cast<std::size_t>(start)];
      x[static_cast<std::size_t>(i)] = 0.0;
      const Index end = next[static_cast<std::size_t>(i)];
      for (Index p = start + 1; p < end; ++p) {
        x[static_cast<std::size_t>(li[static_cast<std::size_t>(p)])] -= lx[static_cast<std::size_t>(p)] * lki;
      }
      diag -= lki * lki;
      const auto slot = static_cast<std::size_t>(next[static_cast<std::size_t>(i)]++);
      li[slot] = k;
      lx[slot] = lki;
    }
    if (!(diag > 0.0)) throw NotPositiveDefinite(static_cast<std::size_t>(sym->perm[static_cast<std::size_t>(k)]), diag);
    const auto slot = static_cast<std::size_t>(next[static_cast<std::size_t>(k)]++);
    li[slot] = k;
    lx[slot] = std::sqrt(diag);
  }
  return CholeskyFactor(sym, std::move(li), std::move(lx));
}

std::vector<Index> natural(Index n) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  return p;
}

}  // namespace

CholeskyFactor::CholeskyFactor(std::shared_ptr<const CholeskySymbolic> symbolic, std::vector<Index> row_idx,
                               std::vector<double> values)
    : symbolic_(std::move(symbolic)), row_idx_(std::move(row_idx)), values_(std::move(values)) {}

Eigen::MatrixXd CholeskyFactor::upper_dense() const {
  const Index n = this->n();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index p = symbolic_->col_ptr[static_cast<std::size_t>(j)]; p < symbolic_->col_ptr[static_cast<std::size_t>(j + 1)]; ++p) {
      q(j, row_idx_[static_cast<std::size_t>(p)]) = values_[static_cast<std::size_t>(p)];
    }
  }
  return q;
}

Eigen::MatrixXd CholeskyFactor::solve_transposed(const Eigen::MatrixXd& b) const {
  const Index n = this->n();
  if (b.rows() != n) throw Error(ErrorKind::Domain, "right-hand side has the wrong number of rows");
  Eigen::MatrixXd w(n, b.cols());
  for (Index k = 0; k < n; ++k) w.row(k) = b.row(symbolic_->perm[static_cast<std::size_t>(k)]);
  const auto& cp = symbolic_->col_ptr;
  for (Index c = 0; c < w.cols(); ++c) {
    double* col = w.col(c).data();
    for (Index j = 0; j < n; ++j) {
      const Index start = cp[static_cast<std::size_t>(j)];
      const double v = col[j] / values_[static_cast<std::size_t>(start)];
      col[j] = v;
      if (v == 0.0) continue;
      for (Index p = start + 1; p < cp[static_cast<std::size_t>(j + 1)]; ++p) {
        col[row_idx_[static_cast<std::size_t>(p)]] -= values_[static_cast<std::size_t>(p)] * v;
      }
    }
  }
  return w;
}

void CholeskyFactor::solve_transposed_sparse(const std::vector<std::pair<Index, double>>& rhs,
                                             std::vector<Index>& pattern, std::vector<double>& values,
                                             std::vector<double>& work, std::vector<char>& mark) const {
  const auto un = static_cast<std::size_t>(n());
  if (work.size() != un) work.assign(un, 0.0);
  if (mark.size() != un) mark.assign(un, 0);
  pattern.clear();
  // The solution pattern is the union of elimination-tree paths from the
  // nonzero rows to the root; parents have larger indices than children.
  for (const auto& [row, v] : rhs) {
    Index i = symbolic_->pinv[static_cast<std::size_t>(row)];
    work[static_cast<std::size_t>(i)] += v;
    for (; i != -1 && !mark[static_cast<std::size_t>(i)]; i = symbolic_->parent[static_cast<std::size_t>(i)]) {
      mark[static_cast<std::size_t>(i)] = 1;
      pattern.push_back(i);
    }
  }
  std::sort(pattern.begin(), pattern.end());
  const auto& cp = symbolic_->col_ptr;
  values.resize(pattern.size());
  for (std::size_t t = 0; t < pattern.size(); ++t) {
    const Index j = pattern[t];
    const Index start = cp[static_cast<std::size_t>(j)];
    const double v = work[static_cast<std::size_t>(j)] / values_[static_cast<std::size_t>(start)];
    values[t] = v;
    work[static_cast<std::size_t>(j)] = 0.0;
    mark[static_cast<std::size_t>(j)] = 0;
    if (v == 0.0) continue;
    for (Index p = start + 1; p < cp[static_cast<std::size_t>(j + 1)]; ++p) {
      work[static_cast<std::size_t>(row_idx_[static_cast<std::size_t>(p)])] -= values_[static_cast<std::size_t>(p)] * v;
    }
  }
}

CholeskyFactor SparseCholeskySolver::factorize(const SparseSymMatrix& r) {
  if (!symbolic_ || !pattern_.same_pattern(r)) {
    auto perm = ordering_ == Ordering::Amd ? amd_permutation(r) : natural(r.n());
    symbolic_ = analyze(r, std::move(perm));
    pattern_ = r;
    ++analyses_;
  }
  return numeric(symbolic_, r);
}

CholeskyFactor sparse_cholesky(const SparseSymMatrix& r, Ordering ordering) {
  SparseCholeskySolver solver(ordering);
  return solver.factorize(r);
}

CholeskyFactor sparse_cholesky(const SparseSymMatrix& r, const std::vector<Index>& perm) {
  return numeric(analyze(r, perm), r);
}

double logdet(const CholeskyFactor& f) {
  double s = 0.0;
  for (Index k = 0; k < f.n(); ++k) s += std::log(f.diagonal(k));
  return 2.0 * s;
}

Eigen::MatrixXd solve_transposed(const CholeskyFactor& f, const Eigen::MatrixXd& b) { return f.solve_transposed(b); }

// ---------------------------------------------------------------------------

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<unsigned char, 8> bytes{};
  for (int b = 0; b < 8; ++b) bytes[static_cast<std::size_t>(b)] = static_cast<unsigned char>((v >> (8 * b)) & 0xFFu);
  out.write(reinterpret_cast<const char*>(bytes.data()), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), 8);
  if (!in) throw Error(ErrorKind::Schema, "truncated SPCM file");
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | bytes[static_cast<std::size_t>(b)];
  return v;
}

}  // namespace

void write_spcm(const std::filesystem::path& path, const SparseSymMatrix& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Schema, "cannot write '" + path.string() + "'");
  out.write("SPCM", 4);
  put_u64(out, static_cast<std::uint64_t>(r.n()));
  put_u64(out, static_cast<std::uint64_t>(r.nnz()));
  for (Index p : r.row_ptr()) put_u64(out, static_cast<std::uint64_t>(p));
  for (Index c : r.col_idx()) put_u64(out, static_cast<std::uint64_t>(c));
  for (double v : r.values()) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(out, bits);
  }
}

SparseSymMatrix read_spcm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Schema, "cannot open '" + path.string() + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SPCM", 4) != 0) throw Error(ErrorKind::Schema, "bad SPCM magic");
  const auto n = static_cast<Index>(get_u64(in));
  const auto nnz = static_cast<std::size_t>(get_u64(in));
  std::vector<Index> rp(static_cast<std::size_t>(n + 1));
  for (auto& p : rp) p = static_cast<Index>(get_u64(in));
  std::vector<Index> ci(nnz);
  for (auto& c : ci) c = static_cast<Index>(get_u64(in));
  std::vector<double> v(nnz);
  for (auto& x : v) {
    const std::uint64_t bits = get_u64(in);
    std::memcpy(&x, &bits, sizeof x);
  }
  return SparseSymMatrix(n, std::move(rp), std::move(ci), std::move(v));
}

// ---------------------------------------------------------------------------

CrossNeighborIndex::CrossNeighborIndex(const Eigen::MatrixXd& training, const ProductCorrelationModel& model)
    : training_(&training), model_(&model) {
  Eigen::VectorXd tau = model.ranges().values();
  for (Index k = 0; k < model.d(); ++k) {
    if (!model.families()[static_cast<std::size_t>(k)].compact_support()) tau(k) = std::numeric_limits<double>::infinity();
  }
  sweep_dim_ = argmin(tau);
  const Index n = training.rows();
  order_.resize(static_cast<std::size_t>(n));
  std::iota(order_.begin(), order_.end(), Index{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [&](Index a, Index b) { return training(a, sweep_dim_) < training(b, sweep_dim_); });
  keys_.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) keys_[static_cast<std::size_t>(i)] = training(order_[static_cast<std::size_t>(i)], sweep_dim_);
}

void CrossNeighborIndex::query(const Eigen::RowVectorXd& query, std::vector<std::pair<Index, double>>& out) const {
  out.clear();
  const auto& fam = model_->families()[static_cast<std::size_t>(sweep_dim_)];
  auto lo = keys_.begin();
  auto hi = keys_.end();
  if (fam.compact_support()) {
    const double tau = model_->ranges()[sweep_dim_];
    lo = std::upper_bound(keys_.begin(), keys_.end(), query(sweep_dim_) - tau);
    hi = std::lower_bound(keys_.begin(), keys_.end(), query(sweep_dim_) + tau);
  }
  for (auto it = lo; it != hi; ++it) {
    const Index i = order_[static_cast<std::size_t>(it - keys_.begin())];
    const double r = (*model_)(training_->row(i), query);
    if (r != 0.0) out.emplace_back(i, r);
  }
  std::sort(out.begin(), out.end());
}

// ---------------------------------------------------------------------------

namespace {

class SparseCorrelationFactor final : public CorrelationFactor {
 public:
  SparseCorrelationFactor(const DesignMatrix& x, const ProductCorrelationModel& model, CholeskyFactor factor,
                          std::size_t off_diag)
      : points_(x.points()), model_(model), factor_(std::move(factor)), index_(points_, model_), off_diag_(off_diag) {}
  SparseCorrelationFactor(const SparseCorrelationFactor&) = delete;
  SparseCorrelationFactor& operator=(const SparseCorrelationFactor&) = delete;

  Index n() const override { return factor_.n(); }
  double logdet() const override { return spem::logdet(factor_); }
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& b) const override { return factor_.solve_transposed(b); }
  void whiten_cross(const Eigen::RowVectorXd& query, std::vector<Index>& pattern, std::vector<double>& values) const override {
    thread_local std::vector<std::pair<Index, double>> rhs;
    thread_local std::vector<double> work;
    thread_local std::vector<char> mark;
    index_.query(query, rhs);
    factor_.solve_transposed_sparse(rhs, pattern, values, work, mark);
  }
  std::size_t off_diagonal_nnz() const override { return off_diag_; }

 private:
  Eigen::MatrixXd points_;
  ProductCorrelationModel model_;
  CholeskyFactor factor_;
  CrossNeighborIndex index_;
  std::size_t off_diag_;
};

class DenseCorrelationFactor final : public CorrelationFactor {
 public:
  DenseCorrelationFactor(const DesignMatrix& x, const ProductCorrelationModel& model, double jitter)
      : points_(x.points()), model_(model) {
    Eigen::MatrixXd r = dense_correlation(points_, model_);
    off_diag_ = 0;
    for (Index j = 0; j < r.cols(); ++j)
      for (Index i = 0; i < j; ++i)
        if (r(i, j) != 0.0) ++off_diag_;
    r.diagonal().array() += jitter;
    llt_.compute(r);
    const Eigen::VectorXd diag = llt_.matrixLLT().diagonal();
    if (llt_.info() != Eigen::Success || !diag.allFinite() || (diag.array() <= 0.0).any()) {
      Index bad = 0;
      for (; bad < diag.size(); ++bad)
        if (!(std::isfinite(diag(bad)) && diag(bad) > 0.0)) break;
      throw NotPositiveDefinite(static_cast<std::size_t>(std::min(bad, diag.size() - 1)),
                                bad < diag.size() ? diag(bad) : 0.0);
    }
  }

  Index n() const override { return points_.rows(); }
  double logdet() const override { return 2.0 * llt_.matrixLLT().diagonal().array().log().sum(); }
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& b) const override { return llt_.matrixL().solve(b); }
  void whiten_cross(const Eigen::RowVectorXd& query, std::vector<Index>& pattern, std::vector<double>& values) const override {
    Eigen::VectorXd g(points_.rows());
    for (Index i = 0; i < points_.rows(); ++i) g(i) = model_(points_.row(i), query);
    const Eigen::VectorXd w = llt_.matrixL().solve(g);
    pattern.resize(static_cast<std::size_t>(w.size()));
    values.resize(static_cast<std::size_t>(w.size()));
    for (Index i = 0; i < w.size(); ++i) {
      pattern[static_cast<std::size_t>(i)] = i;
      values[static_cast<std::size_t>(i)] = w(i);
    }
  }
  std::size_t off_diagonal_nnz() const override { return off_diag_; }

 private:
  Eigen::MatrixXd points_;
  ProductCorrelationModel model_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  std::size_t off_diag_ = 0;
};

}  // namespace

std::unique_ptr<CorrelationFactor> factorize_correlation(const DesignMatrix& x, const ProductCorrelationModel& model,
                                                         const FactorOptions& options, SparseCholeskySolver* solver) {
  if (model.d() != x.d()) throw Error(ErrorKind::Domain, "model dimension does not match the design");
  if (!model.compact_support() || options.force_dense) {
    return std::make_unique<DenseCorrelationFactor>(x, model, options.jitter);
  }
  SparseSymMatrix r = build_sparse_correlation(x, model);
  const std::size_t off = r.off_diagonal_nnz();
  if (options.jitter != 0.0) r = r.add_diagonal(options.jitter);
  SparseCholeskySolver local(options.ordering);
  SparseCholeskySolver& s = solver ? *solver : local;
  return std::make_unique<SparseCorrelationFactor>(x, model, s.factorize(r), off);
}

}  // namespace spem
