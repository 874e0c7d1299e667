#include "spem/basis.hpp"

#include <algorithm>
#include <string>

#include "spem/csv.hpp"
#include "spem/error.hpp"
#include "spem/eval.hpp"

namespace spem {

namespace {

double legendre_unchecked(int k, double x) {
  const double t = 2.0 * x - 1.0;
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = t;
  for (int j = 1; j < k; ++j) {
    const double next = ((2.0 * j + 1.0) * t * cur - j * prev) / (j + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

void extend(TermIndex& current, int dim, int remaining, int active, const BasisSpec& spec,
            std::vector<TermIndex>& out) {
  if (dim == spec.d) {
    out.push_back(current);
    return;
  }
  current[static_cast<std::size_t>(dim)] = 0;
  extend(current, dim + 1, remaining, active, spec, out);
  if (active < spec.m) {
    for (int a = 1; a <= remaining; ++a) {
      current[static_cast<std::size_t>(dim)] = a;
      extend(current, dim + 1, remaining - a, active + 1, spec, out);
    }
  }
  current[static_cast<std::size_t>(dim)] = 0;
}

int total_degree(const TermIndex& t) {
  int s = 0;
  for (int a : t) s += a;
  return s;
}

}  // namespace

BasisSpec::BasisSpec(int degree, int max_interaction, int dims) : p(degree), m(max_interaction), d(dims) {
  if (p < 0) throw Error(ErrorKind::Config, "basis degree p must be >= 0");
  if (d < 1) throw Error(ErrorKind::Config, "basis dimension d must be >= 1");
  if (m < 1 || m > d) throw Error(ErrorKind::Config, "basis interaction order m must satisfy 1 <= m <= d");
}

double legendre_shifted(int k, double x) {
  if (k < 0) throw Error(ErrorKind::Domain, "Legendre degree must be nonnegative");
  if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorKind::Domain, "shifted Legendre argument outside [0,1]");
  return legendre_unchecked(k, x);
}

std::vector<TermIndex> enumerate_terms(const BasisSpec& spec) {
  std::vector<TermIndex> terms;
  TermIndex current(static_cast<std::size_t>(spec.d), 0);
  extend(current, 0, spec.p, 0, spec, terms);
  std::sort(terms.begin(), terms.end(), [](const TermIndex& a, const TermIndex& b) {
    const int da = total_degree(a);
    const int db = total_degree(b);
    if (da != db) return da < db;
    return a > b;
  });
  return terms;
}

Eigen::MatrixXd build_basis_rows(const Eigen::MatrixXd& points, const BasisSpec& spec) {
  if (points.cols() != spec.d) throw Error(ErrorKind::Domain, "basis dimension does not match the inputs");
  const auto terms = enumerate_terms(spec);
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd f(n, static_cast<Eigen::Index>(terms.size()));
  Eigen::MatrixXd table(spec.p + 1, spec.d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < spec.d; ++k)
      for (int a = 0; a <= spec.p; ++a) table(a, k) = legendre_unchecked(a, points(i, k));
    for (std::size_t j = 0; j < terms.size(); ++j) {
      double v = 1.0;
      for (int k = 0; k < spec.d; ++k) {
        const int a = terms[j][static_cast<std::size_t>(k)];
        if (a) v *= table(a, k);
      }
      f(i, static_cast<Eigen::Index>(j)) = v;
    }
  }
  return f;
}

Eigen::MatrixXd build_basis_matrix(const DesignMatrix& x, const BasisSpec& spec) {
  return build_basis_rows(x.points(), spec);
}

BasisSelection select_basis(const DesignMatrix& train_x, const Eigen::VectorXd& train_y,
                            const DesignMatrix& holdout_x, const Eigen::VectorXd& holdout_y,
                            const std::vector<BasisSpec>& candidates) {
  if (candidates.empty()) throw Error(ErrorKind::Config, "select_basis needs at least one candidate");
  if (train_y.size() != train_x.n() || holdout_y.size() != holdout_x.n()) {
    throw Error(ErrorKind::Domain, "response length does not match design size");
  }
  BasisSelection out;
  std::size_t best = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& spec = candidates[c];
    const Eigen::MatrixXd f = build_basis_matrix(train_x, spec);
    if (f.cols() >= f.rows()) {
      throw RankDeficient("basis p=" + std::to_string(spec.p) + ", m=" + std::to_string(spec.m) + " has q=" +
                          std::to_string(f.cols()) + " terms but only " + std::to_string(f.rows()) +
                          " training points");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(f);
    if (qr.rank() < f.cols()) {
      throw RankDeficient("basis p=" + std::to_string(spec.p) + ", m=" + std::to_string(spec.m) +
                          " gives a rank-deficient regression matrix");
    }
    const Eigen::VectorXd beta = qr.solve(train_y);
    const Eigen::VectorXd pred = build_basis_matrix(holdout_x, spec) * beta;
    out.report.push_back({spec, f.cols(), nse(pred, holdout_y)});
    const auto& cur = out.report.back();
    const auto& incumbent = out.report[best];
    // Tolerance absorbs rounding when two bases both reproduce the holdout exactly.
    constexpr double kTie = 1e-10;
    if (cur.nse > incumbent.nse + kTie || (std::abs(cur.nse - incumbent.nse) <= kTie && cur.q < incumbent.q)) {
      best = c;
    }
  }
  out.best = out.report[best].spec;
  return out;
}

void write_terms_csv(const std::string& path, const std::vector<TermIndex>& terms) {
  if (terms.empty()) return;
  const auto d = static_cast<Eigen::Index>(terms.front().size());
  csv::Table t;
  for (Eigen::Index k = 1; k <= d; ++k) t.columns.push_back("a" + std::to_string(k));
  t.values.resize(static_cast<Eigen::Index>(terms.size()), d);
  for (std::size_t j = 0; j < terms.size(); ++j)
    for (Eigen::Index k = 0; k < d; ++k) t.values(static_cast<Eigen::Index>(j), k) = terms[j][static_cast<std::size_t>(k)];
  csv::write_file(path, t);
}

}  // namespace spem
