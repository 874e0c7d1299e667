#include "doctest.h"

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "spem/basis.hpp"
#include "spem/design.hpp"
#include "spem/error.hpp"

using spem::BasisSpec;

namespace {

// Exhaustive count over [0,p]^d: total degree <= p, at most m nonzero exponents.
std::size_t brute_term_count(int d, int p, int m) {
  std::size_t count = 0;
  std::vector<int> a(static_cast<std::size_t>(d), 0);
  while (true) {
    int total = 0;
    int support = 0;
    for (int v : a) {
      total += v;
      support += v > 0 ? 1 : 0;
    }
    if (total <= p && support <= m) ++count;
    std::size_t k = 0;
    while (k < a.size() && a[k] == p) a[k++] = 0;
    if (k == a.size()) break;
    ++a[k];
  }
  return count;
}

}  // namespace

TEST_CASE("shifted Legendre examples") {
  for (double x : {0.0, 0.3, 1.0}) CHECK(spem::legendre_shifted(0, x) == 1.0);
  CHECK(std::abs(spem::legendre_shifted(1, 0.5)) < 1e-15);
  CHECK(spem::legendre_shifted(2, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(spem::legendre_shifted(2, 1.01), spem::Error);
  CHECK_THROWS_AS(spem::legendre_shifted(2, -0.01), spem::Error);
}

TEST_CASE("shifted Legendre matches the explicit sum formula") {
  for (int k = 0; k <= 10; ++k)
    for (int i = 0; i <= 40; ++i) {
      const double x = i / 40.0;
      CHECK(spem::legendre_shifted(k, x) == doctest::Approx(oracle::legendre(k, x)).epsilon(1e-11));
    }
}

TEST_CASE("shifted Legendre peaks in magnitude at the endpoints") {
  for (int k = 0; k <= 8; ++k) {
    double peak = 0.0;
    for (int i = 0; i <= 2000; ++i) peak = std::max(peak, std::abs(spem::legendre_shifted(k, i / 2000.0)));
    CHECK(peak == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(spem::legendre_shifted(k, 0.0)) == doctest::Approx(1.0));
    CHECK(std::abs(spem::legendre_shifted(k, 1.0)) == doctest::Approx(1.0));
  }
}

TEST_CASE("term counts") {
  CHECK(spem::enumerate_terms(BasisSpec(4, 2, 4)).size() == 53);
  CHECK(spem::enumerate_terms(BasisSpec(5, 2, 2)).size() == 21);
  const auto intercept = spem::enumerate_terms(BasisSpec(0, 1, 3));
  REQUIRE(intercept.size() == 1);
  CHECK(intercept[0] == spem::TermIndex{0, 0, 0});
  for (int d = 1; d <= 4; ++d)
    for (int p = 0; p <= 5; ++p)
      for (int m = 1; m <= d; ++m) CHECK(spem::enumerate_terms(BasisSpec(p, m, d)).size() == brute_term_count(d, p, m));
}

TEST_CASE("terms are distinct, graded and closed under relabelling") {
  const auto terms = spem::enumerate_terms(BasisSpec(4, 3, 4));
  std::set<spem::TermIndex> seen(terms.begin(), terms.end());
  CHECK(seen.size() == terms.size());
  int previous = 0;
  for (const auto& t : terms) {
    int total = 0;
    for (int v : t) total += v;
    CHECK(total >= previous);
    previous = total;
  }
  std::vector<int> perm{2, 0, 3, 1};
  std::set<spem::TermIndex> permuted;
  for (const auto& t : terms) {
    spem::TermIndex u(4);
    for (std::size_t k = 0; k < 4; ++k) u[k] = t[static_cast<std::size_t>(perm[k])];
    permuted.insert(u);
  }
  CHECK(permuted == seen);
}

TEST_CASE("invalid basis specs") {
  CHECK_THROWS_AS(BasisSpec(-1, 1, 2), spem::Error);
  CHECK_THROWS_AS(BasisSpec(2, 3, 2), spem::Error);
  CHECK_THROWS_AS(BasisSpec(2, 0, 2), spem::Error);
}

TEST_CASE("degree zero basis is a column of ones") {
  const spem::DesignMatrix x = spem::latin_hypercube(9, 2, 1);
  const Eigen::MatrixXd f = spem::build_basis_matrix(x, BasisSpec(0, 1, 2));
  CHECK(f.cols() == 1);
  CHECK(f == Eigen::MatrixXd::Ones(9, 1));
}

TEST_CASE("odd columns vanish at the centre") {
  const spem::DesignMatrix x(Eigen::MatrixXd::Constant(1, 2, 0.5));
  const BasisSpec spec(2, 2, 2);
  const Eigen::MatrixXd f = spem::build_basis_matrix(x, spec);
  const auto terms = spem::enumerate_terms(spec);
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const bool odd = (terms[j][0] % 2 == 1) || (terms[j][1] % 2 == 1);
    if (odd) CHECK(f(0, static_cast<Eigen::Index>(j)) == 0.0);
  }
}

TEST_CASE("basis matrix matches the monomial expansion") {
  const spem::DesignMatrix x(oracle::uniform_points(3, 2, 8));
  const BasisSpec spec(3, 2, 2);
  const Eigen::MatrixXd f = spem::build_basis_matrix(x, spec);
  const auto terms = spem::enumerate_terms(spec);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < terms.size(); ++j) {
      const double want = oracle::legendre(terms[j][0], x(i, 0)) * oracle::legendre(terms[j][1], x(i, 1));
      CHECK(std::abs(f(i, static_cast<Eigen::Index>(j)) - want) < 1e-12);
    }
}

TEST_CASE("columns are orthogonal on a fine grid") {
  const Eigen::Index grid = 10001;
  Eigen::MatrixXd pts(grid, 1);
  for (Eigen::Index i = 0; i < grid; ++i) pts(i, 0) = static_cast<double>(i) / static_cast<double>(grid - 1);
  const Eigen::MatrixXd f = spem::build_basis_matrix(spem::DesignMatrix(pts), BasisSpec(6, 1, 1));
  const Eigen::MatrixXd gram = f.transpose() * f / static_cast<double>(grid);
  for (Eigen::Index j = 0; j < gram.rows(); ++j) {
    CHECK(gram(j, j) == doctest::Approx(1.0 / (2.0 * static_cast<double>(j) + 1.0)).epsilon(2e-3));
    for (Eigen::Index k = 0; k < gram.cols(); ++k)
      if (j != k) CHECK(std::abs(gram(j, k)) < 1e-3);
  }
}

TEST_CASE("selection recovers a quadratic and prefers the smaller basis") {
  const spem::DesignMatrix tx = spem::latin_hypercube(60, 2, 5);
  const spem::DesignMatrix hx = spem::latin_hypercube(30, 2, 6);
  auto truth = [](const spem::DesignMatrix& x) {
    Eigen::VectorXd y(x.n());
    for (Eigen::Index i = 0; i < x.n(); ++i) y(i) = 1.0 + 2.0 * x(i, 0) - 3.0 * x(i, 1) * x(i, 1) + x(i, 0) * x(i, 1);
    return y;
  };
  const auto sel = spem::select_basis(tx, truth(tx), hx, truth(hx),
                                      {BasisSpec(1, 2, 2), BasisSpec(2, 2, 2), BasisSpec(3, 2, 2)});
  REQUIRE(sel.report.size() == 3);
  CHECK(sel.report[0].nse < 1.0 - 1e-6);
  CHECK(sel.report[1].nse == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sel.report[2].nse == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sel.best == BasisSpec(2, 2, 2));
}

TEST_CASE("pure noise gives no positive efficiency") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z;
  const spem::DesignMatrix tx = spem::latin_hypercube(2000, 2, 7);
  const spem::DesignMatrix hx = spem::latin_hypercube(500, 2, 8);
  Eigen::VectorXd ty(tx.n());
  Eigen::VectorXd hy(hx.n());
  for (auto& v : ty) v = 4.0 + z(rng);
  for (auto& v : hy) v = 4.0 + z(rng);
  const auto sel =
      spem::select_basis(tx, ty, hx, hy, {BasisSpec(0, 1, 2), BasisSpec(1, 1, 2), BasisSpec(2, 2, 2), BasisSpec(3, 2, 2)});
  for (const auto& r : sel.report) {
    CHECK(r.nse <= 0.0);
    CHECK(sel.report[0].nse >= r.nse);
  }
}

TEST_CASE("too many terms is rank deficient") {
  const spem::DesignMatrix x = spem::latin_hypercube(5, 2, 1);
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(5, 0.0, 1.0);
  CHECK_THROWS_AS(spem::select_basis(x, y, x, y, {BasisSpec(4, 2, 2)}), spem::RankDeficient);
}
