// Reference implementations used by the tests. These avoid the library's own
// code paths: dense linear algebra, exhaustive loops and closed forms.
#ifndef SPEM_TESTS_ORACLES_HPP
#define SPEM_TESTS_ORACLES_HPP

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// Explicit P_n(t) = 2^-n sum_k C(n,k)^2 (t-1)^(n-k) (t+1)^k evaluated at t = 2x - 1.
inline double legendre(int n, double x) {
  const double t = 2.0 * x - 1.0;
  double sum = 0.0;
  double binom = 1.0;
  for (int k = 0; k <= n; ++k) {
    sum += binom * binom * std::pow(t - 1.0, n - k) * std::pow(t + 1.0, k);
    binom = binom * (n - k) / (k + 1);
  }
  return sum / std::pow(2.0, n);
}

inline double bohman(double t, double tau) {
  if (t >= tau) return 0.0;
  const double u = t / tau;
  const double pi = 3.14159265358979323846;
  return (1.0 - u) * std::cos(pi * u) + std::sin(pi * u) / pi;
}

// Every pair i < j with |x_ik - x_jk| < tau_k in all dimensions.
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs(const Eigen::MatrixXd& x, const Eigen::VectorXd& tau) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
      bool hit = true;
      for (Eigen::Index k = 0; k < x.cols() && hit; ++k) hit = std::abs(x(i, k) - x(j, k)) < tau(k);
      if (hit) out.emplace_back(i, j);
    }
  }
  return out;
}

// Dense GLS with the integrated likelihood written out term by term.
struct Gls {
  double logdet = 0.0;
  double quad_y = 0.0;  // Y' G^-1 Y
  Eigen::VectorXd beta;
  double rss = 0.0;
  double logdet_fgf = 0.0;
  double loglik = 0.0;
};

inline Gls gls(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& y, const Eigen::MatrixXd& f) {
  Gls g;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gamma);
  g.logdet = ldlt.vectorD().array().log().sum();
  const Eigen::MatrixXd ginv_f = ldlt.solve(f);
  const Eigen::VectorXd ginv_y = ldlt.solve(y);
  g.quad_y = y.dot(ginv_y);
  const Eigen::MatrixXd fgf = f.transpose() * ginv_f;
  g.beta = fgf.ldlt().solve(f.transpose() * ginv_y);
  const Eigen::VectorXd r = y - f * g.beta;
  g.rss = r.dot(ldlt.solve(r));
  g.logdet_fgf = std::log(fgf.determinant());
  const double n = static_cast<double>(y.size());
  const double q = static_cast<double>(f.cols());
  g.loglik = -0.5 * g.logdet - 0.5 * g.logdet_fgf - 0.5 * (n - q) * std::log(g.rss);
  return g;
}

// log of the integral of N(y; F beta, sigma2 G) / sigma2 over beta and sigma2,
// by trapezoidal quadrature. The grid is laid out around the GLS solution with
// beta = centre + sigma * L z and s = log sigma2; the integrand itself is the
// full Gaussian likelihood evaluated directly.
inline double log_marginal_by_quadrature(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& y,
                                         const Eigen::MatrixXd& f, int z_points = 101, int s_points = 1601) {
  const Eigen::Index n = y.size();
  const Eigen::Index q = f.cols();
  const Eigen::MatrixXd ginv = gamma.inverse();
  const double log_det_g = std::log(gamma.determinant());
  const Eigen::MatrixXd fgf = f.transpose() * ginv * f;
  const Eigen::VectorXd centre = fgf.ldlt().solve(f.transpose() * ginv * y);
  const Eigen::MatrixXd root = Eigen::LLT<Eigen::MatrixXd>(fgf.inverse()).matrixL();
  const Eigen::VectorXd r0 = y - f * centre;
  const double rss = r0.dot(ginv * r0);
  const double s_mid = std::log(rss / static_cast<double>(n - q));
  const double z_lim = 10.0;
  const double s_lim = 15.0;
  const double hz = 2.0 * z_lim / (z_points - 1);
  const double hs = 2.0 * s_lim / (s_points - 1);
  const double log_2pi = std::log(2.0 * 3.14159265358979323846);

  // Quadratic form of the residual r0 - sigma F L z, expanded in sigma.
  const Eigen::MatrixXd fl = f * root;
  const Eigen::MatrixXd cross = fl.transpose() * ginv * r0;   // q x 1
  const Eigen::MatrixXd curv = fl.transpose() * ginv * fl;    // q x q
  std::vector<double> lin;
  std::vector<double> quad;
  Eigen::VectorXd z(q);
  std::vector<int> idx(static_cast<std::size_t>(q), 0);
  while (true) {
    for (Eigen::Index k = 0; k < q; ++k) z(k) = -z_lim + hz * idx[static_cast<std::size_t>(k)];
    lin.push_back(-2.0 * z.dot(cross.col(0)));
    quad.push_back(z.dot(curv * z));
    std::size_t k = 0;
    while (k < idx.size() && idx[k] == z_points - 1) idx[k++] = 0;
    if (k == idx.size()) break;
    ++idx[k];
  }
  const double log_jac_root = root.diagonal().array().log().sum();

  double top = -1e300;
  double acc = 0.0;
  for (int is = 0; is < s_points; ++is) {
    const double s = s_mid - s_lim + hs * is;
    const double sigma = std::exp(0.5 * s);
    const double w_s = (is == 0 || is == s_points - 1) ? 0.5 : 1.0;
    const double base = -0.5 * static_cast<double>(n) * (log_2pi + s) - 0.5 * log_det_g +
                        static_cast<double>(q) * 0.5 * s + log_jac_root + std::log(w_s);
    for (std::size_t j = 0; j < lin.size(); ++j) {
      const double form = rss + sigma * lin[j] + sigma * sigma * quad[j];
      const double v = base - 0.5 * form / std::exp(s);
      if (v > top) {
        acc = acc * std::exp(top - v) + 1.0;
        top = v;
      } else {
        acc += std::exp(v - top);
      }
    }
  }
  return top + std::log(acc) + std::log(hs) + static_cast<double>(q) * std::log(hz);
}

inline double relative(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline Eigen::MatrixXd random_spd(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = z(rng);
  return a * a.transpose() + static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::MatrixXd uniform_points(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) x(i, k) = u(rng);
  return x;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("spem_test_" + name + "_" +
                    std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle

#endif  // SPEM_TESTS_ORACLES_HPP
