#include "spem/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <cstdio>
#include <tuple>
#include <random>
#include <sstream>

#include "spem/basis.hpp"
#include "spem/correlation.hpp"
#include "spem/csv.hpp"
#include "spem/design.hpp"
#include "spem/error.hpp"
#include "spem/sparsecov.hpp"

namespace spem {

double nse(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual) {
  if (pred.size() != actual.size()) throw Error(ErrorKind::Domain, "nse: vectors differ in length");
  if (actual.size() < 2) throw Error(ErrorKind::Domain, "nse: need at least two points");
  const double mean = actual.mean();
  const double denom = (actual.array() - mean).square().sum();
  if (!(denom > 0.0)) throw Error(ErrorKind::Domain, "nse: actual values are constant");
  return 1.0 - (pred - actual).squaredNorm() / denom;
}

double empirical_coverage(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, const Eigen::VectorXd& actual) {
  if (lower.size() != actual.size() || upper.size() != actual.size()) {
    throw Error(ErrorKind::Domain, "coverage: vectors differ in length");
  }
  if (actual.size() == 0) return 0.0;
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < actual.size(); ++i) {
    if (lower(i) > upper(i)) throw Error(ErrorKind::Domain, "coverage: lower bound above upper bound");
    if (lower(i) <= actual(i) && actual(i) <= upper(i)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(actual.size());
}

std::vector<double> TimingReport::times(const std::string& path, const std::string& step, Eigen::Index n,
                                        double sparsity) const {
  std::vector<double> out;
  for (const auto& s : samples) {
    if (s.path == path && s.step == step && s.n == n && std::abs(s.sparsity - sparsity) < 1e-12) {
      out.push_back(s.seconds);
    }
  }
  return out;
}

double TimingReport::median(const std::string& path, const std::string& step, Eigen::Index n, double sparsity) const {
  auto t = times(path, step, n, sparsity);
  if (t.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(t.begin(), t.end());
  const std::size_t h = t.size() / 2;
  return t.size() % 2 == 1 ? t[h] : 0.5 * (t[h - 1] + t[h]);
}

double TimingReport::mean(const std::string& path, const std::string& step, Eigen::Index n, double sparsity) const {
  const auto t = times(path, step, n, sparsity);
  if (t.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
}

double isotropic_range_for_sparsity(const Eigen::MatrixXd& points, double target) {
  if (!(target > 0.0 && target < 1.0)) throw Error(ErrorKind::Config, "sparsity target must lie in (0, 1)");
  const auto n = static_cast<double>(points.rows());
  const double pairs = n * (n - 1.0) / 2.0;
  auto proportion = [&](double tau) {
    const Eigen::VectorXd t = Eigen::VectorXd::Constant(points.cols(), tau);
    return static_cast<double>(count_interacting_pairs(points, t)) / pairs;
  };
  double lo = 0.0;
  double hi = 1.0;
  double best = hi;
  double best_err = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double p = proportion(mid);
    const double err = std::abs(p / target - 1.0);
    if (err < best_err) {
      best = mid;
      best_err = err;
    }
    if (err <= 0.02) break;
    (p < target ? lo : hi) = mid;
  }
  if (best_err > 0.1) {
    throw Error(ErrorKind::Numerical, "could not reach the sparsity target within 10%");
  }
  return best;
}

namespace {

using Clock = std::chrono::steady_clock;

template <class Fn>
double time_it(Fn&& fn) {
  const auto start = Clock::now();
  fn();
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

TimingReport timing_benchmark(const BenchmarkOptions& options) {
  if (options.n_grid.empty() || options.sparsity_grid.empty()) {
    throw Error(ErrorKind::Config, "benchmark grids must be nonempty");
  }
  if (options.repeats < 1) throw Error(ErrorKind::Config, "benchmark repeats must be at least 1");
  TimingReport report;
  report.repeats = options.repeats;
  const auto d = static_cast<int>(options.d);
  const BasisSpec basis(4, std::min(2, d), d);
  for (std::size_t gi = 0; gi < options.n_grid.size(); ++gi) {
    const Eigen::Index n = options.n_grid[gi];
    const DesignMatrix x = uniform_design(n, options.d, options.seed + gi);
    const Eigen::MatrixXd f = build_basis_matrix(x, basis);
    std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(n));
    std::normal_distribution<double> normal;
    Eigen::MatrixXd rhs(n, f.cols() + 1);
    rhs.leftCols(f.cols()) = f;
    for (Eigen::Index i = 0; i < n; ++i) rhs(i, f.cols()) = normal(rng);

    for (double target : options.sparsity_grid) {
      const double tau = isotropic_range_for_sparsity(x.points(), target);
      const RangeVector ranges(Eigen::VectorXd::Constant(options.d, tau));
      const auto model = ProductCorrelationModel::broadcast(CorrelationFamily::bohman(), ranges);
      TimingCell cell{n, target, tau, 0, 0.0};
      for (int r = 0; r < options.repeats; ++r) {
        NeighborPairs pairs;
        SparseSymMatrix mat;
        std::optional<CholeskyFactor> factor;
        Eigen::MatrixXd w;
        const double t0 = time_it([&] { pairs = find_interacting_pairs(x, ranges); });
        const double t1 = time_it([&] { mat = build_sparse_correlation(x, model, pairs); });
        const double t2 = time_it([&] { factor.emplace(sparse_cholesky(mat)); });
        const double t3 = time_it([&] { w = factor->solve_transposed(rhs); });
        const double secs[4] = {t0, t1, t2, t3};
        for (int s = 0; s < 4; ++s) report.samples.push_back({"sparse", timing_steps()[s], n, target, r, secs[s]});
        cell.off_diagonal_pairs = mat.off_diagonal_nnz();
        cell.achieved = sparsity(mat);
      }
      report.cells.push_back(cell);
    }

    if (!options.run_dense) continue;
    if (n > options.dense_cap) {
      report.notices.push_back("dense baseline skipped at n=" + std::to_string(n) + " (above cap " +
                               std::to_string(options.dense_cap) + ")");
      continue;
    }
    const double phi = effective_range_to_phi(0.5, 1.0);
    const auto dense_model = ProductCorrelationModel::broadcast(
        CorrelationFamily::power_exponential(1.0, phi), RangeVector(Eigen::VectorXd::Ones(options.d)));
    for (int r = 0; r < options.repeats; ++r) {
      Eigen::MatrixXd gamma;
      Eigen::LLT<Eigen::MatrixXd> llt;
      Eigen::MatrixXd w;
      const double t1 = time_it([&] {
        gamma = dense_correlation(x.points(), dense_model);
        gamma.diagonal().array() += 1e-8;
      });
      const double t2 = time_it([&] { llt.compute(gamma); });
      if (llt.info() != Eigen::Success) {
        report.notices.push_back("dense baseline not positive definite at n=" + std::to_string(n));
        break;
      }
      const double t3 = time_it([&] { w = llt.matrixL().solve(rhs); });
      report.samples.push_back({"dense", timing_steps()[1], n, 1.0, r, t1});
      report.samples.push_back({"dense", timing_steps()[2], n, 1.0, r, t2});
      report.samples.push_back({"dense", timing_steps()[3], n, 1.0, r, t3});
    }
  }
  return report;
}

void write_timing_csv(const std::filesystem::path& path, const TimingReport& report) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Schema, "cannot write " + path.string());
  out << "path,step,n,sparsity,repeat,seconds\n";
  for (const auto& s : report.samples) {
    out << s.path << ',' << s.step << ',' << s.n << ',' << csv::format_double(s.sparsity) << ',' << s.repeat << ','
        << csv::format_double(s.seconds) << '\n';
  }
}

std::vector<TimingSample> read_timing_csv(const std::filesystem::path& path) {
  const csv::TextTable t = csv::read_text_file(path);
  if (t.columns != std::vector<std::string>{"path", "step", "n", "sparsity", "repeat", "seconds"}) {
    throw Error(ErrorKind::Schema, "timing CSV must have columns path,step,n,sparsity,repeat,seconds");
  }
  std::vector<TimingSample> out;
  for (const auto& row : t.rows) {
    TimingSample s;
    s.path = row[0];
    s.step = row[1];
    s.n = static_cast<Eigen::Index>(csv::parse_number(row[2]));
    s.sparsity = csv::parse_number(row[3]);
    s.repeat = static_cast<int>(csv::parse_number(row[4]));
    s.seconds = csv::parse_number(row[5]);
    out.push_back(std::move(s));
  }
  return out;
}

std::string timing_summary(const TimingReport& report) {
  std::ostringstream os;
  os << "path    step                 n      sparsity  median_s     mean_s\n";
  std::vector<std::tuple<std::string, std::string, Eigen::Index, double>> keys;
  for (const auto& s : report.samples) {
    auto key = std::make_tuple(s.path, s.step, s.n, s.sparsity);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  char line[160];
  for (const auto& [path, step, n, sp] : keys) {
    std::snprintf(line, sizeof line, "%-7s %-20s %-6ld %-9.4f %-12.6f %-12.6f\n", path.c_str(), step.c_str(),
                  static_cast<long>(n), sp, report.median(path, step, n, sp), report.mean(path, step, n, sp));
    os << line;
  }
  for (const auto& c : report.cells) {
    std::snprintf(line, sizeof line, "n=%ld target=%.4f tau=%.5f pairs=%zu achieved=%.5f\n", static_cast<long>(c.n),
                  c.target, c.range, c.off_diagonal_pairs, c.achieved);
    os << line;
  }
  for (const auto& msg : report.notices) os << "notice: " << msg << '\n';
  return os.str();
}

}  // namespace spem
