#ifndef SPEM_EVAL_HPP
#define SPEM_EVAL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spem {

/// Nash-Sutcliffe efficiency 1 - sum (pred - actual)^2 / sum (actual - mean)^2.
double nse(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual);

/// Fraction of points with lower <= actual <= upper.
double empirical_coverage(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, const Eigen::VectorXd& actual);

struct TimingSample {
  std::string path;  // "sparse" or "dense"
  std::string step;
  Eigen::Index n = 0;
  double sparsity = 0.0;
  int repeat = 0;
  double seconds = 0.0;
};

/// Structure found for one (n, sparsity) cell.
struct TimingCell {
  Eigen::Index n = 0;
  double target = 0.0;
  double range = 0.0;  // isotropic tau
  std::size_t off_diagonal_pairs = 0;
  double achieved = 0.0;
};

struct TimingReport {
  std::vector<TimingSample> samples;
  std::vector<TimingCell> cells;
  std::vector<std::string> notices;
  int repeats = 1;

  [[nodiscard]] std::vector<double> times(const std::string& path, const std::string& step, Eigen::Index n,
                                          double sparsity) const;
  /// NaN when no matching samples exist.
  [[nodiscard]] double median(const std::string& path, const std::string& step, Eigen::Index n, double sparsity) const;
  [[nodiscard]] double mean(const std::string& path, const std::string& step, Eigen::Index n, double sparsity) const;
};

struct BenchmarkOptions {
  std::vector<Eigen::Index> n_grid{1000, 2000, 4000};
  std::vector<double> sparsity_grid{0.02, 0.05};
  Eigen::Index d = 4;
  int repeats = 3;
  std::uint64_t seed = 1;
  Eigen::Index dense_cap = 8000;
  bool run_dense = true;
};

/// Step names in execution order.
inline const std::vector<std::string>& timing_steps() {
  static const std::vector<std::string> steps{"checking distances", "building matrix", "cholesky", "backsolve"};
  return steps;
}

/// Isotropic range whose interacting-pair proportion is within 10% of `target`.
double isotropic_range_for_sparsity(const Eigen::MatrixXd& points, double target);

/// Per-step wall-clock timing of the sparse path (Bohman, isotropic range) and
/// the dense power-exponential path on uniform designs. Dense runs sit at
/// sparsity 1 in the report.
TimingReport timing_benchmark(const BenchmarkOptions& options);

void write_timing_csv(const std::filesystem::path& path, const TimingReport& report);
std::vector<TimingSample> read_timing_csv(const std::filesystem::path& path);
std::string timing_summary(const TimingReport& report);

}  // namespace spem

#endif  // SPEM_EVAL_HPP
