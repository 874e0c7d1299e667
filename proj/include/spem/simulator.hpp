#ifndef SPEM_SIMULATOR_HPP
#define SPEM_SIMULATOR_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spem/basis.hpp"
#include "spem/correlation.hpp"
#include "spem/design.hpp"

namespace spem {

/// Gaussian process with covariance variance * R and mean either a constant
/// or a Legendre basis expansion with coefficients `beta`.
struct GPSpec {
  ProductCorrelationModel correlation;
  double variance = 1.0;
  double mean_constant = 0.0;
  std::optional<BasisSpec> mean_basis;
  Eigen::VectorXd beta;
  double jitter = 0.0;  // added to the correlation diagonal

  /// Power-exponential process with the same effective range and power in
  /// every dimension.
  static GPSpec power_exponential(Eigen::Index d, double alpha, double effective_range, double variance = 1.0);
};

Eigen::VectorXd gp_mean(const Eigen::MatrixXd& points, const GPSpec& spec);

/// Y = mean + L z with L the dense lower Cholesky factor of the covariance.
/// Throws Error(Numerical) naming the smallest eigenvalue if the covariance
/// is not positive definite.
Eigen::VectorXd sample_gp(const DesignMatrix& x, const GPSpec& spec, std::uint64_t seed);

/// Several realizations over the same design sharing one factorization
/// (one column per draw).
Eigen::MatrixXd sample_gp_many(const DesignMatrix& x, const GPSpec& spec, Eigen::Index draws, std::uint64_t seed);

struct SimStudyConfig {
  std::vector<int> dims{2, 4};
  std::vector<double> alphas{1.5, 1.99};
  std::vector<double> effective_ranges{0.5, 2.0};
  std::vector<Eigen::Index> n_grid{100, 150, 250, 400, 650};
  std::vector<double> sparsity_targets{0.02, 0.05};
  int replicates = 20;
  Eigen::Index n_eval = 512;
  std::uint64_t seed = 2011;
  double level = 0.95;

  int iterations = 1000;
  int burn_in = 200;
  int stride = 10;

  // Sparse model.
  double sparse_alpha = 1.5;  // truncated power
  int basis_degree = 5;
  int basis_interaction = 2;

  // Dense model: uniform prior on phi over effective ranges [range_low, range_high].
  double range_low = 0.05;
  double range_high = 5.0;
  bool run_dense = true;

  double generating_jitter = 0.0;
  int threads = 1;

  /// Throws Error(Config) for empty grids or nonpositive values.
  void validate() const;
};

struct SimRecord {
  std::string condition;
  std::string method;  // "dense" or "sparse_<target>"
  Eigen::Index n = 0;
  int replicate = 0;
  double nse = 0.0;
  double coverage = 0.0;
  double acceptance = 0.0;
  bool ok = true;
  std::string error;
};

struct SimSummaryRow {
  std::string condition;
  std::string method;
  Eigen::Index n = 0;
  int completed = 0;
  int failed = 0;
  double nse_mean = 0.0;
  double nse_se = 0.0;
  double coverage_mean = 0.0;
  double coverage_se = 0.0;
};

struct SimStudyResult {
  std::vector<SimRecord> records;
  std::vector<SimSummaryRow> summary;

  [[nodiscard]] const SimSummaryRow* find(const std::string& condition, const std::string& method,
                                          Eigen::Index n) const;
};

std::string condition_label(int d, double alpha, double effective_range);
std::string sparse_method_label(double target);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c);

using StudyLog = std::function<void(const std::string&)>;

/// One replicate at one sample size: fits every method and scores it.
std::vector<SimRecord> run_sim_replicate(const SimStudyConfig& config, int d, double alpha, double effective_range,
                                         Eigen::Index n, int replicate, const StudyLog& log = {});

SimStudyResult run_sim_study(const SimStudyConfig& config, const StudyLog& log = {});

std::vector<SimSummaryRow> summarize_records(const std::vector<SimRecord>& records);

/// One CSV per condition (`method,n,replicate,nse,coverage`), summary.csv and
/// failures.csv.
void write_sim_study(const std::filesystem::path& dir, const SimStudyResult& result);

}  // namespace spem

#endif  // SPEM_SIMULATOR_HPP
