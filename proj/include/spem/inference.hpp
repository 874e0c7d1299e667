#ifndef SPEM_INFERENCE_HPP
#define SPEM_INFERENCE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spem/correlation.hpp"
#include "spem/design.hpp"
#include "spem/sparsecov.hpp"

namespace spem {

/// Uniform prior on T_C = { tau : tau_k > 0, sum tau_k <= C }.
struct SimplexPrior {
  double cutoff = 1.0;
  Index d = 1;

  SimplexPrior() = default;
  SimplexPrior(double c, Index dims);
  [[nodiscard]] bool contains(const Eigen::VectorXd& tau) const;
};

bool prior_contains(const RangeVector& tau, const SimplexPrior& prior);
bool prior_contains(const Eigen::VectorXd& tau, const SimplexPrior& prior);

/// Uniform prior on a hyper-rectangle (closed), used for power-exponential
/// scales and as the cube restriction tau_k <= B for comparison.
struct BoxPrior {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  BoxPrior() = default;
  BoxPrior(Eigen::VectorXd lo, Eigen::VectorXd hi);
  /// The cube { 0 < tau_k <= bound }.
  static BoxPrior cube(double bound, Index d);
  [[nodiscard]] bool contains(const Eigen::VectorXd& theta) const;
};

using ParameterPrior = std::variant<SimplexPrior, BoxPrior>;
bool prior_contains(const Eigen::VectorXd& theta, const ParameterPrior& prior);

/// Response and regression design for one training set.
struct RegressionData {
  DesignMatrix x;
  Eigen::VectorXd y;
  Eigen::MatrixXd f;

  RegressionData() = default;
  RegressionData(DesignMatrix design, Eigen::VectorXd response, Eigen::MatrixXd regressors);
  [[nodiscard]] Index n() const noexcept { return x.n(); }
  [[nodiscard]] Index q() const noexcept { return f.cols(); }
};

/// GLS quantities at one correlation parameter value.
struct LikelihoodTerms {
  double log_det_gamma = 0.0;
  double log_det_fgf = 0.0;  // log |F' Gamma^{-1} F|
  double rss = 0.0;          // (Y - F beta)' Gamma^{-1} (Y - F beta)
  Eigen::VectorXd beta;
  double sigma2 = 0.0;  // rss / (n - q)
  Index n = 0;
  Index q = 0;
  double loglik = 0.0;
};

/// log L^I = -1/2 log|Gamma| - 1/2 log|F'Gamma^{-1}F| - (n-q)/2 log RSS, from
/// an existing factorization.
LikelihoodTerms likelihood_terms(const CorrelationFactor& factor, const Eigen::VectorXd& y, const Eigen::MatrixXd& f);

/// Model obtained by placing `theta` into `base`: ranges for compactly
/// supported families, phi for the power exponential.
ProductCorrelationModel model_for(const ProductCorrelationModel& base, const Eigen::VectorXd& theta);

/// Factorizes Gamma(theta) and evaluates the integrated log likelihood.
std::pair<double, LikelihoodTerms> integrated_loglik(const Eigen::VectorXd& theta, const RegressionData& data,
                                                     const ProductCorrelationModel& base,
                                                     const FactorOptions& options = {},
                                                     SparseCholeskySolver* solver = nullptr);

/// Isotropic value, on a log-spaced grid between `lower` and `upper`, with the
/// largest integrated likelihood. Grid points that fail numerically are skipped.
Eigen::VectorXd isotropic_pilot(const RegressionData& data, const ProductCorrelationModel& base, double lower,
                                double upper, int grid = 20, const FactorOptions& options = {});

/// Log-adaptive proposal settings.
struct LapSettings {
  bool adapt = true;
  double target_acceptance = 0.234;
  int block_length = 50;
  double decay = 0.6;  // gamma_k = k^-decay
};

struct MCMCConfig {
  int iterations = 3000;
  int burn_in = 500;
  int stride = 10;
  Eigen::VectorXd initial;         // empty: prior default
  Eigen::MatrixXd initial_proposal;  // empty: prior default
  LapSettings lap;
  std::uint64_t seed = 1;

  /// Throws Error(Config) if burn-in, stride or block settings are invalid.
  void validate() const;
};

/// Default starting point and proposal covariance for a prior:
/// tau = (C/(2d), ...), Sigma = (0.1 C/d)^2 I for the simplex; the box centre
/// and (0.1 width)^2 for a box.
Eigen::VectorXd default_initial(const ParameterPrior& prior);
Eigen::MatrixXd default_proposal(const ParameterPrior& prior);

struct Chain {
  std::vector<Eigen::VectorXd> states;  // one per iteration
  std::vector<double> loglik;
  std::vector<char> accepted;
  std::vector<double> block_acceptance;
  std::vector<double> block_log_scale;
  std::vector<Eigen::MatrixXd> proposal_history;  // proposal in force during each block
  std::size_t out_of_support = 0;
  std::size_t numerical_rejections = 0;
  int burn_in = 0;
  int stride = 1;

  [[nodiscard]] std::size_t size() const noexcept { return states.size(); }
  [[nodiscard]] double acceptance_rate() const;
  /// Indices of post-burn-in iterations.
  [[nodiscard]] std::vector<std::size_t> retained() const;
  /// Every `stride`-th retained iteration, starting with the first.
  [[nodiscard]] std::vector<std::size_t> thinned() const;
};

/// Log target evaluated inside the support; nullopt marks a numerical
/// failure, treated as a rejection.
using LogTarget = std::function<std::optional<double>(const Eigen::VectorXd&)>;
using Support = std::function<bool(const Eigen::VectorXd&)>;
using ChainLog = std::function<void(const std::string&)>;

/// Random-walk Metropolis with multivariate normal proposals. Proposals
/// outside the support are rejected without evaluating the target and count
/// as rejections. After each block the proposal becomes c_k times the
/// empirical covariance of the chain, with log c updated by
/// gamma_k (observed - target) acceptance.
Chain run_adaptive_metropolis(const MCMCConfig& config, const LogTarget& target, const Support& support,
                              const ChainLog& log = {});

/// Samples the correlation parameters of `base` under `prior` using the
/// integrated likelihood. Non-positive-definite proposals are rejected and logged.
Chain metropolis_run(const MCMCConfig& config, const RegressionData& data, const ProductCorrelationModel& base,
                     const ParameterPrior& prior, const FactorOptions& options = {}, const ChainLog& log = {});

void write_chain_csv(const std::string& path, const Chain& chain, const std::string& parameter_prefix = "tau_");
Chain read_chain_csv(const std::string& path, int burn_in, int stride);

struct CalibrationOptions {
  double tolerance = 1e-3;
  int restarts = 8;
  Index max_points = 2000;
  std::uint64_t seed = 20110101;
};

struct CalibrationReport {
  double cutoff = 0.0;
  double achieved = 0.0;  // worst-case nonzero proportion found at `cutoff`
  Eigen::VectorXd maximizer;
  Index points_used = 0;
  bool subsampled = false;
};

/// Heuristic worst-case structural nonzero proportion over the face
/// sum tau = C (coordinate ascent from several starts).
std::pair<double, Eigen::VectorXd> max_sparsity_on_face(const Eigen::MatrixXd& points, double cutoff,
                                                        const CalibrationOptions& options = {});

/// Largest C (to `tolerance`) whose worst-case nonzero proportion stays at or
/// below `target`.
CalibrationReport calibrate_cutoff(const DesignMatrix& x, double target, const CalibrationOptions& options = {});

}  // namespace spem

#endif  // SPEM_INFERENCE_HPP
