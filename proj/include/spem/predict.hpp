#ifndef SPEM_PREDICT_HPP
#define SPEM_PREDICT_HPP

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "spem/inference.hpp"
#include "spem/sparsecov.hpp"

namespace spem {

/// Pointwise conditional mean and variance of Y(x0) given Y and one value of
/// the correlation parameters.
struct ConditionalMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

struct PredictiveSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double level = 0.95;
};

struct PredictOptions {
  Index block_size = 4096;
  int threads = 1;
};

/// Universal-kriging predictor for one factorized correlation matrix:
///   m = f0 beta + g' Gamma^{-1} (Y - F beta)
///   v = (n-q)/(n-q-2) s^2 [1 - g' Gamma^{-1} g + u' (F'Gamma^{-1}F)^{-1} u],
///   u = f0 - F' Gamma^{-1} g,  s^2 = RSS / (n - q).
class ConditionalPredictor {
 public:
  ConditionalPredictor(std::shared_ptr<const CorrelationFactor> factor, const Eigen::VectorXd& y,
                       const Eigen::MatrixXd& f);

  [[nodiscard]] ConditionalMoments predict(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& f0,
                                           const PredictOptions& options = {}) const;
  [[nodiscard]] const Eigen::VectorXd& beta() const noexcept { return beta_; }
  [[nodiscard]] double sigma2() const noexcept { return sigma2_; }
  [[nodiscard]] Index dof() const noexcept { return n_ - q_; }

 private:
  std::shared_ptr<const CorrelationFactor> factor_;
  Index n_ = 0;
  Index q_ = 0;
  Eigen::MatrixXd wf_;  // whitened regressors
  Eigen::VectorXd resid_;  // whitened residual
  Eigen::VectorXd beta_;
  Eigen::MatrixXd r_;  // triangular factor of the column-pivoted QR of wf_
  Eigen::VectorXi pivots_;
  double sigma2_ = 0.0;
  double variance_factor_ = 0.0;
};

/// Conditional moments at parameter value `theta`.
ConditionalMoments conditional_moments(const Eigen::VectorXd& theta, const RegressionData& data,
                                       const ProductCorrelationModel& base, const Eigen::MatrixXd& x0,
                                       const Eigen::MatrixXd& f0, const FactorOptions& factor_options = {},
                                       const PredictOptions& options = {});

/// Moments for each listed chain iteration. Consecutive repeated states share
/// one computation.
std::vector<ConditionalMoments> moments_for_draws(const Chain& chain, const std::vector<std::size_t>& draws,
                                                  const RegressionData& data, const ProductCorrelationModel& base,
                                                  const Eigen::MatrixXd& x0, const Eigen::MatrixXd& f0,
                                                  const FactorOptions& factor_options = {},
                                                  const PredictOptions& options = {});

/// Mean of the conditional means; mean conditional variance plus the
/// population (divisor K) variance of the conditional means. Bounds are the
/// Gaussian interval at `level`.
PredictiveSummary aggregate_predictions(const std::vector<ConditionalMoments>& moments, double level = 0.95);

struct Interval {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// mean -/+ z_{(1+level)/2} sqrt(variance).
Interval credible_interval(const PredictiveSummary& summary, double level);

/// Equal-tailed quantiles of the equally weighted mixture of Student-t
/// conditionals with `dof` degrees of freedom.
Interval mixture_credible_interval(const std::vector<ConditionalMoments>& moments, double dof, double level);

}  // namespace spem

#endif  // SPEM_PREDICT_HPP
