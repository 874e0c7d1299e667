#include "spem/predict.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "spem/error.hpp"
#include "spem/parallel.hpp"

namespace spem {

ConditionalPredictor::ConditionalPredictor(std::shared_ptr<const CorrelationFactor> factor, const Eigen::VectorXd& y,
                                           const Eigen::MatrixXd& f)
    : factor_(std::move(factor)), n_(factor_->n()), q_(f.cols()) {
  if (n_ <= q_ + 2) {
    throw Error(ErrorKind::Config, "prediction needs n > q + 2 for a finite variance (n=" + std::to_string(n_) +
                                       ", q=" + std::to_string(q_) + ")");
  }
  if (y.size() != n_ || f.rows() != n_) throw Error(ErrorKind::Domain, "training sizes do not match the factorization");
  Eigen::MatrixXd rhs(n_, q_ + 1);
  rhs.leftCols(q_) = f;
  rhs.col(q_) = y;
  const Eigen::MatrixXd w = factor_->whiten(rhs);
  wf_ = w.leftCols(q_);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wf_);
  if (qr.rank() < q_) throw RankDeficient("F' Gamma^-1 F is rank deficient");
  beta_ = qr.solve(w.col(q_));
  resid_ = w.col(q_) - wf_ * beta_;
  r_ = qr.matrixR().topLeftCorner(q_, q_).triangularView<Eigen::Upper>();
  pivots_ = qr.colsPermutation().indices();
  sigma2_ = resid_.squaredNorm() / static_cast<double>(n_ - q_);
  variance_factor_ = static_cast<double>(n_ - q_) / static_cast<double>(n_ - q_ - 2) * sigma2_;
}

ConditionalMoments ConditionalPredictor::predict(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& f0,
                                                 const PredictOptions& options) const {
  const Index m = x0.rows();
  if (f0.rows() != m || f0.cols() != q_) throw Error(ErrorKind::Domain, "prediction regressors have the wrong shape");
  ConditionalMoments out{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  const Index block = std::max<Index>(1, options.block_size);
  for (Index start = 0; start < m; start += block) {
    const Index len = std::min(block, m - start);
    parallel_for(static_cast<long>(len), options.threads, [&](long t) {
      const Index i = start + static_cast<Index>(t);
      thread_local std::vector<Index> pattern;
      thread_local std::vector<double> values;
      factor_->whiten_cross(x0.row(i), pattern, values);
      Eigen::VectorXd u = f0.row(i).transpose();
      double cross = 0.0;
      double self = 0.0;
      for (std::size_t p = 0; p < pattern.size(); ++p) {
        const Index r = pattern[p];
        const double w = values[p];
        cross += w * resid_(r);
        self += w * w;
        u.noalias() -= w * wf_.row(r).transpose();
      }
      Eigen::VectorXd up(q_);
      for (Index k = 0; k < q_; ++k) up(k) = u(pivots_(k));
      const Eigen::VectorXd z = r_.transpose().triangularView<Eigen::Lower>().solve(up);
      out.mean(i) = f0.row(i).dot(beta_) + cross;
      const double v = 1.0 - self + z.squaredNorm();
      out.variance(i) = variance_factor_ * std::max(v, 0.0);
    });
  }
  return out;
}

ConditionalMoments conditional_moments(const Eigen::VectorXd& theta, const RegressionData& data,
                                       const ProductCorrelationModel& base, const Eigen::MatrixXd& x0,
                                       const Eigen::MatrixXd& f0, const FactorOptions& factor_options,
                                       const PredictOptions& options) {
  std::shared_ptr<const CorrelationFactor> factor =
      factorize_correlation(data.x, model_for(base, theta), factor_options);
  const ConditionalPredictor predictor(factor, data.y, data.f);
  return predictor.predict(x0, f0, options);
}

std::vector<ConditionalMoments> moments_for_draws(const Chain& chain, const std::vector<std::size_t>& draws,
                                                  const RegressionData& data, const ProductCorrelationModel& base,
                                                  const Eigen::MatrixXd& x0, const Eigen::MatrixXd& f0,
                                                  const FactorOptions& factor_options, const PredictOptions& options) {
  std::vector<ConditionalMoments> out;
  out.reserve(draws.size());
  SparseCholeskySolver solver(factor_options.ordering);
  const Eigen::VectorXd* previous = nullptr;
  for (std::size_t idx : draws) {
    if (idx >= chain.size()) throw Error(ErrorKind::Domain, "draw index beyond the chain length");
    const Eigen::VectorXd& theta = chain.states[idx];
    if (previous && *previous == theta) {
      out.push_back(out.back());
      continue;
    }
    std::shared_ptr<const CorrelationFactor> factor =
        factorize_correlation(data.x, model_for(base, theta), factor_options, &solver);
    const ConditionalPredictor predictor(factor, data.y, data.f);
    out.push_back(predictor.predict(x0, f0, options));
    previous = &theta;
  }
  return out;
}

Interval credible_interval(const PredictiveSummary& summary, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::Config, "credible level must lie in (0, 1)");
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 * (1.0 + level));
  const Eigen::VectorXd half = z * summary.variance.array().max(0.0).sqrt().matrix();
  return {summary.mean - half, summary.mean + half};
}

PredictiveSummary aggregate_predictions(const std::vector<ConditionalMoments>& moments, double level) {
  if (moments.empty()) throw Error(ErrorKind::Domain, "no conditional moments to aggregate");
  const Index m = moments.front().mean.size();
  for (const auto& mo : moments) {
    if (mo.mean.size() != m || mo.variance.size() != m) {
      throw Error(ErrorKind::Domain, "conditional moment vectors have different lengths");
    }
  }
  const auto k = static_cast<double>(moments.size());
  PredictiveSummary s;
  s.level = level;
  s.mean = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd within = Eigen::VectorXd::Zero(m);
  for (const auto& mo : moments) {
    s.mean += mo.mean;
    within += mo.variance;
  }
  s.mean /= k;
  within /= k;
  Eigen::VectorXd between = Eigen::VectorXd::Zero(m);
  for (const auto& mo : moments) between += (mo.mean - s.mean).array().square().matrix();
  between /= k;
  s.variance = within + between;
  auto bounds = credible_interval(s, level);
  s.lower = std::move(bounds.lower);
  s.upper = std::move(bounds.upper);
  return s;
}

Interval mixture_credible_interval(const std::vector<ConditionalMoments>& moments, double dof, double level) {
  if (moments.empty()) throw Error(ErrorKind::Domain, "no conditional moments to aggregate");
  if (!(dof > 2.0)) throw Error(ErrorKind::Config, "mixture intervals need more than 2 degrees of freedom");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::Config, "credible level must lie in (0, 1)");
  const boost::math::students_t_distribution<double> t(dof);
  const double scale_factor = std::sqrt((dof - 2.0) / dof);
  const Index m = moments.front().mean.size();
  const auto k = static_cast<double>(moments.size());
  Interval out{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  for (Index i = 0; i < m; ++i) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double max_scale = 0.0;
    for (const auto& mo : moments) {
      lo = std::min(lo, mo.mean(i));
      hi = std::max(hi, mo.mean(i));
      max_scale = std::max(max_scale, std::sqrt(std::max(mo.variance(i), 0.0)) * scale_factor);
    }
    if (max_scale == 0.0) {
      out.lower(i) = lo;
      out.upper(i) = hi;
      continue;
    }
    auto cdf = [&](double x) {
      double acc = 0.0;
      for (const auto& mo : moments) {
        const double s = std::sqrt(std::max(mo.variance(i), 0.0)) * scale_factor;
        if (s == 0.0) {
          acc += x >= mo.mean(i) ? 1.0 : 0.0;
        } else {
          acc += boost::math::cdf(t, (x - mo.mean(i)) / s);
        }
      }
      return acc / k;
    };
    auto solve = [&](double p) {
      double a = lo - 1e3 * max_scale;
      double b = hi + 1e3 * max_scale;
      for (int it = 0; it < 200 && b - a > 1e-12 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        const double c = 0.5 * (a + b);
        (cdf(c) < p ? a : b) = c;
      }
      return 0.5 * (a + b);
    };
    out.lower(i) = solve(0.5 * (1.0 - level));
    out.upper(i) = solve(0.5 * (1.0 + level));
  }
  return out;
}

}  // namespace spem
