#include "spem/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "spem/csv.hpp"
#include "spem/error.hpp"

namespace spem {

SimplexPrior::SimplexPrior(double c, Index dims) : cutoff(c), d(dims) {
  if (!(c > 0.0)) throw Error(ErrorKind::Config, "simplex cutoff C must be positive");
  if (dims < 1) throw Error(ErrorKind::Config, "simplex prior dimension must be >= 1");
}

bool SimplexPrior::contains(const Eigen::VectorXd& tau) const {
  if (tau.size() != d) return false;
  for (Index k = 0; k < d; ++k)
    if (!(tau(k) > 0.0)) return false;
  return tau.sum() <= cutoff;
}

bool prior_contains(const RangeVector& tau, const SimplexPrior& prior) { return prior.contains(tau.values()); }
bool prior_contains(const Eigen::VectorXd& tau, const SimplexPrior& prior) { return prior.contains(tau); }

BoxPrior::BoxPrior(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size() || lower.size() < 1) throw Error(ErrorKind::Config, "box prior bounds must match");
  if (((upper - lower).array() <= 0.0).any()) throw Error(ErrorKind::Config, "box prior needs upper > lower");
}

BoxPrior BoxPrior::cube(double bound, Index d) {
  if (!(bound > 0.0)) throw Error(ErrorKind::Config, "cube bound must be positive");
  return BoxPrior(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Constant(d, bound));
}

bool BoxPrior::contains(const Eigen::VectorXd& theta) const {
  if (theta.size() != lower.size()) return false;
  for (Index k = 0; k < theta.size(); ++k) {
    if (!(theta(k) > 0.0 && theta(k) >= lower(k) && theta(k) <= upper(k))) return false;
  }
  return true;
}

bool prior_contains(const Eigen::VectorXd& theta, const ParameterPrior& prior) {
  return std::visit([&](const auto& p) { return p.contains(theta); }, prior);
}

RegressionData::RegressionData(DesignMatrix design, Eigen::VectorXd response, Eigen::MatrixXd regressors)
    : x(std::move(design)), y(std::move(response)), f(std::move(regressors)) {
  if (y.size() != x.n() || f.rows() != x.n()) {
    throw Error(ErrorKind::Domain, "design, response and regression matrix must have the same number of rows");
  }
}

// ---------------------------------------------------------------------------

LikelihoodTerms likelihood_terms(const CorrelationFactor& factor, const Eigen::VectorXd& y, const Eigen::MatrixXd& f) {
  const Index n = factor.n();
  const Index q = f.cols();
  if (y.size() != n || f.rows() != n) throw Error(ErrorKind::Domain, "likelihood inputs have mismatched sizes");
  if (n <= q + 2) {
    throw Error(ErrorKind::Config, "need n > q + 2 (n=" + std::to_string(n) + ", q=" + std::to_string(q) + ")");
  }
  Eigen::MatrixXd rhs(n, q + 1);
  rhs.leftCols(q) = f;
  rhs.col(q) = y;
  const Eigen::MatrixXd w = factor.whiten(rhs);
  const auto wf = w.leftCols(q);
  const Eigen::VectorXd wy = w.col(q);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wf);
  if (qr.rank() < q) throw RankDeficient("F' Gamma^-1 F is rank deficient (rank " + std::to_string(qr.rank()) + " < q=" + std::to_string(q) + ")");

  LikelihoodTerms t;
  t.n = n;
  t.q = q;
  t.log_det_gamma = factor.logdet();
  t.beta = qr.solve(wy);
  t.rss = (wy - wf * t.beta).squaredNorm();
  if (!(t.rss > 0.0)) throw Error(ErrorKind::Numerical, "residual sum of squares is zero; response lies in the regression span");
  t.log_det_fgf = 2.0 * qr.matrixR().topLeftCorner(q, q).diagonal().array().abs().log().sum();
  t.sigma2 = t.rss / static_cast<double>(n - q);
  t.loglik = -0.5 * t.log_det_gamma - 0.5 * t.log_det_fgf - 0.5 * static_cast<double>(n - q) * std::log(t.rss);
  return t;
}

ProductCorrelationModel model_for(const ProductCorrelationModel& base, const Eigen::VectorXd& theta) {
  if (theta.size() != base.d()) throw Error(ErrorKind::Domain, "parameter vector length does not match the model");
  bool any_compact = false;
  bool any_powexp = false;
  for (const auto& fam : base.families()) (fam.compact_support() ? any_compact : any_powexp) = true;
  if (any_compact && any_powexp) {
    throw Error(ErrorKind::Config, "sampling mixed compact and power-exponential dimensions is not supported");
  }
  if (any_powexp) return base.with_phi(theta);
  return base.with_ranges(RangeVector(theta));
}

std::pair<double, LikelihoodTerms> integrated_loglik(const Eigen::VectorXd& theta, const RegressionData& data,
                                                     const ProductCorrelationModel& base, const FactorOptions& options,
                                                     SparseCholeskySolver* solver) {
  const auto model = model_for(base, theta);
  const auto factor = factorize_correlation(data.x, model, options, solver);
  auto terms = likelihood_terms(*factor, data.y, data.f);
  return {terms.loglik, std::move(terms)};
}

Eigen::VectorXd isotropic_pilot(const RegressionData& data, const ProductCorrelationModel& base, double lower,
                                double upper, int grid, const FactorOptions& options) {
  if (!(lower > 0.0 && upper > lower) || grid < 1) throw Error(ErrorKind::Config, "invalid pilot grid");
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd start;
  SparseCholeskySolver solver(options.ordering);
  for (int g = 0; g < grid; ++g) {
    const double v = lower * std::pow(upper / lower, (g + 0.5) / grid);
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(base.d(), v);
    try {
      const double ll = integrated_loglik(theta, data, base, options, &solver).first;
      if (ll > best) {
        best = ll;
        start = theta;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numerical) throw;
    }
  }
  if (start.size() == 0) throw Error(ErrorKind::Numerical, "no pilot value gave a finite likelihood");
  return start;
}

// ---------------------------------------------------------------------------

void MCMCConfig::validate() const {
  if (iterations < 1) throw Error(ErrorKind::Config, "MCMC iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) throw Error(ErrorKind::Config, "burn-in must satisfy 0 <= burn-in < iterations");
  if (stride < 1) throw Error(ErrorKind::Config, "thinning stride must be >= 1");
  if (lap.block_length < 1) throw Error(ErrorKind::Config, "adaptation block length must be >= 1");
  if (!(lap.decay > 0.5 && lap.decay <= 1.0)) {
    throw Error(ErrorKind::Config, "adaptation decay must lie in (0.5, 1] for vanishing adaptation");
  }
  if (!(lap.target_acceptance > 0.0 && lap.target_acceptance < 1.0)) {
    throw Error(ErrorKind::Config, "target acceptance must lie in (0, 1)");
  }
}

Eigen::VectorXd default_initial(const ParameterPrior& prior) {
  if (const auto* s = std::get_if<SimplexPrior>(&prior)) {
    return Eigen::VectorXd::Constant(s->d, s->cutoff / (2.0 * static_cast<double>(s->d)));
  }
  const auto& b = std::get<BoxPrior>(prior);
  return 0.5 * (b.lower + b.upper);
}

Eigen::MatrixXd default_proposal(const ParameterPrior& prior) {
  if (const auto* s = std::get_if<SimplexPrior>(&prior)) {
    const double sd = 0.1 * s->cutoff / static_cast<double>(s->d);
    return Eigen::MatrixXd::Identity(s->d, s->d) * sd * sd;
  }
  const auto& b = std::get<BoxPrior>(prior);
  const Eigen::VectorXd sd = 0.1 * (b.upper - b.lower);
  return sd.array().square().matrix().asDiagonal();
}

double Chain::acceptance_rate() const {
  if (accepted.empty()) return 0.0;
  return static_cast<double>(std::count(accepted.begin(), accepted.end(), 1)) / static_cast<double>(accepted.size());
}

std::vector<std::size_t> Chain::retained() const {
  std::vector<std::size_t> out;
  for (std::size_t i = static_cast<std::size_t>(burn_in); i < states.size(); ++i) out.push_back(i);
  return out;
}

std::vector<std::size_t> Chain::thinned() const {
  std::vector<std::size_t> out;
  for (std::size_t i = static_cast<std::size_t>(burn_in); i < states.size(); i += static_cast<std::size_t>(stride)) {
    out.push_back(i);
  }
  return out;
}

namespace {

Eigen::MatrixXd proposal_root(const Eigen::MatrixXd& cov) {
  Eigen::MatrixXd c = cov;
  const double scale = std::max(c.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  for (int attempt = 0; attempt < 30; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    c.diagonal().array() += scale * std::pow(10.0, attempt - 14);
  }
  throw Error(ErrorKind::Numerical, "proposal covariance is not positive definite");
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << '(';
  for (Index k = 0; k < v.size(); ++k) os << (k ? ", " : "") << csv::format_double(v(k));
  os << ')';
  return os.str();
}

}  // namespace

Chain run_adaptive_metropolis(const MCMCConfig& config, const LogTarget& target, const Support& support,
                              const ChainLog& log) {
  config.validate();
  const Index d = config.initial.size();
  if (d < 1) throw Error(ErrorKind::Config, "MCMC needs an initial state");
  if (config.initial_proposal.rows() != d || config.initial_proposal.cols() != d) {
    throw Error(ErrorKind::Config, "initial proposal covariance must be d x d");
  }
  Eigen::VectorXd theta = config.initial;
  if (!support(theta)) throw Error(ErrorKind::Config, "initial state " + format_vector(theta) + " lies outside the prior support");
  const auto initial_value = target(theta);
  if (!initial_value) throw Error(ErrorKind::Numerical, "target could not be evaluated at the initial state " + format_vector(theta));
  double current = *initial_value;

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Chain chain;
  chain.burn_in = config.burn_in;
  chain.stride = config.stride;
  const auto total = static_cast<std::size_t>(config.iterations);
  chain.states.reserve(total);
  chain.loglik.reserve(total);
  chain.accepted.reserve(total);

  Eigen::MatrixXd base = config.initial_proposal;
  double log_scale = 0.0;
  Eigen::MatrixXd root = proposal_root(base);
  chain.proposal_history.push_back(base);

  // Running mean and scatter of the chain (Welford).
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  std::size_t count = 0;
  std::size_t accepted_total = 0;
  int block_accepts = 0;
  int block_fill = 0;
  int block_index = 0;

  Eigen::VectorXd z(d);
  for (std::size_t it = 0; it < total; ++it) {
    for (Index k = 0; k < d; ++k) z(k) = normal(rng);
    const Eigen::VectorXd candidate = theta + root * z;
    bool accept = false;
    if (support(candidate)) {
      const auto value = target(candidate);
      if (value) {
        const double u = unif(rng);
        if (std::log(u) < *value - current) {
          accept = true;
          theta = candidate;
          current = *value;
        }
      } else {
        ++chain.numerical_rejections;
        if (log) log("iteration " + std::to_string(it + 1) + ": proposal " + format_vector(candidate) + " rejected (numerical failure)");
      }
    } else {
      ++chain.out_of_support;
    }
    chain.states.push_back(theta);
    chain.loglik.push_back(current);
    chain.accepted.push_back(accept ? 1 : 0);
    accepted_total += accept ? 1 : 0;

    ++count;
    const Eigen::VectorXd delta = theta - mean;
    mean += delta / static_cast<double>(count);
    scatter += delta * (theta - mean).transpose();

    block_accepts += accept ? 1 : 0;
    if (++block_fill == config.lap.block_length) {
      ++block_index;
      const double rate = static_cast<double>(block_accepts) / static_cast<double>(config.lap.block_length);
      chain.block_acceptance.push_back(rate);
      if (config.lap.adapt) {
        const double gamma = std::pow(static_cast<double>(block_index), -config.lap.decay);
        log_scale += gamma * (rate - config.lap.target_acceptance);
        // The empirical covariance is rank deficient until the chain has moved
        // at least d + 1 times; keep the previous shape until then.
        if (accepted_total >= static_cast<std::size_t>(d + 1) && count >= 2) {
          base = scatter / static_cast<double>(count - 1);
          base.diagonal().array() += 1e-10;
        }
        root = proposal_root(std::exp(log_scale) * base);
      }
      chain.block_log_scale.push_back(log_scale);
      if (it + 1 < total) chain.proposal_history.push_back(std::exp(log_scale) * base);
      block_accepts = 0;
      block_fill = 0;
    }
  }
  return chain;
}

Chain metropolis_run(const MCMCConfig& config, const RegressionData& data, const ProductCorrelationModel& base,
                     const ParameterPrior& prior, const FactorOptions& options, const ChainLog& log) {
  MCMCConfig cfg = config;
  if (cfg.initial.size() == 0) cfg.initial = default_initial(prior);
  if (cfg.initial_proposal.size() == 0) cfg.initial_proposal = default_proposal(prior);
  SparseCholeskySolver solver(options.ordering);
  LogTarget target = [&](const Eigen::VectorXd& theta) -> std::optional<double> {
    try {
      return integrated_loglik(theta, data, base, options, &solver).first;
    } catch (const NotPositiveDefinite& e) {
      if (log) log(std::string("non-positive-definite correlation at ") + format_vector(theta) + ": " + e.what());
      return std::nullopt;
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " [state: theta=" + format_vector(theta) + "]");
    }
  };
  Support support = [&](const Eigen::VectorXd& theta) { return prior_contains(theta, prior); };
  return run_adaptive_metropolis(cfg, target, support, log);
}

void write_chain_csv(const std::string& path, const Chain& chain, const std::string& parameter_prefix) {
  if (chain.states.empty()) throw Error(ErrorKind::Domain, "cannot write an empty chain");
  const Index d = chain.states.front().size();
  csv::Table t;
  t.columns.push_back("iter");
  for (Index k = 1; k <= d; ++k) t.columns.push_back(parameter_prefix + std::to_string(k));
  t.columns.push_back("loglik");
  t.columns.push_back("accepted");
  t.values.resize(static_cast<Index>(chain.size()), d + 3);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const auto r = static_cast<Index>(i);
    t.values(r, 0) = static_cast<double>(i + 1);
    t.values.row(r).segment(1, d) = chain.states[i].transpose();
    t.values(r, d + 1) = chain.loglik[i];
    t.values(r, d + 2) = chain.accepted[i];
  }
  csv::write_file(path, t);
}

Chain read_chain_csv(const std::string& path, int burn_in, int stride) {
  const auto t = csv::read_file(path);
  const Index cols = static_cast<Index>(t.columns.size());
  if (cols < 4 || t.columns.front() != "iter" || t.columns[static_cast<std::size_t>(cols - 2)] != "loglik" ||
      t.columns.back() != "accepted") {
    throw Error(ErrorKind::Schema, "chain CSV must have columns iter, parameters..., loglik, accepted");
  }
  const Index d = cols - 3;
  Chain chain;
  chain.burn_in = burn_in;
  chain.stride = stride;
  for (Index i = 0; i < t.values.rows(); ++i) {
    chain.states.emplace_back(t.values.row(i).segment(1, d).transpose());
    chain.loglik.push_back(t.values(i, d + 1));
    chain.accepted.push_back(t.values(i, d + 2) != 0.0 ? 1 : 0);
  }
  return chain;
}

// ---------------------------------------------------------------------------

namespace {

/// Pair counting with per-dimension sort orders computed once.
class PairCounter {
 public:
  explicit PairCounter(const Eigen::MatrixXd& points) : n_(points.rows()), d_(points.cols()) {
    rows_.resize(static_cast<std::size_t>(n_ * d_));
    for (Index i = 0; i < n_; ++i)
      for (Index k = 0; k < d_; ++k) rows_[static_cast<std::size_t>(i * d_ + k)] = points(i, k);
    orders_.resize(static_cast<std::size_t>(d_));
    for (Index k = 0; k < d_; ++k) {
      auto& o = orders_[static_cast<std::size_t>(k)];
      o.resize(static_cast<std::size_t>(n_));
      std::iota(o.begin(), o.end(), Index{0});
      std::stable_sort(o.begin(), o.end(), [&](Index a, Index b) { return points(a, k) < points(b, k); });
    }
  }

  [[nodiscard]] std::size_t count(const Eigen::VectorXd& tau) const {
    Index s = 0;
    tau.minCoeff(&s);
    const auto& order = orders_[static_cast<std::size_t>(s)];
    std::size_t total = 0;
    for (Index a = 0; a < n_; ++a) {
      const double* pi = rows_.data() + order[static_cast<std::size_t>(a)] * d_;
      for (Index b = a + 1; b < n_; ++b) {
        const double* pj = rows_.data() + order[static_cast<std::size_t>(b)] * d_;
        if (!(pj[s] - pi[s] < tau(s))) break;
        bool close = true;
        for (Index k = 0; k < d_ && close; ++k) close = std::abs(pi[k] - pj[k]) < tau(k);
        total += close ? 1 : 0;
      }
    }
    return total;
  }

  [[nodiscard]] double proportion(const Eigen::VectorXd& tau) const {
    const double pairs = 0.5 * static_cast<double>(n_) * static_cast<double>(n_ - 1);
    return pairs > 0 ? static_cast<double>(count(tau)) / pairs : 0.0;
  }

 private:
  Index n_;
  Index d_;
  std::vector<double> rows_;
  std::vector<std::vector<Index>> orders_;
};

std::vector<Eigen::VectorXd> face_directions(Index d, int restarts, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> dirs;
  dirs.push_back(Eigen::VectorXd::Constant(d, 1.0 / static_cast<double>(d)));
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  for (int r = 1; r < restarts; ++r) {
    Eigen::VectorXd w(d);
    for (Index k = 0; k < d; ++k) w(k) = expo(rng);
    dirs.push_back(w / w.sum());
  }
  return dirs;
}

std::pair<double, Eigen::VectorXd> max_on_face(const PairCounter& counter, Index d, double cutoff,
                                               const CalibrationOptions& options) {
  constexpr int kGrid = 12;
  constexpr int kMaxPasses = 6;
  double best = -1.0;
  Eigen::VectorXd best_tau;
  for (const auto& w : face_directions(d, std::max(options.restarts, 1), options.seed)) {
    Eigen::VectorXd tau = cutoff * w;
    double value = counter.proportion(tau);
    for (int pass = 0; pass < kMaxPasses && d > 1; ++pass) {
      bool improved = false;
      for (Index j = 0; j < d; ++j) {
        for (Index k = j + 1; k < d; ++k) {
          const double pool = tau(j) + tau(k);
          Eigen::VectorXd trial = tau;
          for (int g = 1; g < kGrid; ++g) {
            trial(j) = pool * g / kGrid;
            trial(k) = pool - trial(j);
            const double v = counter.proportion(trial);
            if (v > value) {
              value = v;
              tau = trial;
              improved = true;
            }
          }
        }
      }
      if (!improved) break;
    }
    if (value > best) {
      best = value;
      best_tau = tau;
    }
  }
  return {best, best_tau};
}

}  // namespace

std::pair<double, Eigen::VectorXd> max_sparsity_on_face(const Eigen::MatrixXd& points, double cutoff,
                                                        const CalibrationOptions& options) {
  const PairCounter counter(points);
  return max_on_face(counter, points.cols(), cutoff, options);
}

CalibrationReport calibrate_cutoff(const DesignMatrix& x, double target, const CalibrationOptions& options) {
  if (!(target > 0.0 && target <= 1.0)) throw Error(ErrorKind::Config, "sparsity target must lie in (0, 1]");
  CalibrationReport report;
  Eigen::MatrixXd points = x.points();
  if (x.n() > options.max_points) {
    std::vector<Index> idx(static_cast<std::size_t>(x.n()));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::mt19937_64 rng(options.seed ^ 0x9E3779B97F4A7C15ull);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(options.max_points));
    std::sort(idx.begin(), idx.end());
    points = x.subset(idx).points();
    report.subsampled = true;
  }
  report.points_used = points.rows();
  const Index d = x.d();
  const PairCounter counter(points);

  const double upper = static_cast<double>(d);
  auto top = max_on_face(counter, d, upper, options);
  if (top.first <= target) {
    report.cutoff = upper;
    report.achieved = top.first;
    report.maximizer = top.second;
    return report;
  }
  auto low = max_on_face(counter, d, options.tolerance, options);
  if (low.first > target) {
    throw Error(ErrorKind::Config, "no positive cutoff reaches the sparsity target " + csv::format_double(target) +
                                       "; the smallest achievable worst-case proportion near C=" +
                                       csv::format_double(options.tolerance) + " is " + csv::format_double(low.first));
  }
  double lo = options.tolerance;
  double hi = upper;
  auto lo_result = low;
  while (hi - lo > options.tolerance) {
    const double mid = 0.5 * (lo + hi);
    auto r = max_on_face(counter, d, mid, options);
    if (r.first <= target) {
      lo = mid;
      lo_result = std::move(r);
    } else {
      hi = mid;
    }
  }
  report.cutoff = lo;
  report.achieved = lo_result.first;
  report.maximizer = lo_result.second;
  return report;
}

}  // namespace spem
