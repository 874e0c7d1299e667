#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "spem/basis.hpp"
#include "spem/design.hpp"
#include "spem/error.hpp"
#include "spem/inference.hpp"

using spem::BasisSpec;
using spem::CorrelationFamily;
using spem::DesignMatrix;
using spem::Index;
using spem::ProductCorrelationModel;
using spem::RangeVector;
using spem::RegressionData;
using spem::SimplexPrior;

namespace {

RegressionData smooth_data(Index n, Index d, std::uint64_t seed, const BasisSpec& basis) {
  const DesignMatrix x = spem::latin_hypercube(n, d, seed);
  Eigen::VectorXd y(n);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> z(0.0, 0.05);
  for (Index i = 0; i < n; ++i) {
    double v = 0.0;
    for (Index k = 0; k < d; ++k) v += std::sin(3.0 * x(i, k) + static_cast<double>(k));
    y(i) = v + z(rng);
  }
  return RegressionData(x, y, spem::build_basis_matrix(x, basis));
}

ProductCorrelationModel bohman_base(Index d) {
  return ProductCorrelationModel::broadcast(CorrelationFamily::bohman(), RangeVector(Eigen::VectorXd::Constant(d, 0.5)));
}

Eigen::VectorXd random_simplex_point(Index d, double c, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd w(d + 1);
  for (auto& v : w) v = e(rng);
  return c * w.head(d) / w.sum();
}

}  // namespace

TEST_CASE("simplex prior membership") {
  const SimplexPrior prior(1.0, 3);
  CHECK(spem::prior_contains(Eigen::Vector3d::Constant(1.0 / 3.0), prior));
  CHECK(spem::prior_contains(Eigen::Vector3d(0.5, 0.25, 0.25), prior));
  CHECK_FALSE(spem::prior_contains(Eigen::Vector3d(0.5, 0.0, 0.25), prior));
  CHECK_FALSE(spem::prior_contains(Eigen::Vector3d(0.5, 0.3, 0.25), prior));
  CHECK_FALSE(spem::prior_contains(Eigen::Vector3d(0.5, -0.1, 0.25), prior));
  CHECK_FALSE(spem::prior_contains(Eigen::Vector2d(0.1, 0.1), prior));
  CHECK(spem::prior_contains(RangeVector(Eigen::Vector3d(0.2, 0.2, 0.2)), prior));
}

TEST_CASE("box prior membership") {
  const auto cube = spem::BoxPrior::cube(0.5, 2);
  CHECK(cube.contains(Eigen::Vector2d(0.5, 0.1)));
  CHECK_FALSE(cube.contains(Eigen::Vector2d(0.0, 0.1)));
  CHECK_FALSE(cube.contains(Eigen::Vector2d(0.51, 0.1)));
  const spem::ParameterPrior box = spem::BoxPrior(Eigen::Vector2d(1.0, 2.0), Eigen::Vector2d(3.0, 4.0));
  CHECK(spem::prior_contains(Eigen::Vector2d(1.0, 4.0), box));
  CHECK_FALSE(spem::prior_contains(Eigen::Vector2d(0.9, 3.0), box));
}

TEST_CASE("integrated likelihood matches the dense formula") {
  const RegressionData data = smooth_data(80, 3, 4, BasisSpec(2, 2, 3));
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd tau = random_simplex_point(3, 1.5, rng);
    const auto [ll, terms] = spem::integrated_loglik(tau, data, bohman_base(3));
    const ProductCorrelationModel model = spem::model_for(bohman_base(3), tau);
    const oracle::Gls ref = oracle::gls(spem::dense_correlation(data.x.points(), model), data.y, data.f);
    CHECK(oracle::relative(ll, ref.loglik) < 1e-8);
    CHECK(oracle::relative(terms.log_det_gamma, ref.logdet) < 1e-8);
    CHECK(oracle::relative(terms.rss, ref.rss) < 1e-8);
    CHECK(oracle::relative(terms.sigma2, ref.rss / (80.0 - static_cast<double>(data.q()))) < 1e-8);
    CHECK((terms.beta - ref.beta).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, ref.beta.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("power exponential likelihood uses the dense path") {
  const RegressionData data = smooth_data(40, 2, 5, BasisSpec(1, 1, 2));
  const auto base = ProductCorrelationModel::broadcast(CorrelationFamily::power_exponential(1.5, 1.0),
                                                       RangeVector(Eigen::Vector2d::Ones()));
  const Eigen::Vector2d phi(3.0, 5.0);
  const auto [ll, terms] = spem::integrated_loglik(phi, data, base);
  const oracle::Gls ref = oracle::gls(spem::dense_correlation(data.x.points(), spem::model_for(base, phi)), data.y, data.f);
  CHECK(oracle::relative(ll, ref.loglik) < 1e-8);
}

TEST_CASE("integrated likelihood differences match quadrature") {
  const Index n = 12;
  Eigen::MatrixXd pts(n, 1);
  for (Index i = 0; i < n; ++i) pts(i, 0) = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  const DesignMatrix x(pts);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) y(i) = std::sin(6.0 * pts(i, 0)) + 0.3 * pts(i, 0);
  const RegressionData data(x, y, spem::build_basis_matrix(x, BasisSpec(1, 1, 1)));
  const auto base = bohman_base(1);
  const std::vector<double> taus{0.1, 0.25, 0.5};
  std::vector<double> ll;
  std::vector<double> quad;
  for (double t : taus) {
    ll.push_back(spem::integrated_loglik(Eigen::VectorXd::Constant(1, t), data, base).first);
    const Eigen::MatrixXd gamma = spem::dense_correlation(pts, spem::model_for(base, Eigen::VectorXd::Constant(1, t)));
    quad.push_back(oracle::log_marginal_by_quadrature(gamma, y, data.f, 61, 801));
  }
  for (std::size_t a = 1; a < taus.size(); ++a) CHECK(std::abs((ll[a] - ll[0]) - (quad[a] - quad[0])) < 1e-3);
}

TEST_CASE("integrated likelihood ignores the row order") {
  const RegressionData data = smooth_data(60, 2, 6, BasisSpec(2, 2, 2));
  std::vector<Index> perm(60);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::VectorXd y(60);
  Eigen::MatrixXd f(60, data.q());
  for (Index i = 0; i < 60; ++i) {
    y(i) = data.y(perm[static_cast<std::size_t>(i)]);
    f.row(i) = data.f.row(perm[static_cast<std::size_t>(i)]);
  }
  const RegressionData shuffled(data.x.subset(perm), y, f);
  const Eigen::Vector2d tau(0.4, 0.3);
  CHECK(oracle::relative(spem::integrated_loglik(tau, shuffled, bohman_base(2)).first,
                         spem::integrated_loglik(tau, data, bohman_base(2)).first) < 1e-10);
}

TEST_CASE("rescaling the response shifts the likelihood by a constant") {
  const RegressionData data = smooth_data(50, 2, 7, BasisSpec(1, 1, 2));
  const double c = 37.5;
  const RegressionData scaled(data.x, c * data.y, data.f);
  const auto base = bohman_base(2);
  for (const Eigen::Vector2d tau : {Eigen::Vector2d(0.2, 0.3), Eigen::Vector2d(0.5, 0.1)}) {
    const auto [a, ta] = spem::integrated_loglik(tau, data, base);
    const auto [b, tb] = spem::integrated_loglik(tau, scaled, base);
    CHECK(b - a == doctest::Approx(-(50.0 - 3.0) * std::log(c)).epsilon(1e-10));
    CHECK((tb.beta - c * ta.beta).cwiseAbs().maxCoeff() < 1e-9 * c);
    CHECK(tb.rss == doctest::Approx(c * c * ta.rss).epsilon(1e-10));
  }

  spem::MCMCConfig cfg;
  cfg.iterations = 300;
  cfg.burn_in = 50;
  cfg.seed = 4;
  const SimplexPrior prior(1.0, 2);
  const auto ca = spem::metropolis_run(cfg, data, base, prior);
  const auto cb = spem::metropolis_run(cfg, scaled, base, prior);
  CHECK(ca.accepted == cb.accepted);
}

TEST_CASE("chain bookkeeping") {
  const RegressionData data = smooth_data(40, 2, 8, BasisSpec(1, 1, 2));
  spem::MCMCConfig cfg;
  cfg.iterations = 500;
  cfg.burn_in = 100;
  cfg.stride = 7;
  cfg.seed = 5;
  const SimplexPrior prior(0.8, 2);
  const auto chain = spem::metropolis_run(cfg, data, bohman_base(2), prior);
  REQUIRE(chain.size() == 500);
  for (const auto& s : chain.states) CHECK(prior.contains(s));
  const auto accepted = static_cast<double>(std::count(chain.accepted.begin(), chain.accepted.end(), 1));
  CHECK(chain.acceptance_rate() == doctest::Approx(accepted / 500.0));
  for (std::size_t i = 1; i < chain.size(); ++i)
    if (!chain.accepted[i]) CHECK(chain.states[i] == chain.states[i - 1]);
  CHECK(chain.retained().size() == 400);
  const auto thin = chain.thinned();
  CHECK(thin.front() == 100);
  CHECK(thin.size() == 58);
  for (std::size_t k = 1; k < thin.size(); ++k) CHECK(thin[k] - thin[k - 1] == 7);

  const auto again = spem::metropolis_run(cfg, data, bohman_base(2), prior);
  CHECK(again.states == chain.states);
  CHECK(again.loglik == chain.loglik);
}

TEST_CASE("adaptation follows the vanishing step sequence") {
  spem::MCMCConfig cfg;
  cfg.iterations = 1000;
  cfg.burn_in = 0;
  cfg.initial = Eigen::Vector2d(0.0, 0.0);
  cfg.initial_proposal = Eigen::Matrix2d::Identity() * 4.0;
  cfg.seed = 3;
  const auto chain = spem::run_adaptive_metropolis(
      cfg, [](const Eigen::VectorXd& t) -> std::optional<double> { return -0.5 * t.squaredNorm(); },
      [](const Eigen::VectorXd&) { return true; });
  REQUIRE(chain.block_acceptance.size() == 20);
  double log_scale = 0.0;
  double square_sum = 0.0;
  for (std::size_t k = 0; k < chain.block_acceptance.size(); ++k) {
    const double gamma = std::pow(static_cast<double>(k + 1), -0.6);
    square_sum += gamma * gamma;
    log_scale += gamma * (chain.block_acceptance[k] - 0.234);
    CHECK(chain.block_log_scale[k] == doctest::Approx(log_scale).epsilon(1e-12));
  }
  CHECK(std::isfinite(square_sum));
  for (std::size_t k = 0; k < chain.block_acceptance.size(); ++k) {
    int count = 0;
    for (std::size_t i = 50 * k; i < 50 * (k + 1); ++i) count += chain.accepted[i];
    CHECK(chain.block_acceptance[k] == doctest::Approx(count / 50.0));
  }
}

TEST_CASE("invalid chain settings") {
  spem::MCMCConfig cfg;
  cfg.iterations = 100;
  cfg.burn_in = 100;
  CHECK_THROWS_AS(cfg.validate(), spem::Error);
  cfg.burn_in = 10;
  cfg.stride = 0;
  CHECK_THROWS_AS(cfg.validate(), spem::Error);
  cfg.stride = 1;
  cfg.lap.decay = 0.5;
  CHECK_THROWS_AS(cfg.validate(), spem::Error);
  cfg.lap.decay = 1.0;
  CHECK_NOTHROW(cfg.validate());
  cfg.lap.block_length = 0;
  CHECK_THROWS_AS(cfg.validate(), spem::Error);
}

TEST_CASE("tiny proposals are almost always accepted") {
  spem::MCMCConfig cfg;
  cfg.iterations = 2000;
  cfg.burn_in = 0;
  cfg.lap.adapt = false;
  cfg.initial = Eigen::Vector2d(0.3, 0.3);
  cfg.initial_proposal = Eigen::Matrix2d::Identity() * 1e-20;
  const SimplexPrior prior(1.0, 2);
  const auto chain = spem::run_adaptive_metropolis(
      cfg, [](const Eigen::VectorXd& t) -> std::optional<double> { return -10.0 * t.sum(); },
      [&](const Eigen::VectorXd& t) { return prior.contains(t); });
  CHECK(chain.acceptance_rate() > 0.99);
  CHECK((chain.states.back() - cfg.initial).norm() < 1e-6);
}

TEST_CASE("rejections outside the support and numerical failures") {
  spem::MCMCConfig cfg;
  cfg.iterations = 200;
  cfg.burn_in = 0;
  cfg.initial = Eigen::VectorXd::Constant(1, 0.5);
  cfg.initial_proposal = Eigen::MatrixXd::Constant(1, 1, 0.01);
  int calls = 0;
  auto target = [&](const Eigen::VectorXd&) -> std::optional<double> { return ++calls == 1 ? std::optional<double>(0.0) : std::nullopt; };
  std::vector<std::string> messages;
  const auto chain = spem::run_adaptive_metropolis(cfg, target, [](const Eigen::VectorXd& t) { return t(0) > 0.0 && t(0) < 1.0; },
                                                   [&](const std::string& m) { messages.push_back(m); });
  CHECK(chain.acceptance_rate() == 0.0);
  CHECK(chain.numerical_rejections + chain.out_of_support == 200);
  CHECK(messages.size() == chain.numerical_rejections);

  const auto nowhere = spem::run_adaptive_metropolis(
      cfg, [](const Eigen::VectorXd&) -> std::optional<double> { return 0.0; },
      [&](const Eigen::VectorXd& t) { return t(0) == 0.5; });
  CHECK(nowhere.out_of_support == 200);
  CHECK(nowhere.acceptance_rate() == 0.0);

  cfg.initial = Eigen::VectorXd::Constant(1, 2.0);
  CHECK_THROWS_AS(spem::run_adaptive_metropolis(
                      cfg, [](const Eigen::VectorXd&) -> std::optional<double> { return 0.0; },
                      [](const Eigen::VectorXd& t) { return t(0) < 1.0; }),
                  spem::Error);
}

TEST_CASE("flat target acceptance equals the truncation probability") {
  const Index d = 2;
  const double c = 1.0;
  const double sd = 0.15;
  const SimplexPrior prior(c, d);
  spem::MCMCConfig cfg;
  cfg.iterations = 50000;
  cfg.burn_in = 0;
  cfg.lap.adapt = false;
  cfg.initial = Eigen::Vector2d(0.25, 0.25);
  cfg.initial_proposal = Eigen::Matrix2d::Identity() * sd * sd;
  cfg.seed = 77;
  const auto chain = spem::run_adaptive_metropolis(
      cfg, [](const Eigen::VectorXd&) -> std::optional<double> { return 0.0; },
      [&](const Eigen::VectorXd& t) { return prior.contains(t); });

  // Oracle: uniform point on the simplex plus an independent proposal step.
  std::mt19937_64 rng(1234);
  std::normal_distribution<double> z;
  const int draws = 400000;
  int inside = 0;
  for (int i = 0; i < draws; ++i) {
    const Eigen::VectorXd t = random_simplex_point(d, c, rng);
    const Eigen::Vector2d step(sd * z(rng), sd * z(rng));
    inside += prior.contains(t + step) ? 1 : 0;
  }
  const double p = static_cast<double>(inside) / draws;
  const double oracle_se = std::sqrt(p * (1.0 - p) / draws);

  // Batch means for the correlated accept indicators.
  const int batches = 50;
  const std::size_t len = chain.size() / batches;
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += chain.accepted[i];
    means.push_back(s / static_cast<double>(len));
  }
  const double m = std::accumulate(means.begin(), means.end(), 0.0) / batches;
  double v = 0.0;
  for (double x : means) v += (x - m) * (x - m);
  const double chain_se = std::sqrt(v / (batches - 1) / batches);
  const double se = std::sqrt(chain_se * chain_se + oracle_se * oracle_se);
  MESSAGE("acceptance " << chain.acceptance_rate() << " oracle " << p << " se " << se);
  CHECK(std::abs(chain.acceptance_rate() - p) <= 2.0 * se);
}

TEST_CASE("chain CSV round trip") {
  const RegressionData data = smooth_data(30, 2, 9, BasisSpec(1, 1, 2));
  spem::MCMCConfig cfg;
  cfg.iterations = 120;
  cfg.burn_in = 20;
  cfg.stride = 5;
  const auto chain = spem::metropolis_run(cfg, data, bohman_base(2), SimplexPrior(1.0, 2));
  const auto dir = oracle::scratch_dir("chain");
  const std::string path = (dir / "chain.csv").string();
  spem::write_chain_csv(path, chain);
  const auto back = spem::read_chain_csv(path, 20, 5);
  CHECK(back.states == chain.states);
  CHECK(back.loglik == chain.loglik);
  CHECK(back.accepted == chain.accepted);
  CHECK(back.thinned() == chain.thinned());
  std::filesystem::remove_all(dir);
}

TEST_CASE("cutoff calibration examples") {
  const DesignMatrix x = spem::latin_hypercube(60, 3, 2);
  CHECK(spem::calibrate_cutoff(x, 1.0).cutoff == 3.0);

  Eigen::MatrixXd two(2, 2);
  two << 0.25, 0.25, 0.75, 0.75;
  const auto r = spem::calibrate_cutoff(DesignMatrix(two), 0.5);
  CHECK(std::abs(r.cutoff - 1.0) <= 2e-3);
  CHECK(r.achieved == 0.0);

  // Brute force over a grid of tau on the face sum = C just above and below 1.
  auto max_on_grid = [&](double c) {
    int hits = 0;
    for (int i = 1; i < 1000; ++i) {
      const Eigen::Vector2d tau(c * i / 1000.0, c * (1000 - i) / 1000.0);
      hits = std::max<int>(hits, static_cast<int>(oracle::pairs(two, tau).size()));
    }
    return hits;
  };
  CHECK(max_on_grid(0.99) == 0);
  CHECK(max_on_grid(1.01) == 1);

  CHECK_THROWS_AS(spem::calibrate_cutoff(x, 0.0), spem::Error);
}

TEST_CASE("calibrated cutoff grows with the target") {
  const DesignMatrix x = spem::latin_hypercube(300, 4, 3);
  double previous = 0.0;
  for (double target : {0.005, 0.01, 0.02, 0.05, 0.1, 0.3}) {
    const auto r = spem::calibrate_cutoff(x, target);
    CHECK(r.cutoff >= previous);
    CHECK(r.achieved <= target);
    CHECK(r.maximizer.sum() == doctest::Approx(r.cutoff).epsilon(1e-9));
    previous = r.cutoff;
  }
}

TEST_CASE("calibration subsamples large designs") {
  const DesignMatrix x = spem::latin_hypercube(500, 2, 4);
  spem::CalibrationOptions opt;
  opt.max_points = 200;
  const auto r = spem::calibrate_cutoff(x, 0.05, opt);
  CHECK(r.subsampled);
  CHECK(r.points_used == 200);
}

TEST_CASE("unreachable sparsity target is reported") {
  Eigen::MatrixXd pts(4, 2);
  pts << 0.1, 0.1, 0.1, 0.1, 0.5, 0.5, 0.9, 0.9;
  try {
    (void)spem::calibrate_cutoff(DesignMatrix(pts), 0.01);
    FAIL("expected a calibration error");
  } catch (const spem::Error& e) {
    CHECK(std::string(e.what()).find("smallest achievable") != std::string::npos);
  }
}

TEST_CASE("isotropic pilot picks the best grid value") {
  const RegressionData data = smooth_data(50, 2, 10, BasisSpec(0, 1, 2));
  const auto base = ProductCorrelationModel::broadcast(CorrelationFamily::power_exponential(1.5, 1.0),
                                                       RangeVector(Eigen::Vector2d::Ones()));
  const Eigen::VectorXd best = spem::isotropic_pilot(data, base, 0.5, 50.0, 9);
  CHECK(best(0) == best(1));
  double best_ll = -1e300;
  double arg = 0.0;
  for (int g = 0; g < 9; ++g) {
    const double phi = 0.5 * std::pow(100.0, (g + 0.5) / 9.0);
    const double ll = spem::integrated_loglik(Eigen::Vector2d::Constant(phi), data, base).first;
    if (ll > best_ll) {
      best_ll = ll;
      arg = phi;
    }
  }
  CHECK(best(0) == doctest::Approx(arg).epsilon(1e-9));
}
