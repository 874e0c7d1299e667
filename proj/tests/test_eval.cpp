#include "doctest.h"

#include <cmath>
#include <fstream>

#include "oracles.hpp"
#include "spem/csv.hpp"
#include "spem/error.hpp"
#include "spem/eval.hpp"

TEST_CASE("efficiency examples") {
  const Eigen::Vector3d actual(0.0, 1.0, 2.0);
  CHECK(spem::nse(actual, actual) == 1.0);
  CHECK(spem::nse(Eigen::Vector3d::Constant(1.0), actual) == 0.0);
  CHECK(spem::nse(Eigen::Vector3d(0.0, 1.0, 1.0), actual) == doctest::Approx(0.5));
  CHECK_THROWS_AS(spem::nse(Eigen::Vector2d(0.0, 1.0), actual), spem::Error);
  CHECK_THROWS_AS(spem::nse(Eigen::Vector3d(0.0, 1.0, 1.0), Eigen::Vector3d::Constant(2.0)), spem::Error);
}

TEST_CASE("efficiency is invariant to a common affine map") {
  const Eigen::VectorXd actual = oracle::uniform_points(50, 1, 1).col(0);
  const Eigen::VectorXd pred = actual + 0.2 * oracle::uniform_points(50, 1, 2).col(0);
  const double base = spem::nse(pred, actual);
  for (double a : {0.01, 3.0, 1e4})
    for (double b : {-5.0, 0.0, 1e3}) {
      const Eigen::VectorXd p2 = (a * pred).array() + b;
      const Eigen::VectorXd y2 = (a * actual).array() + b;
      CHECK(spem::nse(p2, y2) == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("coverage examples") {
  const Eigen::Vector4d actual(0.0, 1.0, 2.0, 3.0);
  CHECK(spem::empirical_coverage(Eigen::Vector4d::Constant(-1e300), Eigen::Vector4d::Constant(1e300), actual) == 1.0);
  CHECK(spem::empirical_coverage(Eigen::Vector4d::Constant(10.0), Eigen::Vector4d::Constant(11.0), actual) == 0.0);
  CHECK(spem::empirical_coverage(Eigen::Vector4d(-0.5, 0.5, 2.5, 3.5), Eigen::Vector4d(0.5, 1.5, 3.0, 4.0), actual) == 0.5);
  // Closed intervals: a boundary hit counts.
  CHECK(spem::empirical_coverage(Eigen::Vector4d(0.0, 0.0, 0.0, 0.0), Eigen::Vector4d(1.0, 1.0, 1.0, 1.0), actual) == 0.5);
  CHECK_THROWS_AS(spem::empirical_coverage(Eigen::Vector4d::Constant(1.0), Eigen::Vector4d::Constant(0.0), actual), spem::Error);
}

TEST_CASE("widening intervals never lowers coverage") {
  const Eigen::VectorXd actual = oracle::uniform_points(200, 1, 3).col(0);
  const Eigen::VectorXd centre = oracle::uniform_points(200, 1, 4).col(0);
  double previous = 0.0;
  for (int step = 0; step <= 20; ++step) {
    const double h = 0.05 * step;
    const double c = spem::empirical_coverage(centre.array() - h, centre.array() + h, actual);
    CHECK(c >= previous);
    previous = c;
  }
  CHECK(previous == 1.0);
}

TEST_CASE("isotropic range hits the requested sparsity") {
  const Eigen::MatrixXd x = oracle::uniform_points(800, 4, 5);
  for (double target : {0.02, 0.05}) {
    const double r = spem::isotropic_range_for_sparsity(x, target);
    const double achieved = 2.0 * static_cast<double>(oracle::pairs(x, Eigen::Vector4d::Constant(r)).size()) / (800.0 * 799.0);
    CHECK(std::abs(achieved - target) <= 0.1 * target);
  }
}

TEST_CASE("small timing benchmark") {
  spem::BenchmarkOptions opt;
  opt.n_grid = {300, 500};
  opt.sparsity_grid = {0.02, 0.05};
  opt.repeats = 2;
  opt.dense_cap = 400;
  const auto report = spem::timing_benchmark(opt);
  const auto again = spem::timing_benchmark(opt);
  REQUIRE(report.cells.size() == 4);
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    CHECK(report.cells[i].off_diagonal_pairs == again.cells[i].off_diagonal_pairs);
    CHECK(report.cells[i].range == again.cells[i].range);
    CHECK(std::abs(report.cells[i].achieved - report.cells[i].target) <= 0.1 * report.cells[i].target);
  }
  for (const auto& step : spem::timing_steps()) {
    CHECK(report.times("sparse", step, 300, 0.02).size() == 2);
    CHECK(report.median("sparse", step, 500, 0.05) >= 0.0);
  }
  CHECK(report.times("dense", "checking distances", 300, 1.0).empty());
  CHECK(report.times("dense", "cholesky", 300, 1.0).size() == 2);
  // n = 500 exceeds the dense cap.
  CHECK(report.times("dense", "cholesky", 500, 1.0).empty());
  CHECK(std::isnan(report.median("dense", "cholesky", 500, 1.0)));
  CHECK_FALSE(report.notices.empty());

  const auto dir = oracle::scratch_dir("timing");
  spem::write_timing_csv(dir / "timing.csv", report);
  const auto back = spem::read_timing_csv(dir / "timing.csv");
  REQUIRE(back.size() == report.samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].path == report.samples[i].path);
    CHECK(back[i].step == report.samples[i].step);
    CHECK(back[i].n == report.samples[i].n);
    CHECK(back[i].sparsity == report.samples[i].sparsity);
    CHECK(back[i].seconds == report.samples[i].seconds);
  }
  CHECK(!spem::timing_summary(report).empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("benchmark rejects empty grids") {
  spem::BenchmarkOptions opt;
  opt.n_grid.clear();
  CHECK_THROWS_AS(spem::timing_benchmark(opt), spem::Error);
}
