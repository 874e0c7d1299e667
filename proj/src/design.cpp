#include "spem/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "spem/csv.hpp"
#include "spem/error.hpp"

namespace spem {

DesignMatrix::DesignMatrix(Eigen::MatrixXd points) : points_(std::move(points)) {
  if (points_.rows() < 1 || points_.cols() < 1) throw Error(ErrorKind::Domain, "design must have n >= 1 and d >= 1");
  for (Eigen::Index i = 0; i < points_.rows(); ++i) {
    for (Eigen::Index k = 0; k < points_.cols(); ++k) {
      const double v = points_(i, k);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorKind::Domain, "design coordinate (" + std::to_string(i) + "," + std::to_string(k) +
                                           ") = " + std::to_string(v) + " lies outside [0,1]");
      }
    }
  }
}

DesignMatrix DesignMatrix::subset(const std::vector<Eigen::Index>& rows) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), d());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = points_.row(rows[r]);
  return DesignMatrix(std::move(out));
}

ScalingSpec::ScalingSpec(std::vector<std::pair<double, double>> bounds) : bounds_(std::move(bounds)) {
  for (std::size_t k = 0; k < bounds_.size(); ++k) {
    if (!(bounds_[k].second > bounds_[k].first)) {
      throw Error(ErrorKind::Domain, "degenerate scaling in dimension " + std::to_string(k + 1) + ": max must exceed min");
    }
  }
}

ScalingSpec ScalingSpec::from_data(const Eigen::MatrixXd& raw) {
  std::vector<std::pair<double, double>> bounds;
  for (Eigen::Index k = 0; k < raw.cols(); ++k) bounds.emplace_back(raw.col(k).minCoeff(), raw.col(k).maxCoeff());
  return ScalingSpec(std::move(bounds));
}

DesignMatrix latin_hypercube(Eigen::Index n, Eigen::Index d, std::uint64_t seed, StratumPlacement placement) {
  if (n < 1 || d < 1) throw Error(ErrorKind::Domain, "latin_hypercube requires n >= 1 and d >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd points(n, d);
  std::vector<Eigen::Index> strata(static_cast<std::size_t>(n));
  const double width = 1.0 / static_cast<double>(n);
  for (Eigen::Index k = 0; k < d; ++k) {
    std::iota(strata.begin(), strata.end(), Eigen::Index{0});
    std::shuffle(strata.begin(), strata.end(), rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double offset = placement == StratumPlacement::Midpoint ? 0.5 : unif(rng);
      const auto s = static_cast<double>(strata[static_cast<std::size_t>(i)]);
      // Guard against rounding up into the next stratum.
      points(i, k) = std::min((s + offset) * width, std::nextafter((s + 1.0) * width, 0.0));
    }
  }
  return DesignMatrix(std::move(points));
}

DesignMatrix uniform_design(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw Error(ErrorKind::Domain, "uniform_design requires n >= 1 and d >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd points(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) points(i, k) = unif(rng);
  return DesignMatrix(std::move(points));
}

Eigen::MatrixXd rescale_unchecked(const Eigen::MatrixXd& raw, const ScalingSpec& spec) {
  if (static_cast<std::size_t>(raw.cols()) != spec.d()) {
    throw Error(ErrorKind::Domain, "scaling spec has " + std::to_string(spec.d()) + " dimensions, inputs have " +
                                       std::to_string(raw.cols()));
  }
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index k = 0; k < raw.cols(); ++k) {
    const auto [lo, hi] = spec.bounds()[static_cast<std::size_t>(k)];
    out.col(k) = (raw.col(k).array() - lo) / (hi - lo);
  }
  return out;
}

DesignMatrix rescale_inputs(const Eigen::MatrixXd& raw, const ScalingSpec& spec, bool clamp) {
  Eigen::MatrixXd out = rescale_unchecked(raw, spec);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index k = 0; k < out.cols(); ++k) {
      double& v = out(i, k);
      if (v >= 0.0 && v <= 1.0) continue;
      if (!clamp) {
        throw Error(ErrorKind::Domain, "input (" + std::to_string(i) + "," + std::to_string(k) + ") = " +
                                           std::to_string(raw(i, k)) + " lies outside the scaling range");
      }
      v = std::clamp(v, 0.0, 1.0);
    }
  }
  return DesignMatrix(std::move(out));
}

Eigen::MatrixXd unscale_inputs(const DesignMatrix& design, const ScalingSpec& spec) {
  if (static_cast<std::size_t>(design.d()) != spec.d()) throw Error(ErrorKind::Domain, "scaling dimension mismatch");
  Eigen::MatrixXd out(design.n(), design.d());
  for (Eigen::Index k = 0; k < design.d(); ++k) {
    const auto [lo, hi] = spec.bounds()[static_cast<std::size_t>(k)];
    out.col(k) = design.points().col(k).array() * (hi - lo) + lo;
  }
  return out;
}

std::vector<std::string> design_columns(Eigen::Index d) {
  std::vector<std::string> cols;
  for (Eigen::Index k = 1; k <= d; ++k) cols.push_back("x" + std::to_string(k));
  return cols;
}

void write_design_csv(const std::filesystem::path& path, const DesignMatrix& design) {
  csv::Table t{design_columns(design.d()), design.points(), {}};
  csv::write_file(path, t);
}

DesignMatrix read_design_csv(const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  const auto expected = design_columns(static_cast<Eigen::Index>(t.columns.size()));
  if (t.columns != expected) throw Error(ErrorKind::Schema, "design CSV header must be x1,...,xd");
  return DesignMatrix(t.values);
}

void write_scaling_csv(const std::filesystem::path& path, const ScalingSpec& spec) {
  csv::Table t{{"dim", "min", "max"}, Eigen::MatrixXd(static_cast<Eigen::Index>(spec.d()), 3), {}};
  for (std::size_t k = 0; k < spec.d(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    t.values(i, 0) = static_cast<double>(k + 1);
    t.values(i, 1) = spec.bounds()[k].first;
    t.values(i, 2) = spec.bounds()[k].second;
  }
  csv::write_file(path, t);
}

ScalingSpec read_scaling_csv(const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  if (t.columns != std::vector<std::string>{"dim", "min", "max"}) throw Error(ErrorKind::Schema, "bad scaling CSV header");
  std::vector<std::pair<double, double>> bounds;
  for (Eigen::Index i = 0; i < t.values.rows(); ++i) bounds.emplace_back(t.values(i, 1), t.values(i, 2));
  return ScalingSpec(std::move(bounds));
}

}  // namespace spem
