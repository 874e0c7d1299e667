#ifndef SPEM_DESIGN_HPP
#define SPEM_DESIGN_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace spem {

/// n experiment inputs in the unit cube [0,1]^d, one point per row. Immutable.
class DesignMatrix {
 public:
  DesignMatrix() = default;
  /// Throws if any coordinate lies outside [0,1] or the matrix is empty.
  explicit DesignMatrix(Eigen::MatrixXd points);

  [[nodiscard]] Eigen::Index n() const noexcept { return points_.rows(); }
  [[nodiscard]] Eigen::Index d() const noexcept { return points_.cols(); }
  [[nodiscard]] const Eigen::MatrixXd& points() const noexcept { return points_; }
  [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index k) const { return points_(i, k); }
  [[nodiscard]] Eigen::RowVectorXd row(Eigen::Index i) const { return points_.row(i); }

  /// Rows selected by index, in the given order.
  [[nodiscard]] DesignMatrix subset(const std::vector<Eigen::Index>& rows) const;

 private:
  Eigen::MatrixXd points_;
};

/// Per-dimension (min, max) bounds in raw input units.
class ScalingSpec {
 public:
  ScalingSpec() = default;
  explicit ScalingSpec(std::vector<std::pair<double, double>> bounds);

  /// Bounds taken from the column-wise min and max of raw inputs.
  static ScalingSpec from_data(const Eigen::MatrixXd& raw);

  [[nodiscard]] std::size_t d() const noexcept { return bounds_.size(); }
  [[nodiscard]] const std::vector<std::pair<double, double>>& bounds() const noexcept { return bounds_; }

 private:
  std::vector<std::pair<double, double>> bounds_;
};

enum class StratumPlacement { Jittered, Midpoint };

/// Random Latin hypercube sample: each column has exactly one point in every
/// stratum [i/n, (i+1)/n).
DesignMatrix latin_hypercube(Eigen::Index n, Eigen::Index d, std::uint64_t seed,
                             StratumPlacement placement = StratumPlacement::Jittered);

/// Independent uniform points in [0,1)^d.
DesignMatrix uniform_design(Eigen::Index n, Eigen::Index d, std::uint64_t seed);

/// Maps raw inputs to the unit cube. Out-of-range values are clamped when
/// `clamp` is set and rejected otherwise.
DesignMatrix rescale_inputs(const Eigen::MatrixXd& raw, const ScalingSpec& spec, bool clamp = false);

/// Maps to the unit cube without range checks; values may fall outside [0,1].
Eigen::MatrixXd rescale_unchecked(const Eigen::MatrixXd& raw, const ScalingSpec& spec);

/// Inverse of rescale_inputs.
Eigen::MatrixXd unscale_inputs(const DesignMatrix& design, const ScalingSpec& spec);

/// Header `x1,...,xd`.
std::vector<std::string> design_columns(Eigen::Index d);
void write_design_csv(const std::filesystem::path& path, const DesignMatrix& design);
DesignMatrix read_design_csv(const std::filesystem::path& path);

void write_scaling_csv(const std::filesystem::path& path, const ScalingSpec& spec);
ScalingSpec read_scaling_csv(const std::filesystem::path& path);

}  // namespace spem

#endif  // SPEM_DESIGN_HPP
