#ifndef SPEM_CORRELATION_HPP
#define SPEM_CORRELATION_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace spem {

enum class FamilyKind { Bohman, TruncatedPower, PowerExponential };

/// One-dimensional correlation family. Compactly supported families use the
/// per-dimension range tau held by ProductCorrelationModel; the power
/// exponential carries its own scale phi.
struct CorrelationFamily {
  FamilyKind kind = FamilyKind::Bohman;
  double alpha = 1.0;
  double nu = 1.0;
  double phi = 1.0;

  static CorrelationFamily bohman();
  /// Without `nu`, the smallest admissible value for alpha is used. Only
  /// alpha in {1, 3/2, 5/3} is accepted unless `waive_validity` is set, in
  /// which case nu must be given explicitly.
  static CorrelationFamily truncated_power(double alpha, std::optional<double> nu = std::nullopt,
                                           bool waive_validity = false);
  static CorrelationFamily power_exponential(double alpha, double phi);

  [[nodiscard]] bool compact_support() const noexcept { return kind != FamilyKind::PowerExponential; }
  /// R(t) for separation t >= 0; `tau` is ignored by the power exponential.
  [[nodiscard]] double evaluate(double t, double tau) const;
  [[nodiscard]] std::string name() const;
};

/// Smallest nu known to give a valid truncated-power correlation in one
/// dimension for the given alpha, or nullopt when none is tabulated.
std::optional<double> truncated_power_min_nu(double alpha);

double bohman(double t, double tau);
double truncated_power(double t, double tau, double alpha, double nu);
double power_exponential(double t, double phi, double alpha);

/// phi such that exp(-phi r^alpha) = 0.05.
double effective_range_to_phi(double r, double alpha);

/// Positive support ranges tau_1..tau_d.
class RangeVector {
 public:
  RangeVector() = default;
  explicit RangeVector(Eigen::VectorXd tau);
  [[nodiscard]] Eigen::Index size() const noexcept { return tau_.size(); }
  [[nodiscard]] double operator[](Eigen::Index k) const { return tau_(k); }
  [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return tau_; }
  [[nodiscard]] double sum() const { return tau_.sum(); }

 private:
  Eigen::VectorXd tau_;
};

/// Separable correlation R(x, x') = prod_k R_k(|x_k - x'_k|).
class ProductCorrelationModel {
 public:
  ProductCorrelationModel() = default;
  ProductCorrelationModel(std::vector<CorrelationFamily> families, RangeVector ranges);
  /// Same family in every dimension.
  static ProductCorrelationModel broadcast(const CorrelationFamily& family, RangeVector ranges);

  [[nodiscard]] Eigen::Index d() const noexcept { return static_cast<Eigen::Index>(families_.size()); }
  [[nodiscard]] const std::vector<CorrelationFamily>& families() const noexcept { return families_; }
  [[nodiscard]] const RangeVector& ranges() const noexcept { return ranges_; }
  [[nodiscard]] bool compact_support() const noexcept { return all_compact_; }

  /// Copy with new ranges (compact dimensions) and the same families.
  [[nodiscard]] ProductCorrelationModel with_ranges(RangeVector ranges) const;
  /// Copy with new phi values for the power-exponential dimensions.
  [[nodiscard]] ProductCorrelationModel with_phi(const Eigen::VectorXd& phi) const;

  /// Product correlation; exactly 0 once any compact dimension is separated by
  /// at least its range.
  template <class A, class B>
  [[nodiscard]] double operator()(const A& x, const B& x2) const {
    double r = 1.0;
    for (Eigen::Index k = 0; k < d(); ++k) {
      const double t = std::abs(x(k) - x2(k));
      const auto& fam = families_[static_cast<std::size_t>(k)];
      if (fam.compact_support() && t >= ranges_[k]) return 0.0;
      r *= fam.evaluate(t, ranges_[k]);
    }
    return r;
  }

 private:
  std::vector<CorrelationFamily> families_;
  RangeVector ranges_;
  bool all_compact_ = true;
};

/// Correlation of two points; throws on dimension mismatch.
double product_correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& x2, const ProductCorrelationModel& model);

/// Dense n x n correlation matrix by direct evaluation.
Eigen::MatrixXd dense_correlation(const Eigen::MatrixXd& points, const ProductCorrelationModel& model);

/// Dense n x m cross-correlation between two point sets.
Eigen::MatrixXd dense_cross_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                        const ProductCorrelationModel& model);

}  // namespace spem

#endif  // SPEM_CORRELATION_HPP
