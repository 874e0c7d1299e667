#include "spem/correlation.hpp"

#include <cmath>
#include <numbers>

#include "spem/error.hpp"

namespace spem {

namespace {

bool near(double a, double b) { return std::abs(a - b) <= 1e-9; }

}  // namespace

std::optional<double> truncated_power_min_nu(double alpha) {
  // Askey's condition (d = 1) and the tabulated sufficient pairs.
  if (near(alpha, 1.0)) return 1.0;
  if (near(alpha, 1.5)) return 2.0;
  if (near(alpha, 5.0 / 3.0)) return 3.0;
  return std::nullopt;
}

CorrelationFamily CorrelationFamily::bohman() { return CorrelationFamily{FamilyKind::Bohman, 1.0, 1.0, 1.0}; }

CorrelationFamily CorrelationFamily::truncated_power(double alpha, std::optional<double> nu, bool waive_validity) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw Error(ErrorKind::Config, "truncated power requires 0 < alpha < 2");
  const auto min_nu = truncated_power_min_nu(alpha);
  if (!min_nu) {
    if (!waive_validity) {
      throw Error(ErrorKind::Config, "truncated power alpha=" + std::to_string(alpha) +
                                         " has no tabulated validity bound; use alpha in {1, 3/2, 5/3}");
    }
    if (!nu) throw Error(ErrorKind::Config, "truncated power with waived validity needs an explicit nu");
    if (!(*nu > 0.0)) throw Error(ErrorKind::Config, "truncated power nu must be positive");
    return CorrelationFamily{FamilyKind::TruncatedPower, alpha, *nu, 1.0};
  }
  const double value = nu.value_or(*min_nu);
  if (value < *min_nu && !waive_validity) {
    throw Error(ErrorKind::Config, "truncated power alpha=" + std::to_string(alpha) + " needs nu >= " +
                                       std::to_string(*min_nu) + ", got " + std::to_string(value));
  }
  if (!(value > 0.0)) throw Error(ErrorKind::Config, "truncated power nu must be positive");
  return CorrelationFamily{FamilyKind::TruncatedPower, alpha, value, 1.0};
}

CorrelationFamily CorrelationFamily::power_exponential(double alpha, double phi) {
  if (!(alpha >= 1.0 && alpha <= 2.0)) throw Error(ErrorKind::Config, "power exponential requires 1 <= alpha <= 2");
  if (!(phi > 0.0)) throw Error(ErrorKind::Config, "power exponential requires phi > 0");
  return CorrelationFamily{FamilyKind::PowerExponential, alpha, 1.0, phi};
}

double CorrelationFamily::evaluate(double t, double tau) const {
  switch (kind) {
    case FamilyKind::Bohman: return spem::bohman(t, tau);
    case FamilyKind::TruncatedPower: return spem::truncated_power(t, tau, alpha, nu);
    case FamilyKind::PowerExponential: return spem::power_exponential(t, phi, alpha);
  }
  return 0.0;
}

std::string CorrelationFamily::name() const {
  switch (kind) {
    case FamilyKind::Bohman: return "bohman";
    case FamilyKind::TruncatedPower: return "truncpow";
    case FamilyKind::PowerExponential: return "powexp";
  }
  return "unknown";
}

double bohman(double t, double tau) {
  if (t >= tau) return 0.0;
  const double u = t / tau;
  const double v = (1.0 - u) * std::cos(std::numbers::pi * u) + std::sin(std::numbers::pi * u) / std::numbers::pi;
  return std::max(v, 0.0);
}

double truncated_power(double t, double tau, double alpha, double nu) {
  if (t >= tau) return 0.0;
  const double base = 1.0 - std::pow(t / tau, alpha);
  return std::pow(std::max(base, 0.0), nu);
}

double power_exponential(double t, double phi, double alpha) { return std::exp(-phi * std::pow(t, alpha)); }

double effective_range_to_phi(double r, double alpha) {
  if (!(r > 0.0)) throw Error(ErrorKind::Domain, "effective range must be positive");
  return -std::log(0.05) / std::pow(r, alpha);
}

RangeVector::RangeVector(Eigen::VectorXd tau) : tau_(std::move(tau)) {
  for (Eigen::Index k = 0; k < tau_.size(); ++k) {
    if (!(tau_(k) > 0.0)) throw Error(ErrorKind::Domain, "range tau_" + std::to_string(k + 1) + " must be positive");
  }
}

ProductCorrelationModel::ProductCorrelationModel(std::vector<CorrelationFamily> families, RangeVector ranges)
    : families_(std::move(families)), ranges_(std::move(ranges)) {
  if (static_cast<Eigen::Index>(families_.size()) != ranges_.size()) {
    throw Error(ErrorKind::Config, "correlation model needs one range per family");
  }
  for (const auto& f : families_) all_compact_ = all_compact_ && f.compact_support();
}

ProductCorrelationModel ProductCorrelationModel::broadcast(const CorrelationFamily& family, RangeVector ranges) {
  std::vector<CorrelationFamily> fams(static_cast<std::size_t>(ranges.size()), family);
  return ProductCorrelationModel(std::move(fams), std::move(ranges));
}

ProductCorrelationModel ProductCorrelationModel::with_ranges(RangeVector ranges) const {
  return ProductCorrelationModel(families_, std::move(ranges));
}

ProductCorrelationModel ProductCorrelationModel::with_phi(const Eigen::VectorXd& phi) const {
  if (phi.size() != d()) throw Error(ErrorKind::Domain, "phi vector length does not match the model");
  auto fams = families_;
  for (std::size_t k = 0; k < fams.size(); ++k) {
    if (fams[k].kind == FamilyKind::PowerExponential) {
      const double v = phi(static_cast<Eigen::Index>(k));
      if (!(v > 0.0)) throw Error(ErrorKind::Domain, "phi must be positive");
      fams[k].phi = v;
    }
  }
  return ProductCorrelationModel(std::move(fams), ranges_);
}

double product_correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& x2, const ProductCorrelationModel& model) {
  if (x.size() != model.d() || x2.size() != model.d()) {
    throw Error(ErrorKind::Domain, "point dimension does not match the correlation model");
  }
  return model(x, x2);
}

Eigen::MatrixXd dense_correlation(const Eigen::MatrixXd& points, const ProductCorrelationModel& model) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    r(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = model(points.row(i), points.row(j));
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return r;
}

Eigen::MatrixXd dense_cross_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                        const ProductCorrelationModel& model) {
  Eigen::MatrixXd r(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) r(i, j) = model(a.row(i), b.row(j));
  return r;
}

}  // namespace spem
