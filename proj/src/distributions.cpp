#include "uhf/distributions.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace uhf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// E|z| of the unit-variance t: 2 sqrt(nu-2) Gamma((nu+1)/2) / ((nu-1) Gamma(nu/2) sqrt(pi)).
double unit_t_abs_moment(double nu) {
  return 2.0 * std::sqrt(nu - 2.0) / ((nu - 1.0) * std::sqrt(std::numbers::pi)) /
         boost::math::tgamma_delta_ratio(0.5 * nu, 0.5);
}

}  // namespace

std::string innovation_label(Innovation kind) {
  switch (kind) {
    case Innovation::kNorm:
      return "norm";
    case Innovation::kStd:
      return "std";
    case Innovation::kSstd:
      return "sstd";
  }
  return "?";
}

bool admissible(const InnovationShape& shape) {
  switch (shape.kind) {
    case Innovation::kNorm:
      return true;
    case Innovation::kStd:
      return shape.nu > 2.0 && std::isfinite(shape.nu);
    case Innovation::kSstd:
      return shape.nu > 2.0 && std::isfinite(shape.nu) && shape.xi > 0.0 && std::isfinite(shape.xi);
  }
  return false;
}

InnovationLaw::InnovationLaw(const InnovationShape& shape) : shape_(shape) {
  if (!admissible(shape)) throw std::domain_error("inadmissible innovation shape");
  if (shape.kind == Innovation::kNorm) {
    abs_moment_ = std::sqrt(2.0 / std::numbers::pi);
    return;
  }
  const double nu = shape.nu;
  t_scale_ = std::sqrt(nu / (nu - 2.0));
  // ln Gamma((nu+1)/2) - ln Gamma(nu/2) via the ratio, which keeps precision at large nu.
  t_log_const_ = -std::log(boost::math::tgamma_delta_ratio(0.5 * nu, 0.5)) - 0.5 * std::log(nu * std::numbers::pi) +
                 std::log(t_scale_);
  const double m1 = unit_t_abs_moment(nu);
  if (shape.kind == Innovation::kStd || shape.xi == 1.0) {
    abs_moment_ = m1;
    return;
  }
  const double xi = shape.xi;
  skew_mean_ = m1 * (xi - 1.0 / xi);
  skew_sd_ = std::sqrt((1.0 - m1 * m1) * (xi * xi + 1.0 / (xi * xi)) + 2.0 * m1 * m1 - 1.0);
  skew_g_ = 2.0 / (xi + 1.0 / xi);
  skew_log_const_ = std::log(skew_g_ * skew_sd_);

  // Kinks where the skewed variable crosses zero and where |z| does.
  const double kink = -skew_mean_ / skew_sd_;
  auto integrand = [&](double z) { return std::abs(z) * std::exp(log_density(z)); };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
  const double lo = std::min(0.0, kink), hi = std::max(0.0, kink);
  double total = Quad::integrate(integrand, -kInf, lo, 10, 1e-13);
  if (hi > lo) total += Quad::integrate(integrand, lo, hi, 10, 1e-13);
  total += Quad::integrate(integrand, hi, kInf, 10, 1e-13);
  abs_moment_ = total;
}

double InnovationLaw::t_log_density(double x) const {
  const double u = x * t_scale_;
  return t_log_const_ - 0.5 * (shape_.nu + 1.0) * std::log1p(u * u / shape_.nu);
}

double InnovationLaw::t_cdf(double x) const {
  return boost::math::cdf(boost::math::students_t_distribution<double>(shape_.nu), x * t_scale_);
}

double InnovationLaw::t_survival(double x) const {
  return boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(shape_.nu), x * t_scale_));
}

double InnovationLaw::log_density(double z) const {
  switch (shape_.kind) {
    case Innovation::kNorm:
      return -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
    case Innovation::kStd:
      return t_log_density(z);
    case Innovation::kSstd: {
      const double y = z * skew_sd_ + skew_mean_;
      const double scaled = y >= 0.0 ? y / shape_.xi : y * shape_.xi;
      return skew_log_const_ + t_log_density(scaled);
    }
  }
  return -kInf;
}

double InnovationLaw::cdf(double z) const {
  if (z == kInf) return 1.0;
  if (z == -kInf) return 0.0;
  switch (shape_.kind) {
    case Innovation::kNorm:
      return 0.5 * std::erfc(-z / std::numbers::sqrt2);
    case Innovation::kStd:
      return t_cdf(z);
    case Innovation::kSstd: {
      const double y = z * skew_sd_ + skew_mean_;
      if (y < 0.0) return skew_g_ / shape_.xi * t_cdf(y * shape_.xi);
      return 1.0 - skew_g_ * shape_.xi * t_survival(y / shape_.xi);
    }
  }
  return 0.0;
}

double InnovationLaw::survival(double z) const {
  if (z == kInf) return 0.0;
  if (z == -kInf) return 1.0;
  switch (shape_.kind) {
    case Innovation::kNorm:
      return 0.5 * std::erfc(z / std::numbers::sqrt2);
    case Innovation::kStd:
      return t_survival(z);
    case Innovation::kSstd: {
      const double y = z * skew_sd_ + skew_mean_;
      if (y < 0.0) return 1.0 - skew_g_ / shape_.xi * t_cdf(y * shape_.xi);
      return skew_g_ * shape_.xi * t_survival(y / shape_.xi);
    }
  }
  return 0.0;
}

}  // namespace uhf
