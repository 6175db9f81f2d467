#pragma once

#include <string>

#include "uhf/data.hpp"

namespace uhf {

/// Shape parameters of a standardized (zero-mean, unit-variance) innovation.
/// `nu` is used by STD and SSTD, `xi` by SSTD only.
struct InnovationShape {
  Innovation kind = Innovation::kNorm;
  double nu = 8.0;
  double xi = 1.0;
};

std::string innovation_label(Innovation kind);  // "norm", "std", "sstd"

/// True when the shape parameters are admissible (nu > 2, xi > 0).
bool admissible(const InnovationShape& shape);

/// Standardized innovation law with its normalizing constants precomputed.
/// The skew-t is the Fernandez-Steel skew of the unit-variance t, shifted and
/// scaled back to zero mean and unit variance.
class InnovationLaw {
 public:
  /// Throws std::domain_error for inadmissible shapes.
  explicit InnovationLaw(const InnovationShape& shape);

  const InnovationShape& shape() const { return shape_; }
  double log_density(double z) const;
  double cdf(double z) const;
  /// 1 - cdf without cancellation in the upper tail.
  double survival(double z) const;
  /// E|z|.
  double abs_moment() const { return abs_moment_; }

 private:
  double t_log_density(double x) const;  // unit-variance t at x
  double t_cdf(double x) const;
  double t_survival(double x) const;

  InnovationShape shape_;
  double t_scale_ = 1.0;      // sqrt(nu / (nu - 2))
  double t_log_const_ = 0.0;  // log normalizer of the unit-variance t
  double skew_mean_ = 0.0;
  double skew_sd_ = 1.0;
  double skew_g_ = 1.0;
  double skew_log_const_ = 0.0;
  double abs_moment_ = 0.0;
};

}  // namespace uhf
