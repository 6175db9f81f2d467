#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uhf/data.hpp"
#include "uhf/distributions.hpp"

namespace uhf {

class GarchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class VarianceModel : std::uint8_t { kSgarch, kEgarch, kGjr };

/// Order is fixed at (1,1).
struct GarchSpec {
  VarianceModel model = VarianceModel::kSgarch;
  Innovation innovation = Innovation::kNorm;

  /// "SGARCH-norm", "EGARCH-sstd", "GJR-GARCH-std", ...
  std::string label() const;
  bool has_gamma() const { return model != VarianceModel::kSgarch; }
  bool has_nu() const { return innovation != Innovation::kNorm; }
  bool has_xi() const { return innovation == Innovation::kSstd; }
  bool operator==(const GarchSpec&) const = default;
};

/// The nine specifications in reporting order.
std::vector<GarchSpec> all_garch_specs();
std::optional<GarchSpec> parse_garch_label(const std::string& label);

struct GarchParams {
  double mu = 0.0;
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;  // EGARCH and GJR only
  double nu = 8.0;     // STD and SSTD
  double xi = 1.0;     // SSTD

  InnovationShape shape(Innovation kind) const { return {kind, nu, xi}; }
};

/// Parameter invariants for the spec: positivity and stationarity bounds.
bool valid(const GarchSpec& spec, const GarchParams& params);

double sample_variance(std::span<const double> values);

/// sigma^2_t for t in [0, n), each computed from data before t, with
/// sigma^2_0 = `initial_variance`. Throws GarchError when sigma^2 leaves
/// (0, inf) and std::invalid_argument for invalid params.
std::vector<double> variance_recursion(const GarchSpec& spec, const GarchParams& params,
                                       std::span<const double> returns, double initial_variance);
/// Same, initialized at the sample variance of `returns`.
std::vector<double> variance_recursion(const GarchSpec& spec, const GarchParams& params,
                                       std::span<const double> returns);

/// -sum_t [ln f(z_t) - ln sigma_t], sigma^2_0 = sample variance of `returns`.
/// Returns +inf for invalid params or any non-finite term.
double neg_log_likelihood(const GarchSpec& spec, const GarchParams& params, std::span<const double> returns);

struct FitOptions {
  std::uint64_t seed = 7;
  std::size_t starts = 3;
  std::size_t max_evaluations = 20000;  // per start
  double tolerance = 1e-8;
  std::size_t min_returns = 1000;
};

struct GarchFit {
  GarchSpec spec;
  GarchParams params;
  double log_likelihood = 0.0;
  bool converged = false;
  std::string failure;             // empty when converged
  double initial_variance = 0.0;   // sigma^2_0 used by the fit and by forecasts
  std::vector<double> sigma;       // fitted sigma_t on the estimation sample
  std::size_t evaluations = 0;
  std::size_t observations = 0;
};

/// Maximum likelihood by multi-start simplex search over transformed parameters.
/// Never throws for data problems; those come back as a failed fit.
GarchFit fit_mle(const GarchSpec& spec, std::span<const double> returns, const FitOptions& options = {});

/// Maps an unconstrained vector to parameters, clamping each coordinate to
/// [-30, 30]. Exposed for tests.
std::size_t transformed_dimension(const GarchSpec& spec);
GarchParams from_transformed(const GarchSpec& spec, std::span<const double> u, double scale_variance);

/// One-step-ahead sigma_i for every i in [0, |returns|), rolled forward from
/// the fit's initial variance without re-estimation. Requires a converged fit.
std::vector<double> forecast_sigma(const GarchFit& fit, std::span<const double> returns);

using ClassProbabilities = std::array<double, 3>;  // (A, B, C)

/// Probabilities that the next price change is a drop of at least one tick,
/// no change, or a rise of at least one tick, given sigma_i and P_{i-1} in ticks.
/// Throws GarchError when prev_price_ticks <= 1 or sigma is not positive.
ClassProbabilities class_probabilities(const GarchSpec& spec, const GarchParams& params, double sigma,
                                       std::int64_t prev_price_ticks);
ClassProbabilities forecast_class_probs(const GarchFit& fit, double sigma, std::int64_t prev_price_ticks);

/// Class probabilities for every test target of `data`, in target order.
std::vector<ClassProbabilities> forecast_test_probs(const GarchFit& fit, const StockDataset& data);

/// Estimation returns of a dataset: those aligned with training targets.
std::span<const double> training_returns(const StockDataset& data);

std::string fit_to_json(const GarchFit& fit, const std::string& stock_id);
void write_class_probs_csv(std::ostream& out, std::span<const ClassProbabilities> probs,
                           std::size_t first_index);

}  // namespace uhf
