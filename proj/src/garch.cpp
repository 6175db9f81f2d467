#include "uhf/garch.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "json.hpp"
#include "uhf/optimize.hpp"

namespace uhf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kClamp = 30.0;

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

// Rolls the recursion and calls visit(t, epsilon_t, sigma2_t). Returns false as
// soon as sigma^2 leaves (0, inf).
template <typename Visit>
bool roll(const GarchSpec& spec, const GarchParams& p, std::span<const double> returns, double sigma2_0,
          double abs_moment, Visit&& visit) {
  double sigma2 = sigma2_0;
  double log_sigma2 = std::log(sigma2_0);
  for (std::size_t t = 0; t < returns.size(); ++t) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) return false;
    const double eps = returns[t] - p.mu;
    visit(t, eps, sigma2);
    switch (spec.model) {
      case VarianceModel::kSgarch:
        sigma2 = p.omega + p.alpha * eps * eps + p.beta * sigma2;
        break;
      case VarianceModel::kGjr:
        sigma2 = p.omega + (p.alpha + (eps < 0.0 ? p.gamma : 0.0)) * eps * eps + p.beta * sigma2;
        break;
      case VarianceModel::kEgarch: {
        const double z = eps / std::sqrt(sigma2);
        log_sigma2 = p.omega + p.alpha * z + p.gamma * (std::abs(z) - abs_moment) + p.beta * log_sigma2;
        sigma2 = std::exp(log_sigma2);
        break;
      }
    }
  }
  return true;
}

double abs_moment_for(const GarchSpec& spec, const GarchParams& p) {
  if (spec.model != VarianceModel::kEgarch) return 0.0;
  return InnovationLaw(p.shape(spec.innovation)).abs_moment();
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::vector<double> start_point(const GarchSpec& spec, double mean, double sd) {
  std::vector<double> u;
  u.push_back(mean / sd);
  switch (spec.model) {
    case VarianceModel::kSgarch:
      // persistence 0.9 split as alpha = 0.09, beta = 0.81; unconditional variance = sample
      u.push_back(std::log(0.1));
      u.push_back(logit(0.9));
      u.push_back(logit(0.1));
      break;
    case VarianceModel::kGjr:
      // alpha = 0.05, beta = 0.8, gamma / 2 = 0.05
      u.push_back(std::log(0.1));
      u.push_back(logit(0.9));
      u.push_back(0.0);
      u.push_back(std::log(16.0));
      break;
    case VarianceModel::kEgarch:
      u.push_back(0.0);
      u.push_back(0.0);
      u.push_back(0.1);
      u.push_back(logit(0.95));  // beta = 0.9
      break;
  }
  if (spec.has_nu()) u.push_back(std::log(6.0));
  if (spec.has_xi()) u.push_back(0.0);
  return u;
}

GarchFit failed(const GarchSpec& spec, std::size_t n, std::string reason) {
  GarchFit fit;
  fit.spec = spec;
  fit.observations = n;
  fit.failure = std::move(reason);
  return fit;
}

}  // namespace

std::string GarchSpec::label() const {
  std::string model_name;
  switch (model) {
    case VarianceModel::kSgarch:
      model_name = "SGARCH";
      break;
    case VarianceModel::kEgarch:
      model_name = "EGARCH";
      break;
    case VarianceModel::kGjr:
      model_name = "GJR-GARCH";
      break;
  }
  return model_name + "-" + innovation_label(innovation);
}

std::vector<GarchSpec> all_garch_specs() {
  std::vector<GarchSpec> specs;
  for (auto model : {VarianceModel::kSgarch, VarianceModel::kEgarch, VarianceModel::kGjr}) {
    for (auto innovation : {Innovation::kNorm, Innovation::kStd, Innovation::kSstd}) specs.push_back({model, innovation});
  }
  return specs;
}

std::optional<GarchSpec> parse_garch_label(const std::string& label) {
  for (const auto& spec : all_garch_specs()) {
    if (spec.label() == label) return spec;
  }
  return std::nullopt;
}

bool valid(const GarchSpec& spec, const GarchParams& p) {
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(p.mu) || !finite(p.omega) || !finite(p.alpha) || !finite(p.beta) || !finite(p.gamma)) return false;
  if (!admissible(p.shape(spec.innovation))) return false;
  switch (spec.model) {
    case VarianceModel::kSgarch:
      return p.omega > 0.0 && p.alpha >= 0.0 && p.beta >= 0.0 && p.alpha + p.beta < 1.0;
    case VarianceModel::kGjr:
      return p.omega > 0.0 && p.alpha >= 0.0 && p.beta >= 0.0 && p.alpha + p.gamma >= 0.0 &&
             p.alpha + p.beta + 0.5 * p.gamma < 1.0;
    case VarianceModel::kEgarch:
      return std::abs(p.beta) < 1.0;
  }
  return false;
}

double sample_variance(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double m = mean_of(values);
  double s = 0.0;
  for (double x : values) s += (x - m) * (x - m);
  return s / static_cast<double>(values.size());
}

std::vector<double> variance_recursion(const GarchSpec& spec, const GarchParams& params,
                                       std::span<const double> returns, double initial_variance) {
  if (!valid(spec, params)) throw std::invalid_argument("variance_recursion: invalid parameters for " + spec.label());
  std::vector<double> out(returns.size());
  const bool ok = roll(spec, params, returns, initial_variance, abs_moment_for(spec, params),
                       [&](std::size_t t, double, double s2) { out[t] = s2; });
  if (!ok) throw GarchError("variance recursion left (0, inf) for " + spec.label());
  return out;
}

std::vector<double> variance_recursion(const GarchSpec& spec, const GarchParams& params,
                                       std::span<const double> returns) {
  return variance_recursion(spec, params, returns, sample_variance(returns));
}

double neg_log_likelihood(const GarchSpec& spec, const GarchParams& params, std::span<const double> returns) {
  if (!valid(spec, params) || returns.empty()) return kInf;
  const double s2 = sample_variance(returns);
  if (!(s2 > 0.0)) return kInf;
  const InnovationLaw law(params.shape(spec.innovation));
  double total = 0.0;
  const bool ok = roll(spec, params, returns, s2, law.abs_moment(), [&](std::size_t, double eps, double sigma2) {
    total -= law.log_density(eps / std::sqrt(sigma2)) - 0.5 * std::log(sigma2);
  });
  if (!ok || !std::isfinite(total)) return kInf;
  return total;
}

std::size_t transformed_dimension(const GarchSpec& spec) {
  std::size_t n = 4;
  if (spec.has_gamma()) ++n;
  if (spec.has_nu()) ++n;
  if (spec.has_xi()) ++n;
  return n;
}

GarchParams from_transformed(const GarchSpec& spec, std::span<const double> raw, double scale_variance) {
  if (raw.size() != transformed_dimension(spec)) throw std::invalid_argument("from_transformed: wrong dimension");
  std::vector<double> u(raw.begin(), raw.end());
  for (double& v : u) v = std::clamp(v, -kClamp, kClamp);
  GarchParams p;
  const double sd = std::sqrt(scale_variance);
  p.mu = u[0] * sd;
  std::size_t k = 1;
  switch (spec.model) {
    case VarianceModel::kSgarch: {
      p.omega = scale_variance * std::exp(u[1]);
      const double persistence = logistic(u[2]);
      const double share = logistic(u[3]);
      p.alpha = persistence * share;
      p.beta = persistence * (1.0 - share);
      k = 4;
      break;
    }
    case VarianceModel::kGjr: {
      // persistence split over (alpha, beta, gamma/2) by a softmax with a fixed zero logit
      p.omega = scale_variance * std::exp(u[1]);
      const double persistence = logistic(u[2]);
      const double top = std::max({u[3], u[4], 0.0});
      const double ea = std::exp(u[3] - top), eb = std::exp(u[4] - top), eg = std::exp(-top);
      const double z = ea + eb + eg;
      p.alpha = persistence * ea / z;
      p.beta = persistence * eb / z;
      p.gamma = 2.0 * persistence * eg / z;
      k = 5;
      break;
    }
    case VarianceModel::kEgarch: {
      p.beta = 2.0 * logistic(u[4]) - 1.0;
      p.omega = (1.0 - p.beta) * (std::log(scale_variance) + u[1]);
      p.alpha = u[2];
      p.gamma = u[3];
      k = 5;
      break;
    }
  }
  if (spec.has_nu()) p.nu = 2.0 + std::exp(u[k++]);
  if (spec.has_xi()) p.xi = std::exp(u[k++]);
  return p;
}

GarchFit fit_mle(const GarchSpec& spec, std::span<const double> returns, const FitOptions& options) {
  const std::size_t n = returns.size();
  if (n < options.min_returns) {
    return failed(spec, n,
                  "insufficient data: " + std::to_string(n) + " returns < " + std::to_string(options.min_returns));
  }
  const double s2 = sample_variance(returns);
  if (!(s2 > 0.0) || !std::isfinite(s2)) return failed(spec, n, "degenerate variance");
  const double sd = std::sqrt(s2);

  auto objective = [&](const std::vector<double>& u) {
    return neg_log_likelihood(spec, from_transformed(spec, u, s2), returns);
  };
  NelderMeadOptions nm;
  nm.tolerance = options.tolerance;
  nm.max_evaluations = options.max_evaluations;

  const auto base = start_point(spec, mean_of(returns), sd);
  std::optional<NelderMeadResult> best;
  std::size_t evaluations = 0;
  double best_unconverged_diameter = kInf;
  bool any_finite = false;
  for (std::size_t s = 0; s < options.starts; ++s) {
    auto start = base;
    if (s > 0) {
      std::mt19937_64 rng(options.seed + 0x9e3779b97f4a7c15ULL * s);
      std::normal_distribution<double> jitter(0.0, 0.5);
      for (double& v : start) v += jitter(rng);
    }
    auto first = nelder_mead(objective, start, nm);
    evaluations += first.evaluations;
    // A restart from the first optimum guards against premature collapse.
    auto second = nelder_mead(objective, first.x, nm);
    evaluations += second.evaluations;
    auto& result = second.value <= first.value ? second : first;
    if (!std::isfinite(result.value)) continue;
    any_finite = true;
    if (!result.converged) {
      best_unconverged_diameter = std::min(best_unconverged_diameter, result.diameter);
      continue;
    }
    if (!best || result.value < best->value) best = result;
  }
  if (!best) {
    if (!any_finite) return failed(spec, n, "non-finite likelihood at every start");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", best_unconverged_diameter);
    return failed(spec, n, std::string("no start converged (smallest simplex diameter ") + buf + ")");
  }

  GarchFit fit;
  fit.spec = spec;
  fit.params = from_transformed(spec, best->x, s2);
  fit.log_likelihood = -best->value;
  fit.initial_variance = s2;
  fit.evaluations = evaluations;
  fit.observations = n;
  try {
    auto sigma2 = variance_recursion(spec, fit.params, returns, s2);
    fit.sigma.resize(n);
    for (std::size_t t = 0; t < n; ++t) fit.sigma[t] = std::sqrt(sigma2[t]);
  } catch (const std::exception& e) {
    return failed(spec, n, std::string("numerical failure: ") + e.what());
  }
  if (std::any_of(fit.sigma.begin(), fit.sigma.end(), [](double s) { return !(s > 0.0); })) {
    return failed(spec, n, "numerical failure: sigma underflow");
  }
  fit.converged = true;
  return fit;
}

std::vector<double> forecast_sigma(const GarchFit& fit, std::span<const double> returns) {
  if (!fit.converged) throw GarchError("forecast from a failed fit (" + fit.spec.label() + ")");
  auto sigma2 = variance_recursion(fit.spec, fit.params, returns, fit.initial_variance);
  for (double& v : sigma2) v = std::sqrt(v);
  return sigma2;
}

namespace {

ClassProbabilities probabilities_under(const InnovationLaw& law, const GarchParams& params, double sigma,
                                      std::int64_t prev_price_ticks) {
  if (prev_price_ticks <= 1) throw GarchError("previous price must exceed one tick");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw GarchError("sigma must be positive and finite");
  const double price = static_cast<double>(prev_price_ticks);
  const double r_low = std::log1p(-1.0 / price);
  const double r_high = std::log1p(1.0 / price);
  const double a = law.cdf((r_low - params.mu) / sigma);
  const double c = law.survival((r_high - params.mu) / sigma);
  return {a, std::max(0.0, 1.0 - a - c), c};
}

}  // namespace

ClassProbabilities class_probabilities(const GarchSpec& spec, const GarchParams& params, double sigma,
                                       std::int64_t prev_price_ticks) {
  return probabilities_under(InnovationLaw(params.shape(spec.innovation)), params, sigma, prev_price_ticks);
}

ClassProbabilities forecast_class_probs(const GarchFit& fit, double sigma, std::int64_t prev_price_ticks) {
  if (!fit.converged) throw GarchError("forecast from a failed fit (" + fit.spec.label() + ")");
  return class_probabilities(fit.spec, fit.params, sigma, prev_price_ticks);
}

std::span<const double> training_returns(const StockDataset& data) {
  return std::span<const double>(data.returns).first(std::min(data.first_test_target(), data.returns.size()));
}

std::vector<ClassProbabilities> forecast_test_probs(const GarchFit& fit, const StockDataset& data) {
  const auto sigma = forecast_sigma(fit, data.returns);
  const InnovationLaw law(fit.params.shape(fit.spec.innovation));
  std::vector<ClassProbabilities> out;
  out.reserve(data.num_test);
  for (std::size_t i = data.first_test_target(); i < data.labels.size(); ++i) {
    out.push_back(probabilities_under(law, fit.params, sigma[i], data.ticks[i].price_ticks));
  }
  return out;
}

std::string fit_to_json(const GarchFit& fit, const std::string& stock_id) {
  nlohmann::ordered_json j;
  j["stock_id"] = stock_id;
  j["spec"] = fit.spec.label();
  j["status"] = fit.converged ? "converged" : "failed";
  j["reason"] = fit.converged ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(fit.failure);
  j["observations"] = fit.observations;
  j["evaluations"] = fit.evaluations;
  if (fit.converged) {
    nlohmann::ordered_json p;
    p["mu"] = fit.params.mu;
    p["omega"] = fit.params.omega;
    p["alpha"] = fit.params.alpha;
    p["beta"] = fit.params.beta;
    if (fit.spec.has_gamma()) p["gamma"] = fit.params.gamma;
    if (fit.spec.has_nu()) p["nu"] = fit.params.nu;
    if (fit.spec.has_xi()) p["xi"] = fit.params.xi;
    j["params"] = p;
    j["log_likelihood"] = fit.log_likelihood;
    j["initial_variance"] = fit.initial_variance;
  } else {
    j["params"] = nullptr;
    j["log_likelihood"] = nullptr;
  }
  return j.dump(2);
}

void write_class_probs_csv(std::ostream& out, std::span<const ClassProbabilities> probs, std::size_t first_index) {
  out << "index,p_a,p_b,p_c\n";
  out.precision(17);
  for (std::size_t k = 0; k < probs.size(); ++k) {
    out << first_index + k << ',' << probs[k][0] << ',' << probs[k][1] << ',' << probs[k][2] << '\n';
  }
}

}  // namespace uhf
