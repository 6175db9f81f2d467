#include "uhf/nn/parameters.hpp"

#include <cmath>
#include <stdexcept>

namespace uhf::nn {

Tensor& ParameterSet::add(const std::string& path, Tensor init) {
  auto [it, inserted] = params_.try_emplace(path);
  if (!inserted) throw std::invalid_argument("duplicate parameter path: " + path);
  it->second.value = std::move(init);
  it->second.first_moment.assign(it->second.value.size(), 0.0);
  it->second.second_moment.assign(it->second.value.size(), 0.0);
  return it->second.value;
}

Tensor& ParameterSet::at(const std::string& path) {
  auto it = params_.find(path);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + path);
  return it->second.value;
}

const Tensor& ParameterSet::at(const std::string& path) const {
  auto it = params_.find(path);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + path);
  return it->second.value;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void ParameterSet::clear_grads() {
  for (auto& [_, p] : params_) p.value.clear_grad();
}

std::map<std::string, double> ParameterSet::value_norms() const {
  std::map<std::string, double> out;
  for (const auto& [path, p] : params_) {
    double s = 0.0;
    for (double v : p.value.values()) s += v * v;
    out[path] = std::sqrt(s);
  }
  return out;
}

void adam_step(ParameterSet& params, const AdamConfig& config) {
  for (auto& [path, p] : params) {
    if (!p.value.has_grad()) throw std::logic_error("adam_step: parameter has no gradient: " + path);
  }
  for (auto& [path, p] : params) {
    ++p.step;
    const double t = static_cast<double>(p.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    auto g = p.value.grad();
    auto x = p.value.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      p.first_moment[i] = config.beta1 * p.first_moment[i] + (1.0 - config.beta1) * g[i];
      p.second_moment[i] = config.beta2 * p.second_moment[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = p.first_moment[i] / c1;
      const double v_hat = p.second_moment[i] / c2;
      x[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
    p.value.clear_grad();
  }
}

}  // namespace uhf::nn
