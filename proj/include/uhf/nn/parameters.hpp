#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "uhf/nn/tensor.hpp"

namespace uhf::nn {

struct Parameter {
  Tensor value;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
};

/// Named parameters in lexicographic path order, each with Adam state.
class ParameterSet {
 public:
  /// Throws std::invalid_argument on a duplicate path.
  Tensor& add(const std::string& path, Tensor init);
  Tensor& at(const std::string& path);
  const Tensor& at(const std::string& path) const;
  bool contains(const std::string& path) const { return params_.count(path) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void clear_grads();
  /// Euclidean norm of each parameter's values, for diagnostics.
  std::map<std::string, double> value_norms() const;

 private:
  std::map<std::string, Parameter> params_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update on every parameter, then clears gradients.
/// Throws std::logic_error if any parameter has no gradient buffer.
void adam_step(ParameterSet& params, const AdamConfig& config);

}  // namespace uhf::nn
