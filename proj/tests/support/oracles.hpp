#pragma once

// Test-only reference computations. Nothing here calls into the code paths
// it is used to check except through the public forward API.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "uhf/model.hpp"
#include "uhf/nn/layers.hpp"
#include "uhf/nn/ops.hpp"
#include "uhf/nn/parameters.hpp"
#include "uhf/nn/tape.hpp"

namespace uhf::testing {

using LossBuilder = std::function<nn::Var(nn::Tape&, const ParamBinder&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

/// Compares reverse-mode gradients against central differences for every
/// scalar of every parameter. Relative error uses max(|a|, |n|, 1e-6).
inline GradCheckResult gradcheck(nn::ParameterSet& params, const LossBuilder& build, double h = 1e-5) {
  params.clear_grads();
  {
    nn::Tape tape;
    ParamBinder bind = [&](const std::string& p) { return tape.parameter(params.at(p)); };
    tape.backward(build(tape, bind));
  }
  auto eval = [&] {
    nn::Tape tape;
    ParamBinder bind = [&](const std::string& p) { return tape.reference(params.at(p)); };
    return tape.value(build(tape, bind))[0];
  };
  GradCheckResult result;
  for (auto& [path, p] : params) {
    auto values = p.value.values();
    const std::vector<double> analytic(p.value.grad().begin(), p.value.grad().end());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = eval();
      values[i] = saved - h;
      const double down = eval();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = path + "[" + std::to_string(i) + "] analytic=" + std::to_string(analytic[i]) +
                       " numeric=" + std::to_string(numeric);
      }
    }
  }
  params.clear_grads();
  return result;
}

/// Direct causal dilated convolution by explicit zero padding.
inline std::vector<double> brute_causal_conv(const std::vector<double>& x, std::size_t cin, std::size_t time,
                                             const std::vector<double>& w, std::size_t cout, std::size_t k,
                                             const std::vector<double>& bias, std::size_t d) {
  const std::size_t pad = (k - 1) * d;
  std::vector<double> padded(cin * (time + pad), 0.0);
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t t = 0; t < time; ++t) padded[c * (time + pad) + pad + t] = x[c * time + t];
  }
  std::vector<double> out(cout * time, 0.0);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t t = 0; t < time; ++t) {
      double s = bias[co];
      for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t j = 0; j < k; ++j) s += w[(co * cin + ci) * k + j] * padded[ci * (time + pad) + t + j * d];
      }
      out[co * time + t] = s;
    }
  }
  return out;
}

/// Stack of `blocks` residual blocks (kernel k, dilations 2^i) with random
/// weights and positive biases. Returns the number of trailing input columns
/// whose gradient with respect to the last output column is nonzero.
inline std::size_t measured_receptive_field(std::size_t k, std::size_t blocks, std::uint64_t seed,
                                            std::size_t channels = 3) {
  std::mt19937_64 rng(seed);
  nn::ParameterSet params;
  for (std::size_t b = 0; b < blocks; ++b) {
    for (const char* conv : {"conv1", "conv2"}) {
      const std::string base = "b" + std::to_string(b) + "." + conv;
      params.add(base + ".w", nn::uniform_tensor({channels, channels, k}, 1.0, rng));
      nn::Tensor bias({channels});
      for (double& v : bias.values()) v = 0.5 + nn::uniform01(rng);
      params.add(base + ".b", std::move(bias));
    }
  }
  const std::size_t field_upper = 1 + 2 * (k - 1) * ((std::size_t{1} << blocks) - 1);
  const std::size_t time = field_upper + 16;
  nn::Tensor input = nn::uniform_tensor({1, channels, time}, 1.0, rng);
  for (double& v : input.values()) v = 0.5 + 0.5 * v;  // positive, keeps units active
  nn::Tape tape;
  nn::Var x = tape.parameter(input);
  nn::Var h = x;
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::string p = "b" + std::to_string(b) + ".";
    nn::ResidualBlockVars block{{tape.reference(params.at(p + "conv1.w")), tape.reference(params.at(p + "conv1.b"))},
                                {tape.reference(params.at(p + "conv2.w")), tape.reference(params.at(p + "conv2.b"))},
                                std::nullopt};
    h = nn::residual_block(tape, h, block, std::size_t{1} << b, 0.0, nullptr);
  }
  tape.backward(nn::sum(tape, nn::last_step(tape, h)));
  const auto g = input.grad();
  std::size_t earliest = time;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < time; ++t) {
      if (g[c * time + t] != 0.0) earliest = std::min(earliest, t);
    }
  }
  return time - earliest;
}

}  // namespace uhf::testing
