#pragma once

#include <optional>
#include <random>

#include "uhf/nn/ops.hpp"

namespace uhf::nn {

struct ConvVars {
  Var kernel;  // [C_out, C_in, k]
  Var bias;    // [C_out]
};

struct ResidualBlockVars {
  ConvVars conv1;
  ConvVars conv2;
  /// 1x1 projection on the skip path; required iff C_in != C_out.
  std::optional<ConvVars> skip;
};

/// relu(F(x) + S(x)), F = conv -> relu -> dropout -> conv -> relu -> dropout,
/// both convolutions causal with the given dilation; S = identity or 1x1 conv.
Var residual_block(Tape& tape, Var input, const ResidualBlockVars& block, std::size_t dilation, double dropout_rate,
                   std::mt19937_64* dropout_rng);

/// U(-sqrt(6 / fan_in), sqrt(6 / fan_in)).
Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng);
/// U(-bound, bound).
Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng);

}  // namespace uhf::nn
