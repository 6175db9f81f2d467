#include "uhf/nn/layers.hpp"

#include <cmath>

namespace uhf::nn {

Var residual_block(Tape& tape, Var input, const ResidualBlockVars& block, std::size_t dilation, double dropout_rate,
                   std::mt19937_64* dropout_rng) {
  const std::size_t cin = tape.shape(input).rbegin()[1];
  const std::size_t cout = tape.shape(block.conv2.kernel)[0];
  if (cin != cout && !block.skip) throw ShapeError("residual_block: channel change needs a 1x1 skip projection");

  Var h = causal_conv1d(tape, input, block.conv1.kernel, block.conv1.bias, dilation);
  h = dropout(tape, relu(tape, h), dropout_rate, dropout_rng);
  h = causal_conv1d(tape, h, block.conv2.kernel, block.conv2.bias, dilation);
  h = dropout(tape, relu(tape, h), dropout_rate, dropout_rng);
  const Var shortcut = block.skip ? causal_conv1d(tape, input, block.skip->kernel, block.skip->bias, 1) : input;
  return relu(tape, add(tape, h, shortcut));
}

Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = (2.0 * uniform01(rng) - 1.0) * bound;
  return t;
}

Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  return uniform_tensor(std::move(shape), std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
}

}  // namespace uhf::nn
