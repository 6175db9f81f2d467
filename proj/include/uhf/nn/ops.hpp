#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "uhf/nn/tape.hpp"
#include "uhf/nn/tensor.hpp"

namespace uhf::nn {

/// Probability floor inside the logarithm of the cross-entropy loss.
constexpr double kProbabilityFloor = 1e-12;

// Sequence tensors are [B, C, T] (a rank-2 [C, T] input is treated as B = 1
// and the output keeps rank 2).

/// out[c, t] = bias[c] + sum_{c', j} kernel[c, c', j] * x[c', t - (k-1-j) * d],
/// with x at negative times taken as zero. Output length equals input length.
Var causal_conv1d(Tape& tape, Var input, Var kernel, Var bias, std::size_t dilation);

Var relu(Tape& tape, Var x);
Var add(Tape& tape, Var a, Var b);
Var sum(Tape& tape, Var x);

/// Inverted dropout. Returns `x` unchanged when `rng` is null or rate is 0.
Var dropout(Tape& tape, Var x, double rate, std::mt19937_64* rng);

/// [B, C, T] -> [B, C], the column at T-1.
Var last_step(Tape& tape, Var x);

/// y = x W^T + b for x [B, C_in], W [C_out, C_in], b [C_out].
Var linear(Tape& tape, Var x, Var weight, Var bias);

struct AttentionResult {
  Var context;  // [B, C]
  Var weights;  // [B, T], not differentiable
};

/// Additive attention pooling over time:
/// e_t = v . tanh(W h_t), a = softmax(e), context = sum_t a_t h_t.
/// `projection` is [A, C], `score` is [A].
AttentionResult attention_pool(Tape& tape, Var hidden, Var projection, Var score);

/// Single-layer LSTM with zero initial state, gate order (input, forget,
/// cell, output). input [B, C, T]; w_input [4H, C]; w_hidden [4H, H];
/// bias [4H]. Returns the hidden sequence [B, H, T].
Var lstm(Tape& tape, Var input, Var w_input, Var w_hidden, Var bias);

/// Mean over the batch of -ln(max(softmax(logits)[target], floor)).
/// logits [B, K]; gradient w.r.t. logits is (pi - y) / B.
Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const int> targets);

// ---- tape-free helpers ---------------------------------------------------------

/// Row-wise stable softmax of a [K] or [B, K] tensor. Throws on non-finite logits.
Tensor softmax(const Tensor& logits);
void softmax_inplace(std::span<double> row);

/// Cross-entropy of explicit distributions against one-hot targets:
/// L = -(1/n) sum_i sum_k y_ik ln(max(pi_ik, floor)).
double cross_entropy(std::span<const std::vector<double>> predictions,
                     std::span<const std::vector<double>> one_hot_targets);

/// Uniform double in [0, 1) from the top 53 bits of the generator output.
double uniform01(std::mt19937_64& rng);

}  // namespace uhf::nn
