#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uhf/data.hpp"
#include "uhf/nn/layers.hpp"
#include "uhf/nn/parameters.hpp"

namespace uhf {

enum class ModelKind : std::uint8_t { kTcn, kTcnAttention, kLstm };

/// "TCN", "TCN_ATTENTION", "LSTM".
std::string model_kind_name(ModelKind kind);
std::optional<ModelKind> parse_model_kind(const std::string& name);

struct ModelConfig {
  ModelKind kind = ModelKind::kTcn;
  std::size_t blocks = 4;
  std::size_t kernel_size = 3;
  std::size_t channels = 64;
  /// Per-block dilations; empty means 1, 2, 4, ..., 2^(blocks-1).
  std::vector<std::size_t> dilations;
  double dropout = 0.1;
  std::size_t window = 64;
  std::size_t lstm_layers = 1;
  std::size_t lstm_hidden = 64;
  /// Attention projection width; 0 means `channels`.
  std::size_t attention_dim = 0;
  int num_classes = kNumClasses;

  bool is_tcn() const { return kind != ModelKind::kLstm; }
  std::vector<std::size_t> dilation_schedule() const;
  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
  bool shuffle = true;

  void validate() const;
};

struct LossRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainedModel {
  ModelConfig config;
  nn::ParameterSet params;
  std::vector<LossRecord> history;

  /// Mean batch loss per epoch, in epoch order.
  std::vector<double> epoch_losses() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Number of past steps (including the current one) that can influence a
/// TCN output: 1 + sum_i 2 (k - 1) d_i. Throws std::invalid_argument for LSTM.
std::size_t receptive_field(const ModelConfig& config);

/// Untrained model with parameters drawn deterministically from `seed`.
TrainedModel build(const ModelConfig& config, std::uint64_t seed);

/// Resolves a parameter path to a tape leaf.
using ParamBinder = std::function<nn::Var(const std::string&)>;

struct ForwardOutput {
  nn::Var logits;                         // [B, K]
  std::optional<nn::Var> attention;       // [B, T] for TCN_ATTENTION
  nn::Var trunk;                          // last hidden sequence [B, C, T]
};

/// Builds the forward graph for a [B, 5, T] input. Dropout is active iff
/// `dropout_rng` is non-null.
ForwardOutput forward(nn::Tape& tape, const ModelConfig& config, const ParamBinder& bind, nn::Var input,
                      std::mt19937_64* dropout_rng);

/// Class distributions for a [B, 5, T] batch with dropout disabled.
std::vector<std::array<double, kNumClasses>> predict_batch(const TrainedModel& model, const nn::Tensor& inputs);

/// [B, 5, W] one-hot inputs and targets for dataset samples [first, first+count).
nn::Tensor gather_inputs(const StockDataset& data, std::span<const std::size_t> sample_ids);

using TrainObserver = std::function<void(const LossRecord&)>;

/// Mini-batch Adam on the cross-entropy loss over the training samples only.
/// Throws TrainingError on a non-finite loss.
void train(TrainedModel& model, const StockDataset& data, const TrainConfig& config,
           const TrainObserver& observer = {});

struct Prediction {
  std::array<double, kNumClasses> probs{};
  PriceChangeLabel truth = PriceChangeLabel::kFlat;
};

/// One distribution per test sample, in order.
std::vector<Prediction> predict_test(const TrainedModel& model, const StockDataset& data);

}  // namespace uhf
