#include "uhf/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace uhf {

using nn::Tape;
using nn::Tensor;
using nn::Var;

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kTcn:
      return "TCN";
    case ModelKind::kTcnAttention:
      return "TCN_ATTENTION";
    case ModelKind::kLstm:
      return "LSTM";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(const std::string& name) {
  if (name == "TCN") return ModelKind::kTcn;
  if (name == "TCN_ATTENTION") return ModelKind::kTcnAttention;
  if (name == "LSTM") return ModelKind::kLstm;
  return std::nullopt;
}

std::vector<std::size_t> ModelConfig::dilation_schedule() const {
  if (!dilations.empty()) return dilations;
  std::vector<std::size_t> out(blocks);
  for (std::size_t i = 0; i < blocks; ++i) out[i] = std::size_t{1} << i;
  return out;
}

void ModelConfig::validate() const {
  if (num_classes != kNumClasses) throw std::invalid_argument("model must have 5 output classes");
  if (window == 0) throw std::invalid_argument("window must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (is_tcn()) {
    if (blocks == 0 || kernel_size == 0 || channels == 0) {
      throw std::invalid_argument("TCN needs positive blocks, kernel size and channels");
    }
    if (!dilations.empty() && dilations.size() != blocks) {
      throw std::invalid_argument("dilation schedule length must equal the block count");
    }
    for (auto d : dilation_schedule()) {
      if (d == 0) throw std::invalid_argument("dilations must be >= 1");
    }
    const std::size_t field = receptive_field(*this);
    if (field > window) {
      throw std::invalid_argument("receptive field " + std::to_string(field) + " exceeds window " +
                                  std::to_string(window));
    }
  } else if (lstm_layers == 0 || lstm_hidden == 0) {
    throw std::invalid_argument("LSTM needs positive layers and hidden size");
  }
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || !(learning_rate > 0.0)) {
    throw std::invalid_argument("epochs, batch size and learning rate must be positive");
  }
}

std::vector<double> TrainedModel::epoch_losses() const {
  std::vector<double> sums, counts;
  for (const auto& r : history) {
    if (r.epoch >= sums.size()) {
      sums.resize(r.epoch + 1, 0.0);
      counts.resize(r.epoch + 1, 0.0);
    }
    sums[r.epoch] += r.loss;
    counts[r.epoch] += 1.0;
  }
  for (std::size_t e = 0; e < sums.size(); ++e) sums[e] /= counts[e];
  return sums;
}

std::size_t receptive_field(const ModelConfig& config) {
  if (!config.is_tcn()) throw std::invalid_argument("receptive field is unbounded for LSTM models");
  std::size_t field = 1;
  for (auto d : config.dilation_schedule()) field += 2 * (config.kernel_size - 1) * d;
  return field;
}

namespace {

std::string block_path(std::size_t i, const char* leaf) { return "block" + std::to_string(i) + "." + leaf; }
std::string lstm_path(std::size_t i, const char* leaf) { return "lstm" + std::to_string(i) + "." + leaf; }

double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

constexpr double kHeadScale = 0.1;

}  // namespace

TrainedModel build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  TrainedModel model;
  model.config = config;
  std::mt19937_64 rng(seed);
  auto& p = model.params;
  const std::size_t k = config.kernel_size;
  const std::size_t classes = static_cast<std::size_t>(config.num_classes);
  std::size_t head_in = 0;

  if (config.is_tcn()) {
    const std::size_t c = config.channels;
    p.add("input.weight", nn::he_uniform({c, kNumClasses, 1}, kNumClasses, rng));
    p.add("input.bias", Tensor({c}));
    for (std::size_t i = 0; i < config.blocks; ++i) {
      p.add(block_path(i, "conv1.weight"), nn::he_uniform({c, c, k}, c * k, rng));
      p.add(block_path(i, "conv1.bias"), Tensor({c}));
      p.add(block_path(i, "conv2.weight"), nn::he_uniform({c, c, k}, c * k, rng));
      p.add(block_path(i, "conv2.bias"), Tensor({c}));
    }
    if (config.kind == ModelKind::kTcnAttention) {
      const std::size_t a = config.attention_dim == 0 ? c : config.attention_dim;
      p.add("attention.projection", nn::uniform_tensor({a, c}, fan_in_bound(c), rng));
      p.add("attention.score", nn::uniform_tensor({a}, fan_in_bound(a), rng));
    }
    head_in = c;
  } else {
    const std::size_t h = config.lstm_hidden;
    std::size_t in = kNumClasses;
    for (std::size_t l = 0; l < config.lstm_layers; ++l) {
      p.add(lstm_path(l, "w_input"), nn::uniform_tensor({4 * h, in}, fan_in_bound(h), rng));
      p.add(lstm_path(l, "w_hidden"), nn::uniform_tensor({4 * h, h}, fan_in_bound(h), rng));
      Tensor bias({4 * h});
      for (std::size_t j = h; j < 2 * h; ++j) bias[j] = 1.0;  // forget gate
      p.add(lstm_path(l, "bias"), std::move(bias));
      in = h;
    }
    head_in = h;
  }
  // a small head keeps the initial output close to uniform
  p.add("head.weight", nn::uniform_tensor({classes, head_in}, kHeadScale * fan_in_bound(head_in), rng));
  p.add("head.bias", Tensor({classes}));
  return model;
}

ForwardOutput forward(Tape& tape, const ModelConfig& config, const ParamBinder& bind, Var input,
                      std::mt19937_64* dropout_rng) {
  ForwardOutput out;
  Var h = input;
  if (config.is_tcn()) {
    h = nn::causal_conv1d(tape, h, bind("input.weight"), bind("input.bias"), 1);
    const auto dilations = config.dilation_schedule();
    for (std::size_t i = 0; i < config.blocks; ++i) {
      nn::ResidualBlockVars block{{bind(block_path(i, "conv1.weight")), bind(block_path(i, "conv1.bias"))},
                                  {bind(block_path(i, "conv2.weight")), bind(block_path(i, "conv2.bias"))},
                                  std::nullopt};
      h = nn::residual_block(tape, h, block, dilations[i], config.dropout, dropout_rng);
    }
    out.trunk = h;
    Var features{};
    if (config.kind == ModelKind::kTcnAttention) {
      const auto att = nn::attention_pool(tape, h, bind("attention.projection"), bind("attention.score"));
      features = att.context;
      out.attention = att.weights;
    } else {
      features = nn::last_step(tape, h);
    }
    out.logits = nn::linear(tape, features, bind("head.weight"), bind("head.bias"));
  } else {
    for (std::size_t l = 0; l < config.lstm_layers; ++l) {
      h = nn::lstm(tape, h, bind(lstm_path(l, "w_input")), bind(lstm_path(l, "w_hidden")), bind(lstm_path(l, "bias")));
    }
    out.trunk = h;
    out.logits = nn::linear(tape, nn::last_step(tape, h), bind("head.weight"), bind("head.bias"));
  }
  return out;
}

std::vector<std::array<double, kNumClasses>> predict_batch(const TrainedModel& model, const Tensor& inputs) {
  Tape tape;
  const auto& params = model.params;
  ParamBinder bind = [&](const std::string& path) { return tape.reference(params.at(path)); };
  const Var in = tape.reference(inputs);
  const auto out = forward(tape, model.config, bind, in, nullptr);
  const Tensor probs = nn::softmax(tape.value(out.logits));
  const std::size_t batch = probs.dim(0);
  std::vector<std::array<double, kNumClasses>> result(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(probs.data() + n * kNumClasses, kNumClasses, result[n].begin());
  }
  return result;
}

Tensor gather_inputs(const StockDataset& data, std::span<const std::size_t> sample_ids) {
  const std::size_t w = data.window;
  Tensor inputs({sample_ids.size(), kNumClasses, w});
  for (std::size_t n = 0; n < sample_ids.size(); ++n) {
    data.encode_sample(sample_ids[n], inputs.data() + n * kNumClasses * w);
  }
  return inputs;
}

namespace {

std::string diagnostics(const nn::ParameterSet& params) {
  std::ostringstream os;
  for (const auto& [path, norm] : params.value_norms()) os << ' ' << path << '=' << norm;
  return os.str();
}

}  // namespace

void train(TrainedModel& model, const StockDataset& data, const TrainConfig& config, const TrainObserver& observer) {
  config.validate();
  if (data.num_train == 0) throw std::invalid_argument("training set is empty");
  if (data.window != model.config.window) {
    throw std::invalid_argument("dataset window " + std::to_string(data.window) + " does not match model window " +
                                std::to_string(model.config.window));
  }
  std::mt19937_64 order_rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(data.num_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const nn::AdamConfig adam{config.learning_rate};
  std::size_t step = 0;
  std::vector<int> targets;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - first);
      const std::span<const std::size_t> ids(order.data() + first, count);
      targets.resize(count);
      for (std::size_t n = 0; n < count; ++n) targets[n] = to_int(data.target(ids[n]));

      Tape tape;
      ParamBinder bind = [&](const std::string& path) { return tape.parameter(model.params.at(path)); };
      const Var in = tape.constant(gather_inputs(data, ids));
      auto fail = [&](const std::string& what) {
        return TrainingError(what + " at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(first / config.batch_size) + "; parameter norms:" +
                             diagnostics(model.params));
      };
      Var loss{};
      try {
        const auto out = forward(tape, model.config, bind, in, model.config.dropout > 0.0 ? &dropout_rng : nullptr);
        loss = nn::softmax_cross_entropy(tape, out.logits, targets);
      } catch (const std::domain_error& e) {
        throw fail(e.what());
      }
      const double value = tape.value(loss)[0];
      if (!std::isfinite(value)) throw fail("non-finite loss");
      tape.backward(loss);
      nn::adam_step(model.params, adam);
      const LossRecord rec{epoch, step++, value};
      model.history.push_back(rec);
      if (observer) observer(rec);
    }
  }
}

std::vector<Prediction> predict_test(const TrainedModel& model, const StockDataset& data) {
  if (data.window != model.config.window) {
    throw std::invalid_argument("dataset window " + std::to_string(data.window) + " does not match model window " +
                                std::to_string(model.config.window));
  }
  constexpr std::size_t kChunk = 512;
  std::vector<Prediction> out;
  out.reserve(data.num_test);
  std::vector<std::size_t> ids;
  for (std::size_t first = 0; first < data.num_test; first += kChunk) {
    const std::size_t count = std::min(kChunk, data.num_test - first);
    ids.resize(count);
    std::iota(ids.begin(), ids.end(), data.num_train + first);
    const auto probs = predict_batch(model, gather_inputs(data, ids));
    for (std::size_t n = 0; n < count; ++n) out.push_back({probs[n], data.target(ids[n])});
  }
  return out;
}

}  // namespace uhf
