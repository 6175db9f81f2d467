#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "uhf/model.hpp"

namespace uhf {

nlohmann::ordered_json to_json(const ModelConfig& config);
nlohmann::ordered_json to_json(const TrainConfig& config);
/// Missing keys keep their defaults; unknown model kinds throw std::invalid_argument.
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Header `epoch,step,loss`, losses at 17 significant digits.
void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& history);
std::vector<LossRecord> read_loss_csv(std::istream& in);

struct SavedModel {
  TrainedModel model;
  TrainConfig train;
  std::uint64_t init_seed = 0;
};

/// Writes the parameter container to `path` and its configuration sidecar to
/// `path + ".json"`.
void save_model(const std::string& path, const TrainedModel& model, const TrainConfig& train,
                std::uint64_t init_seed);

/// Reads both files back. Throws nn::CheckpointError when the stored tensors do
/// not match the parameter layout implied by the sidecar.
SavedModel load_model(const std::string& path);

}  // namespace uhf
