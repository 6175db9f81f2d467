#include "uhf/model_io.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "uhf/nn/checkpoint.hpp"

namespace uhf {

using nlohmann::ordered_json;

ordered_json to_json(const ModelConfig& c) {
  ordered_json j;
  j["kind"] = model_kind_name(c.kind);
  j["blocks"] = c.blocks;
  j["kernel_size"] = c.kernel_size;
  j["channels"] = c.channels;
  j["dilations"] = c.dilation_schedule();
  j["dropout"] = c.dropout;
  j["window"] = c.window;
  j["lstm_layers"] = c.lstm_layers;
  j["lstm_hidden"] = c.lstm_hidden;
  j["attention_dim"] = c.attention_dim;
  j["num_classes"] = c.num_classes;
  return j;
}

ordered_json to_json(const TrainConfig& c) {
  ordered_json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["seed"] = c.seed;
  j["shuffle"] = c.shuffle;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("kind")) {
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown model kind " + j.at("kind").dump());
    c.kind = *kind;
  }
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  read("blocks", c.blocks);
  read("kernel_size", c.kernel_size);
  read("channels", c.channels);
  read("dilations", c.dilations);
  read("dropout", c.dropout);
  read("window", c.window);
  read("lstm_layers", c.lstm_layers);
  read("lstm_hidden", c.lstm_hidden);
  read("attention_dim", c.attention_dim);
  read("num_classes", c.num_classes);
  return c;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  read("epochs", c.epochs);
  read("batch_size", c.batch_size);
  read("learning_rate", c.learning_rate);
  read("seed", c.seed);
  read("shuffle", c.shuffle);
  return c;
}

void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& history) {
  out << "epoch,step,loss\n" << std::setprecision(17);
  for (const auto& r : history) out << r.epoch << ',' << r.step << ',' << r.loss << '\n';
}

std::vector<LossRecord> read_loss_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "epoch,step,loss") throw std::runtime_error("loss csv: bad header");
  std::vector<LossRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    LossRecord r;
    char c1 = 0, c2 = 0;
    if (!(row >> r.epoch >> c1 >> r.step >> c2 >> r.loss) || c1 != ',' || c2 != ',') {
      throw std::runtime_error("loss csv: bad row '" + line + "'");
    }
    out.push_back(r);
  }
  return out;
}

void save_model(const std::string& path, const TrainedModel& model, const TrainConfig& train,
                std::uint64_t init_seed) {
  nn::write_checkpoint(path, model.params);
  ordered_json j;
  j["checkpoint"] = path.substr(path.find_last_of('/') + 1);
  j["checkpoint_version"] = nn::kCheckpointVersion;
  j["init_seed"] = init_seed;
  j["parameters"] = model.params.scalar_count();
  j["model"] = to_json(model.config);
  j["train"] = to_json(train);
  std::ofstream out(path + ".json");
  out << j.dump(2) << '\n';
  if (!out) throw nn::CheckpointError("cannot write sidecar " + path + ".json");
}

SavedModel load_model(const std::string& path) {
  std::ifstream in(path + ".json");
  if (!in) throw nn::CheckpointError("cannot open sidecar " + path + ".json");
  const auto j = nlohmann::json::parse(in);
  SavedModel saved;
  saved.init_seed = j.at("init_seed").get<std::uint64_t>();
  saved.train = train_config_from_json(j.at("train"));
  const auto config = model_config_from_json(j.at("model"));
  saved.model = build(config, saved.init_seed);
  auto stored = nn::read_checkpoint(path);
  if (stored.size() != saved.model.params.size()) {
    throw nn::CheckpointError("checkpoint holds " + std::to_string(stored.size()) + " tensors, model expects " +
                              std::to_string(saved.model.params.size()));
  }
  for (auto& [name, p] : saved.model.params) {
    if (!stored.contains(name)) throw nn::CheckpointError("checkpoint lacks tensor " + name);
    const auto& value = stored.at(name);
    if (value.shape() != p.value.shape()) {
      throw nn::CheckpointError("tensor " + name + " has shape " + nn::shape_string(value.shape()) + ", expected " +
                                nn::shape_string(p.value.shape()));
    }
    p.value = value;
  }
  return saved;
}

}  // namespace uhf
