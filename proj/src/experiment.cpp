#include "uhf/experiment.hpp"

#include <glob.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "uhf/model_io.hpp"

namespace uhf {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---- small helpers -------------------------------------------------------------

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_deep_model(const std::string& name) { return parse_model_kind(name).has_value(); }

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag) { return splitmix64(seed ^ fnv1a(tag)); }

/// File-system-safe rendering of a stock id or model label.
std::string safe_name(const std::string& s) {
  std::string out = s;
  for (auto& c : out) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

template <typename T>
T decode(const std::string& key, const std::string& v);

template <typename T>
  requires std::is_arithmetic_v<T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size()) throw ConfigError(key + ": cannot parse '" + v + "'");
  return out;
}

template <>
std::size_t decode<std::size_t>(const std::string& key, const std::string& v) {
  return parse_number<std::size_t>(key, v);
}
template <>
double decode<double>(const std::string& key, const std::string& v) {
  return parse_number<double>(key, v);
}
template <>
bool decode<bool>(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}
template <>
std::string decode<std::string>(const std::string&, const std::string& v) {
  return v;
}
template <>
std::vector<std::string> decode<std::vector<std::string>>(const std::string&, const std::string& v) {
  return split_list(v);
}
template <>
std::vector<std::size_t> decode<std::vector<std::size_t>>(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(v)) out.push_back(parse_number<std::size_t>(key, item));
  return out;
}

std::string encode(std::size_t v) { return std::to_string(v); }
std::string encode(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
std::string encode(bool v) { return v ? "true" : "false"; }
std::string encode(const std::string& v) { return v; }
std::string encode(const std::vector<std::string>& v) { return join(v); }
std::string encode(const std::vector<std::size_t>& v) {
  std::vector<std::string> s;
  for (auto x : v) s.push_back(std::to_string(x));
  return join(s);
}

struct Setting {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
  bool canonical = true;
};

template <typename T, typename Field>
Setting setting(std::string key, Field field, bool canonical = true) {
  return {key, [key, field](ExperimentConfig& c, const std::string& v) { field(c) = decode<T>(key, v); },
          [field](const ExperimentConfig& c) { return encode(field(c)); }, canonical};
}

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = [] {
    std::vector<Setting> t{
        setting<double>("data.alpha", [](auto& c) -> auto& { return c.sgarch.alpha; }),
        setting<double>("data.beta", [](auto& c) -> auto& { return c.sgarch.beta; }),
        setting<std::vector<std::string>>("data.files", [](auto& c) -> auto& { return c.files; }),
        setting<std::size_t>("data.length", [](auto& c) -> auto& { return c.length; }),
        setting<std::size_t>("data.max_ticks", [](auto& c) -> auto& { return c.max_ticks; }),
        setting<double>("data.noise", [](auto& c) -> auto& { return c.rule_noise; }),
        setting<double>("data.omega", [](auto& c) -> auto& { return c.sgarch.omega; }),
        setting<std::size_t>("data.stocks", [](auto& c) -> auto& { return c.stocks; }),
        setting<std::string>("data.synthetic", [](auto& c) -> auto& { return c.synthetic; }),
        setting<double>("data.train_ratio", [](auto& c) -> auto& { return c.train_ratio; }),
        setting<std::size_t>("garch.max_evaluations", [](auto& c) -> auto& { return c.garch.max_evaluations; }),
        setting<std::size_t>("garch.min_returns", [](auto& c) -> auto& { return c.garch.min_returns; }),
        setting<std::size_t>("garch.starts", [](auto& c) -> auto& { return c.garch.starts; }),
        setting<double>("garch.tolerance", [](auto& c) -> auto& { return c.garch.tolerance; }),
        setting<std::size_t>("jobs", [](auto& c) -> auto& { return c.jobs; }, false),
        setting<std::size_t>("model.attention_dim", [](auto& c) -> auto& { return c.model.attention_dim; }),
        setting<std::size_t>("model.blocks", [](auto& c) -> auto& { return c.model.blocks; }),
        setting<std::size_t>("model.channels", [](auto& c) -> auto& { return c.model.channels; }),
        setting<std::vector<std::size_t>>("model.dilations", [](auto& c) -> auto& { return c.model.dilations; }),
        setting<double>("model.dropout", [](auto& c) -> auto& { return c.model.dropout; }),
        setting<std::size_t>("model.kernel_size", [](auto& c) -> auto& { return c.model.kernel_size; }),
        setting<std::size_t>("model.lstm_hidden", [](auto& c) -> auto& { return c.model.lstm_hidden; }),
        setting<std::size_t>("model.lstm_layers", [](auto& c) -> auto& { return c.model.lstm_layers; }),
        setting<std::size_t>("model.window", [](auto& c) -> auto& { return c.model.window; }),
        setting<std::vector<std::string>>("models", [](auto& c) -> auto& { return c.models; }),
        setting<std::string>("out", [](auto& c) -> auto& { return c.out; }, false),
        setting<std::size_t>("seed", [](auto& c) -> auto& { return c.seed; }),
        setting<std::size_t>("train.batch_size", [](auto& c) -> auto& { return c.train.batch_size; }),
        setting<std::size_t>("train.epochs", [](auto& c) -> auto& { return c.train.epochs; }),
        setting<double>("train.learning_rate", [](auto& c) -> auto& { return c.train.learning_rate; }),
        setting<bool>("train.shuffle", [](auto& c) -> auto& { return c.train.shuffle; }),
    };
    return t;
  }();
  return table;
}

}  // namespace

// ---- configuration ---------------------------------------------------------------

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  for (const auto& s : settings()) {
    if (s.key == key) {
      s.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown setting '" + key + "'");
}

void ExperimentConfig::validate() const {
  if (models.empty()) throw ConfigError("models: at least one model is required");
  std::set<std::string> seen;
  for (const auto& m : models) {
    if (!is_deep_model(m) && !parse_garch_label(m)) throw ConfigError("models: unknown model '" + m + "'");
    if (!seen.insert(m).second) throw ConfigError("models: '" + m + "' listed twice");
  }
  if (files.empty() == synthetic.empty()) {
    throw ConfigError("exactly one of data.files and data.synthetic must be set");
  }
  if (!synthetic.empty()) {
    if (synthetic != "rule" && synthetic != "sgarch" && synthetic != "flat") {
      throw ConfigError("data.synthetic: expected rule, sgarch or flat, got '" + synthetic + "'");
    }
    if (stocks == 0) throw ConfigError("data.stocks must be positive");
    if (length < 2) throw ConfigError("data.length must be at least 2");
    if (!(rule_noise >= 0.0 && rule_noise <= 1.0)) throw ConfigError("data.noise must lie in [0, 1]");
    if (synthetic == "sgarch") {
      try {
        uhf::validate(sgarch);
      } catch (const DataError& e) {
        throw ConfigError(std::string("data: ") + e.what());
      }
    }
  }
  if (max_ticks < 2) throw ConfigError("data.max_ticks must be at least 2");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("data.train_ratio must lie in (0, 1)");
  if (jobs == 0) throw ConfigError("jobs must be positive");
  if (garch.starts == 0 || garch.max_evaluations == 0 || !(garch.tolerance > 0.0)) {
    throw ConfigError("garch.starts, garch.max_evaluations and garch.tolerance must be positive");
  }
  try {
    train.validate();
    for (const auto& m : models) {
      if (const auto kind = parse_model_kind(m)) {
        ModelConfig c = model;
        c.kind = *kind;
        c.validate();
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& s : settings()) {
    if (s.canonical) out += s.key + "=" + s.get(*this) + "\n";
  }
  return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(canonical()); }

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    try {
      config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

fs::path resolve_output_root(const std::string& flag, const std::string& configured) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutRootEnv); env && *env) return env;
  return configured;
}

// ---- data ----------------------------------------------------------------------

std::vector<std::string> expand_inputs(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  for (const auto& pattern : patterns) {
    glob_t g{};
    // GLOB_NOCHECK keeps a literal path that matches nothing, so it is reported later
    if (::glob(pattern.c_str(), GLOB_NOCHECK, nullptr, &g) == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    ::globfree(&g);
  }
  return out;
}

namespace {

void attach_dataset(StockSource& src, std::vector<TickRecord> ticks, std::size_t window, double ratio) {
  if (ticks.size() < 2) {
    src.excluded = "only " + std::to_string(ticks.size()) + " tick(s); a price change needs two";
    return;
  }
  for (std::size_t i = 0; i < ticks.size(); ++i) ticks[i].index = i;
  try {
    auto ds = make_dataset(src.stock_id, std::move(ticks), window, ratio);
    if (ds.num_train == 0 || ds.num_test == 0) {
      src.excluded = std::to_string(ds.num_samples()) + " window sample(s) cannot fill both splits";
      return;
    }
    src.data = std::move(ds);
  } catch (const DataError& e) {
    src.excluded = e.what();
  }
}

}  // namespace

StockSource load_stock_file(const std::string& path, std::size_t max_ticks, std::size_t window, double ratio) {
  StockSource src;
  src.origin = path;
  src.stock_id = fs::path(path).stem().string();
  try {
    auto parsed = parse_tick_file(path, max_ticks);
    src.rows = parsed.records.size();
    src.off_grid = parsed.off_grid.size();
    if (!parsed.records.empty()) src.stock_id = parsed.records.front().stock_id;
    attach_dataset(src, std::move(parsed.records), window, ratio);
  } catch (const DataError& e) {
    src.excluded = e.what();
  }
  return src;
}

std::vector<std::vector<TickRecord>> synthetic_stocks(const ExperimentConfig& config) {
  std::vector<std::vector<TickRecord>> out;
  for (std::size_t s = 0; s < config.stocks; ++s) {
    SyntheticSpec spec;
    if (config.synthetic == "rule") {
      RuleSpec rule;
      rule.noise = config.rule_noise;
      spec.mode = rule;
    } else if (config.synthetic == "sgarch") {
      spec.mode = config.sgarch;
    } else {
      spec.mode = always_flat_markov();
    }
    spec.length = std::min(config.length, config.max_ticks);
    char id[32];
    std::snprintf(id, sizeof id, "SYN%03zu", s);
    spec.stock_id = id;
    out.push_back(generate_synthetic_ticks(spec, derive_seed(config.seed, "synthetic|" + std::to_string(s))));
  }
  return out;
}

std::vector<StockSource> load_stocks(const ExperimentConfig& config) {
  std::vector<StockSource> out;
  if (!config.synthetic.empty()) {
    for (auto& ticks : synthetic_stocks(config)) {
      StockSource src;
      src.stock_id = ticks.front().stock_id;
      src.origin = "synthetic:" + config.synthetic;
      src.rows = ticks.size();
      attach_dataset(src, std::move(ticks), config.model.window, config.train_ratio);
      out.push_back(std::move(src));
    }
  } else {
    for (const auto& path : expand_inputs(config.files)) {
      out.push_back(load_stock_file(path, config.max_ticks, config.model.window, config.train_ratio));
    }
  }
  std::set<std::string> ids, names;
  for (auto& src : out) {
    if (src.excluded.empty() && (!ids.insert(src.stock_id).second || !names.insert(safe_name(src.stock_id)).second)) {
      src.excluded = "duplicate stock id " + src.stock_id;
      src.data.reset();
    }
  }
  return out;
}

namespace {

std::uint64_t tick_digest(const std::vector<TickRecord>& ticks) {
  std::uint64_t h = fnv1a("ticks");
  for (const auto& t : ticks) {
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(&t.price_ticks), sizeof t.price_ticks), h);
  }
  return h;
}

void write_text(const fs::path& path, const std::string& text) {
  // write then rename so a reader never sees a partial file
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

ordered_json split_json(const StockDataset& ds) {
  ordered_json j;
  j["window"] = ds.window;
  j["num_train"] = ds.num_train;
  j["num_test"] = ds.num_test;
  j["train_targets"] = {ds.window, ds.first_test_target()};
  j["test_targets"] = {ds.first_test_target(), ds.labels.size()};
  return j;
}

ordered_json source_json(const StockSource& src) {
  ordered_json j;
  j["stock_id"] = src.stock_id;
  j["origin"] = src.origin;
  j["rows"] = src.rows;
  j["off_grid_rows"] = src.off_grid;
  if (src.data) {
    j["ticks"] = src.data->ticks.size();
    j["labels"] = src.data->labels.size();
    j["split"] = split_json(*src.data);
    j["status"] = "included";
  } else {
    j["status"] = "excluded";
    j["reason"] = src.excluded;
  }
  return j;
}

}  // namespace

IngestOutcome cmd_ingest(const std::vector<std::string>& inputs, const fs::path& root, std::size_t window,
                         double ratio, std::size_t max_ticks) {
  const auto paths = expand_inputs(inputs);
  if (paths.empty()) throw DataError("no input files given");
  std::vector<StockSource> sources;
  std::uint64_t h = fnv1a("ingest|" + std::to_string(window) + "|" + encode(ratio) + "|" + std::to_string(max_ticks));
  for (const auto& p : paths) {
    sources.push_back(load_stock_file(p, max_ticks, window, ratio));
    h = fnv1a(p + "|" + sources.back().stock_id + "|", h);
    if (sources.back().data) h = fnv1a(hex64(tick_digest(sources.back().data->ticks)), h);
  }
  IngestOutcome outcome;
  for (const auto& s : sources) (s.data ? outcome.stocks : outcome.excluded) += 1;
  if (outcome.stocks == 0) {
    std::string reasons;
    for (const auto& s : sources) reasons += "\n  " + s.origin + ": " + s.excluded;
    throw DataError("no valid tick files:" + reasons);
  }

  outcome.dir = root / ("ingest-" + hex64(h));
  fs::create_directories(outcome.dir);
  ordered_json manifest;
  manifest["window"] = window;
  manifest["train_ratio"] = ratio;
  manifest["max_ticks"] = max_ticks;
  manifest["stocks"] = ordered_json::array();
  std::ostringstream hist;
  hist << "stock_id,scheme,class,count,share\n" << std::setprecision(17);
  for (const auto& src : sources) {
    auto entry = source_json(src);
    if (src.data) {
      std::array<std::size_t, kNumClasses> five{};
      std::array<std::size_t, kNumCoarseClasses> three{};
      for (auto l : src.data->labels) {
        ++five[to_int(l)];
        ++three[to_int(map_to_three_class(l))];
      }
      const double n = static_cast<double>(src.data->labels.size());
      for (int c = 0; c < kNumClasses; ++c) {
        hist << src.stock_id << ",five," << c << ',' << five[c] << ',' << five[c] / n << '\n';
      }
      for (int c = 0; c < kNumCoarseClasses; ++c) {
        hist << src.stock_id << ",three," << class_name(3, c) << ',' << three[c] << ',' << three[c] / n << '\n';
      }
      entry["histogram"] = {{"five", five}, {"three", three}};
      entry["flat_share"] = five[2] / n;
    }
    manifest["stocks"].push_back(std::move(entry));
  }
  write_text(outcome.dir / "manifest.json", manifest.dump(2) + "\n");
  write_text(outcome.dir / "histograms.csv", hist.str());
  return outcome;
}

std::vector<fs::path> cmd_synth(const ExperimentConfig& config) {
  if (config.synthetic.empty()) throw ConfigError("synth needs data.synthetic");
  const fs::path dir = fs::path(config.out) / ("synth-" + hex64(config.hash()));
  fs::create_directories(dir);
  std::vector<fs::path> out;
  for (const auto& ticks : synthetic_stocks(config)) {
    std::ostringstream csv;
    write_tick_csv(csv, ticks);
    out.push_back(dir / (safe_name(ticks.front().stock_id) + ".csv"));
    write_text(out.back(), csv.str());
  }
  return out;
}

// ---- run -------------------------------------------------------------------------

namespace {

struct Job {
  std::size_t stock = 0;
  std::string model;
  std::string hash;
  fs::path dir;
};

struct JobResult {
  bool ok = false;
  std::string reason;
  std::optional<ConfusionMatrix> three;
  std::optional<ConfusionMatrix> five;
  bool resumed = false;
};

fs::path job_dir(const fs::path& run_dir, const std::string& stock, const std::string& model) {
  return run_dir / "jobs" / safe_name(stock) / safe_name(model);
}

std::string job_stem(const std::string& stock, const std::string& model) {
  return safe_name(stock) + "__" + safe_name(model);
}

std::string confusion_text(const ConfusionMatrix& cm) {
  std::ostringstream out;
  write_confusion_csv(out, cm);
  return out.str();
}

ordered_json counts_json(const std::optional<ConfusionMatrix>& cm) {
  return cm ? ordered_json(cm->counts) : ordered_json(nullptr);
}

std::optional<ConfusionMatrix> counts_from_json(const nlohmann::json& j, std::size_t k) {
  if (j.is_null()) return std::nullopt;
  ConfusionMatrix cm(k);
  cm.counts = j.get<std::vector<std::uint64_t>>();
  if (cm.counts.size() != k * k) throw std::runtime_error("confusion counts of wrong size");
  return cm;
}

JobResult run_deep_job(const ExperimentConfig& config, const StockDataset& data, const Job& job,
                       const fs::path& run_dir) {
  ModelConfig mc = config.model;
  mc.kind = *parse_model_kind(job.model);
  TrainConfig tc = config.train;
  tc.seed = derive_seed(config.seed, "train|" + data.stock_id + "|" + job.model);
  const std::uint64_t init_seed = derive_seed(config.seed, "init|" + data.stock_id + "|" + job.model);

  auto model = build(mc, init_seed);
  auto write_losses = [&] {
    std::ostringstream losses;
    write_loss_csv(losses, model.history);
    write_text(job.dir / "loss.csv", losses.str());
  };
  try {
    train(model, data, tc);
  } catch (const TrainingError&) {
    write_losses();
    throw;
  }
  write_losses();
  save_model((run_dir / "checkpoints" / (job_stem(data.stock_id, job.model) + ".ckpt")).string(), model, tc,
             init_seed);

  const auto preds = predict_test(model, data);
  std::vector<int> truth(preds.size()), guess(preds.size());
  std::ostringstream csv;
  csv << "index,p0,p1,p2,p3,p4,predicted,truth\n" << std::setprecision(17);
  for (std::size_t j = 0; j < preds.size(); ++j) {
    truth[j] = to_int(preds[j].truth);
    guess[j] = classify(preds[j].probs);
    csv << data.first_test_target() + j;
    for (double p : preds[j].probs) csv << ',' << p;
    csv << ',' << guess[j] << ',' << truth[j] << '\n';
  }
  write_text(job.dir / "predictions.csv", csv.str());

  JobResult r;
  r.ok = true;
  r.five = confusion(truth, guess, kNumClasses);
  r.three = coarsen_matrix(*r.five);
  return r;
}

JobResult run_garch_job(const ExperimentConfig& config, const StockDataset& data, const Job& job) {
  FitOptions options = config.garch;
  options.seed = derive_seed(config.seed, "garch|" + data.stock_id + "|" + job.model);
  const auto fit = fit_mle(*parse_garch_label(job.model), training_returns(data), options);
  write_text(job.dir / "fit.json", fit_to_json(fit, data.stock_id) + "\n");
  JobResult r;
  if (!fit.failure.empty()) {
    r.reason = fit.failure;
    return r;
  }
  const auto probs = forecast_test_probs(fit, data);
  std::ostringstream csv;
  write_class_probs_csv(csv, probs, data.first_test_target());
  write_text(job.dir / "probabilities.csv", csv.str());
  std::vector<int> truth(probs.size()), guess(probs.size());
  for (std::size_t j = 0; j < probs.size(); ++j) {
    truth[j] = to_int(map_to_three_class(data.labels.at(data.first_test_target() + j)));
    guess[j] = classify(probs[j]);
  }
  r.ok = true;
  r.three = confusion(truth, guess, kNumCoarseClasses);
  return r;
}

ordered_json job_metrics_json(const std::string& stock, const std::string& model, const JobResult& r) {
  ordered_json j;
  j["stock_id"] = stock;
  j["model"] = model;
  j["status"] = r.ok ? "ok" : "failed";
  j["reason"] = r.ok ? ordered_json(nullptr) : ordered_json(r.reason);
  j["three_class"] = r.three ? metrics_json(metrics(*r.three), 3) : ordered_json(nullptr);
  j["five_class"] = r.five ? metrics_json(metrics(*r.five), 5) : ordered_json(nullptr);
  return j;
}

void write_job_outputs(const fs::path& run_dir, const std::string& stock, const Job& job, const JobResult& r) {
  if (r.three) write_text(job.dir / "confusion3.csv", confusion_text(*r.three));
  if (r.five) write_text(job.dir / "confusion5.csv", confusion_text(*r.five));
  write_text(run_dir / "metrics" / (job_stem(stock, job.model) + ".json"),
             job_metrics_json(stock, job.model, r).dump(2) + "\n");
  ordered_json result;
  result["job_hash"] = job.hash;
  result["stock_id"] = stock;
  result["model"] = job.model;
  result["status"] = r.ok ? "ok" : "failed";
  result["reason"] = r.ok ? ordered_json(nullptr) : ordered_json(r.reason);
  result["confusion3"] = counts_json(r.three);
  result["confusion5"] = counts_json(r.five);
  // written last: its presence marks the job complete
  write_text(job.dir / "result.json", result.dump(2) + "\n");
}

std::optional<JobResult> read_result(const fs::path& dir, const std::string& expected_hash) {
  std::ifstream in(dir / "result.json");
  if (!in) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(in);
    if (!expected_hash.empty() && j.at("job_hash").get<std::string>() != expected_hash) return std::nullopt;
    JobResult r;
    r.ok = j.at("status").get<std::string>() == "ok";
    if (!r.ok) r.reason = j.at("reason").get<std::string>();
    r.three = counts_from_json(j.at("confusion3"), 3);
    r.five = counts_from_json(j.at("confusion5"), 5);
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

RunOutcome cmd_run(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const std::string canonical = config.canonical();
  RunOutcome outcome;
  outcome.dir = fs::path(config.out) / ("run-" + hex64(config.hash()));
  for (const char* sub : {"metrics", "tables", "checkpoints", "jobs"}) fs::create_directories(outcome.dir / sub);
  write_text(outcome.dir / "config.txt", canonical);

  const auto sources = load_stocks(config);
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (!sources[s].data) {
      log << "excluded " << sources[s].origin << ": " << sources[s].excluded << '\n';
      continue;
    }
    const auto& ds = *sources[s].data;
    const std::string digest = hex64(tick_digest(ds.ticks));
    for (const auto& m : config.models) {
      Job job;
      job.stock = s;
      job.model = m;
      job.hash = hex64(fnv1a(canonical + "\n" + ds.stock_id + "\n" + m + "\n" + digest));
      job.dir = job_dir(outcome.dir, ds.stock_id, m);
      fs::create_directories(job.dir);
      jobs.push_back(std::move(job));
    }
  }

  std::vector<JobResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::size_t done = 0;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const auto& job = jobs[i];
      const auto& data = *sources[job.stock].data;
      JobResult r;
      if (auto previous = read_result(job.dir, job.hash); previous && previous->ok) {
        r = std::move(*previous);
        r.resumed = true;
      } else {
        try {
          r = is_deep_model(job.model) ? run_deep_job(config, data, job, outcome.dir)
                                       : run_garch_job(config, data, job);
        } catch (const std::exception& e) {
          r = JobResult{};
          r.reason = e.what();
        }
        try {
          write_job_outputs(outcome.dir, data.stock_id, job, r);
        } catch (const std::exception& e) {
          r.ok = false;
          r.reason = std::string("cannot write outputs: ") + e.what();
        }
      }
      std::lock_guard lock(log_mutex);
      log << '[' << ++done << '/' << jobs.size() << "] " << data.stock_id << ' ' << job.model << ' '
          << (r.ok ? "ok" : "FAILED: " + r.reason) << (r.resumed ? " (resumed)" : "") << '\n';
      results[i] = std::move(r);
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t threads = std::min(config.jobs, std::max<std::size_t>(jobs.size(), 1));
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  ordered_json manifest;
  manifest["run"] = outcome.dir.filename().string();
  manifest["config_hash"] = hex64(config.hash());
  ordered_json settings_json = ordered_json::object();
  std::istringstream lines(canonical);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    settings_json[line.substr(0, eq)] = line.substr(eq + 1);
  }
  manifest["config"] = settings_json;
  manifest["models"] = config.models;
  manifest["stocks"] = ordered_json::array();
  for (const auto& src : sources) manifest["stocks"].push_back(source_json(src));
  manifest["jobs"] = ordered_json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    ordered_json j;
    j["stock_id"] = sources[jobs[i].stock].stock_id;
    j["model"] = jobs[i].model;
    j["job_hash"] = jobs[i].hash;
    j["status"] = results[i].ok ? "ok" : "failed";
    if (!results[i].ok) j["reason"] = results[i].reason;
    manifest["jobs"].push_back(std::move(j));
    outcome.failed += !results[i].ok;
    outcome.resumed += results[i].resumed;
  }
  outcome.jobs = jobs.size();
  write_text(outcome.dir / "manifest.json", manifest.dump(2) + "\n");
  cmd_report(outcome.dir);
  return outcome;
}

// ---- report ----------------------------------------------------------------------

std::string cmd_report(const fs::path& run_dir) {
  std::ifstream in(run_dir / "manifest.json");
  if (!in) throw std::runtime_error("no manifest.json in " + run_dir.string());
  const auto manifest = nlohmann::json::parse(in);
  const auto models = manifest.at("models").get<std::vector<std::string>>();
  std::vector<std::string> stocks;
  for (const auto& s : manifest.at("stocks")) {
    if (s.at("status") == "included") stocks.push_back(s.at("stock_id").get<std::string>());
  }

  // a model enters the tables only if it succeeded on every stock
  std::vector<std::string> included;
  std::vector<std::vector<JobResult>> results;
  ordered_json excluded = ordered_json::array();
  for (const auto& m : models) {
    std::vector<JobResult> per_stock;
    ordered_json failures = ordered_json::array();
    for (const auto& s : stocks) {
      auto r = read_result(job_dir(run_dir, s, m), "");
      if (!r) {
        r = JobResult{};
        r->reason = "no result";
      }
      if (!r->ok) failures.push_back({{"stock_id", s}, {"reason", r->reason}});
      per_stock.push_back(std::move(*r));
    }
    if (stocks.empty()) continue;
    if (failures.empty()) {
      included.push_back(m);
      results.push_back(std::move(per_stock));
    } else {
      excluded.push_back({{"model", m}, {"failures", failures}});
    }
  }

  ordered_json summary;
  summary["stocks"] = stocks.size();
  summary["models"] = included;
  summary["excluded_models"] = excluded;
  ordered_json three = ordered_json::object(), five = ordered_json::object(), best = ordered_json::object();
  std::ostringstream t1, t2, t3;
  t1 << "model";
  for (const char* metric : {"recall", "precision"}) {
    for (std::size_t c = 0; c < 3; ++c) t1 << ',' << metric << '_' << class_name(3, c);
  }
  t1 << ",accuracy\n";
  t3 << "model";
  for (const char* metric : {"recall", "precision"}) {
    for (std::size_t c = 0; c < 5; ++c) t3 << ',' << metric << '_' << class_name(5, c);
  }
  t3 << ",accuracy\n";
  t2 << "model,A,B,C\n";

  auto row = [](std::ostream& out, const std::string& model, const MetricsReport& r) {
    out << model;
    for (const auto& v : r.recall) out << ',' << format_metric(v);
    for (const auto& v : r.precision) out << ',' << format_metric(v);
    out << ',' << format_metric(r.accuracy) << '\n';
  };
  auto schemes = [](const std::vector<ConfusionMatrix>& cms, std::size_t k, MetricsReport& macro) {
    std::vector<MetricsReport> per_stock;
    for (const auto& cm : cms) per_stock.push_back(metrics(cm));
    macro = macro_average(per_stock);
    ordered_json j;
    j["macro"] = metrics_json(macro, k);
    j["pooled"] = metrics_json(metrics(pooled(cms)), k);
    return j;
  };

  std::vector<std::vector<MetricsReport>> precision_table;
  for (std::size_t m = 0; m < included.size(); ++m) {
    std::vector<ConfusionMatrix> cm3, cm5;
    std::vector<MetricsReport> per_stock;
    for (const auto& r : results[m]) {
      cm3.push_back(*r.three);
      per_stock.push_back(metrics(*r.three));
      if (r.five) cm5.push_back(*r.five);
    }
    precision_table.push_back(std::move(per_stock));
    MetricsReport macro;
    three[included[m]] = schemes(cm3, 3, macro);
    row(t1, included[m], macro);
    if (!cm5.empty()) {
      five[included[m]] = schemes(cm5, 5, macro);
      row(t3, included[m], macro);
    }
  }
  const auto counts = best_precision_counts(precision_table);
  for (std::size_t m = 0; m < included.size(); ++m) {
    best[included[m]] = {{"A", counts[m][0]}, {"B", counts[m][1]}, {"C", counts[m][2]}};
    t2 << included[m] << ',' << counts[m][0] << ',' << counts[m][1] << ',' << counts[m][2] << '\n';
  }
  summary["three_class"] = three;
  summary["five_class"] = five;
  summary["best_precision_counts"] = best;

  fs::create_directories(run_dir / "tables");
  fs::create_directories(run_dir / "metrics");
  write_text(run_dir / "metrics" / "summary.json", summary.dump(2) + "\n");
  write_text(run_dir / "tables" / "table1.csv", t1.str());
  write_text(run_dir / "tables" / "table2.csv", t2.str());
  write_text(run_dir / "tables" / "table3.csv", t3.str());
  return t1.str();
}

}  // namespace uhf
