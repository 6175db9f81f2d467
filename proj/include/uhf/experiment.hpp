#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "uhf/data.hpp"
#include "uhf/evaluation.hpp"
#include "uhf/garch.hpp"
#include "uhf/model.hpp"

namespace uhf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Environment variable that overrides the configured output root.
inline constexpr const char* kOutRootEnv = "UHF_OUT_ROOT";

struct ExperimentConfig {
  // data source: tick files (paths or glob patterns) or a synthetic generator
  std::vector<std::string> files;
  std::string synthetic;  // "", "rule", "sgarch", "flat"
  std::size_t stocks = 2;
  std::size_t length = 100000;
  double rule_noise = 0.02;
  SgarchSpec sgarch;
  std::size_t max_ticks = 100000;
  double train_ratio = 0.7;

  /// Deep model names and GARCH labels, in report order.
  std::vector<std::string> models;
  ModelConfig model;
  TrainConfig train;
  FitOptions garch;

  std::uint64_t seed = 42;
  std::size_t jobs = 1;
  std::string out = "out";

  /// Throws ConfigError on an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);
  /// Throws ConfigError when the configuration cannot describe a run.
  void validate() const;
  /// Every setting except `jobs` and `out`, one `key=value` per line in key
  /// order. Two configs with equal canonical text run identically.
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// `key = value` lines; blank lines and lines starting with '#' are ignored.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Flag value if nonempty, else the environment override, else `configured`.
std::filesystem::path resolve_output_root(const std::string& flag, const std::string& configured);

std::string hex64(std::uint64_t value);
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

bool is_deep_model(const std::string& name);

/// A loaded stock, or the reason it cannot be used.
struct StockSource {
  std::string stock_id;
  std::string origin;  // file path or "synthetic"
  std::size_t rows = 0;
  std::size_t off_grid = 0;
  std::optional<StockDataset> data;
  std::string excluded;
};

std::vector<std::string> expand_inputs(const std::vector<std::string>& patterns);
/// Truncates to the first `max_ticks` rows. Unreadable or malformed files are
/// returned as excluded sources.
StockSource load_stock_file(const std::string& path, std::size_t max_ticks, std::size_t window, double ratio);
std::vector<StockSource> load_stocks(const ExperimentConfig& config);
std::vector<std::vector<TickRecord>> synthetic_stocks(const ExperimentConfig& config);

struct IngestOutcome {
  std::filesystem::path dir;
  std::size_t stocks = 0;
  std::size_t excluded = 0;
};

/// Writes manifest.json and histograms.csv under `root/ingest-<hash>`.
/// Throws DataError when no file yields a usable stock.
IngestOutcome cmd_ingest(const std::vector<std::string>& inputs, const std::filesystem::path& root,
                         std::size_t window = 64, double ratio = 0.7, std::size_t max_ticks = 100000);

/// Writes one tick CSV per synthetic stock under `root/synth-<hash>`.
std::vector<std::filesystem::path> cmd_synth(const ExperimentConfig& config);

struct RunOutcome {
  std::filesystem::path dir;
  std::size_t jobs = 0;
  std::size_t failed = 0;
  std::size_t resumed = 0;
};

/// Trains or fits every (stock, model) pair, writes per-job artifacts, then the
/// aggregate report. Completed jobs found in the run directory are reused.
RunOutcome cmd_run(const ExperimentConfig& config, std::ostream& log);

/// Rebuilds metrics/summary.json and tables/*.csv from the job results in a
/// run directory. Returns the Table 1 CSV text.
std::string cmd_report(const std::filesystem::path& run_dir);

}  // namespace uhf
