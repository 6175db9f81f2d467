#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace uhf {

constexpr int kNumClasses = 5;
constexpr int kNumCoarseClasses = 3;

/// Price quantum: one tick is 0.01 currency units.
constexpr double kTickSize = 0.01;

struct TickRecord {
  std::string stock_id;
  std::size_t index = 0;
  std::int64_t price_ticks = 0;
};

struct PriceChange {
  std::int64_t delta_ticks = 0;
};

/// Five-way class of a price change, 0..4 from most negative to most positive.
enum class PriceChangeLabel : std::uint8_t { kDown2 = 0, kDown1 = 1, kFlat = 2, kUp1 = 3, kUp2 = 4 };

enum class CoarseLabel : std::uint8_t { kA = 0, kB = 1, kC = 2 };

inline int to_int(PriceChangeLabel l) { return static_cast<int>(l); }
inline int to_int(CoarseLabel l) { return static_cast<int>(l); }
PriceChangeLabel label_from_int(int k);
char coarse_name(CoarseLabel l);

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- parsing ---------------------------------------------------------------

struct ParseIssue {
  std::size_t line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<TickRecord> records;
  /// Rows dropped because the price is not a multiple of one tick.
  std::vector<ParseIssue> off_grid;
};

/// Parses `stock_id,price` rows. A header line is accepted if its price field
/// is not numeric. Malformed rows throw DataError naming the line; off-grid
/// prices are skipped and reported. `max_records` truncates to the first N
/// valid rows (0 = no limit).
ParseResult parse_tick_stream(std::istream& in, std::size_t max_records = 0);
ParseResult parse_tick_file(const std::string& path, std::size_t max_records = 0);

/// Exact decimal-string to tick conversion. Returns nullopt when the value has
/// a nonzero digit beyond the second decimal place; throws on syntax errors.
std::optional<std::int64_t> parse_price_ticks(const std::string& text);

void write_tick_csv(std::ostream& out, const std::vector<TickRecord>& ticks);

// ---- labeling ----------------------------------------------------------------

std::vector<PriceChange> compute_price_changes(const std::vector<TickRecord>& prices);
PriceChangeLabel label_five_class(PriceChange delta);
CoarseLabel map_to_three_class(PriceChangeLabel label);
std::vector<PriceChangeLabel> label_sequence(const std::vector<PriceChange>& changes);

/// r_i = ln(P_i) - ln(P_{i-1}) with prices in currency units. Output length n-1.
std::vector<double> compute_log_returns(const std::vector<TickRecord>& prices);

// ---- windows -----------------------------------------------------------------

struct WindowSample {
  /// One-hot history, row-major [kNumClasses, W]; column t is label j+t.
  std::vector<double> features;
  std::size_t window = 0;
  PriceChangeLabel target = PriceChangeLabel::kFlat;
  /// Position of the target in the label sequence.
  std::size_t target_index = 0;

  std::array<double, kNumClasses> one_hot_target() const;
};

/// Writes the one-hot encoding of labels[first, first+W) into `out` laid out
/// as [kNumClasses, W].
void encode_window(const std::vector<PriceChangeLabel>& labels, std::size_t first, std::size_t window,
                   double* out);

std::vector<WindowSample> build_windows(const std::vector<PriceChangeLabel>& labels, std::size_t window);

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> test;
};

/// First floor(ratio * n) items go to train, the rest to test, order kept.
template <typename T>
Split<T> split_train_test(const std::vector<T>& samples, double ratio = 0.7);

std::size_t train_count(std::size_t n, double ratio);

/// Per-stock dataset. Windows are materialized on demand from the label
/// sequence: sample j (0-based over all samples) has target label j + window.
struct StockDataset {
  std::string stock_id;
  std::vector<TickRecord> ticks;
  std::vector<PriceChangeLabel> labels;  // labels[i] is the change into tick i+1
  std::vector<double> returns;           // returns[i] aligned with labels[i]
  std::size_t window = 0;
  std::size_t num_train = 0;
  std::size_t num_test = 0;

  std::size_t num_samples() const { return num_train + num_test; }
  /// Label index of the target of sample j.
  std::size_t target_index(std::size_t j) const { return j + window; }
  std::size_t first_test_target() const { return window + num_train; }
  PriceChangeLabel target(std::size_t j) const { return labels.at(target_index(j)); }
  WindowSample sample(std::size_t j) const;
  void encode_sample(std::size_t j, double* out) const;
};

StockDataset make_dataset(std::string stock_id, std::vector<TickRecord> ticks, std::size_t window,
                          double ratio = 0.7);

// ---- synthetic data ------------------------------------------------------------

/// First-order chain over the five classes; each class emits a fixed tick move.
struct MarkovSpec {
  std::array<std::array<double, kNumClasses>, kNumClasses> transition{};
  std::array<std::int64_t, kNumClasses> class_ticks{-2, -1, 0, 1, 2};
  int initial_class = 2;
};

/// Next class is a deterministic function of the previous `order` classes
/// (class = sum_k (k+1) * c_{t-k-1} mod 5) except with probability `noise`,
/// where it is drawn uniformly. Majority-class share is near 1/5.
struct RuleSpec {
  int order = 3;
  double noise = 0.02;
  std::array<std::int64_t, kNumClasses> class_ticks{-2, -1, 0, 1, 2};
};

enum class Innovation : std::uint8_t { kNorm, kStd, kSstd };

/// SGARCH(1,1) returns r_t = mu + sigma_t z_t; prices follow exp(r) and are
/// rounded to the tick grid.
struct SgarchSpec {
  double mu = 0.0;
  double omega = 1e-8;
  double alpha = 0.1;
  double beta = 0.8;
  Innovation innovation = Innovation::kNorm;
  double nu = 8.0;
};

struct SyntheticSpec {
  std::variant<MarkovSpec, RuleSpec, SgarchSpec> mode;
  std::size_t length = 100000;
  std::int64_t start_price_ticks = 100000;
  std::string stock_id = "SYN";
};

MarkovSpec always_flat_markov();
/// Throws DataError when a row does not sum to one within 1e-12 or has negative entries.
void validate(const MarkovSpec& spec);
void validate(const SgarchSpec& spec);

/// Continuous SGARCH(1,1) returns, deterministic in (spec, seed).
std::vector<double> simulate_sgarch_returns(const SgarchSpec& spec, std::size_t n, std::uint64_t seed);

/// Deterministic in (spec, seed). A move that would take the price to zero or
/// below is reflected.
std::vector<TickRecord> generate_synthetic_ticks(const SyntheticSpec& spec, std::uint64_t seed);

// ---- template definitions ----------------------------------------------------

template <typename T>
Split<T> split_train_test(const std::vector<T>& samples, double ratio) {
  const std::size_t n_train = train_count(samples.size(), ratio);
  Split<T> out;
  out.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(samples.begin() + static_cast<std::ptrdiff_t>(n_train), samples.end());
  return out;
}

}  // namespace uhf
