#include "uhf/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace uhf {

PriceChangeLabel label_from_int(int k) {
  if (k < 0 || k >= kNumClasses) throw DataError("class index out of range: " + std::to_string(k));
  return static_cast<PriceChangeLabel>(k);
}

char coarse_name(CoarseLabel l) { return static_cast<char>('A' + to_int(l)); }

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool looks_numeric(const std::string& s) {
  return !s.empty() && (std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '.' || s[0] == '-' ||
                        s[0] == '+');
}

}  // namespace

std::optional<std::int64_t> parse_price_ticks(const std::string& raw) {
  const std::string text = trim(raw);
  if (text.empty()) throw DataError("empty price");
  std::size_t pos = 0;
  bool negative = false;
  if (text[pos] == '+' || text[pos] == '-') {
    negative = text[pos] == '-';
    ++pos;
  }
  std::int64_t whole = 0;
  std::size_t int_digits = 0;
  while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
    if (whole > (INT64_MAX / 1000)) throw DataError("price too large: " + text);
    whole = whole * 10 + (text[pos] - '0');
    ++pos;
    ++int_digits;
  }
  std::int64_t frac = 0;
  std::size_t frac_digits = 0;
  bool off_grid = false;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      const int digit = text[pos] - '0';
      if (frac_digits < 2) {
        frac = frac * 10 + digit;
      } else if (digit != 0) {
        off_grid = true;
      }
      ++frac_digits;
      ++pos;
    }
  }
  if (pos != text.size() || (int_digits == 0 && frac_digits == 0)) throw DataError("malformed price: " + text);
  if (off_grid) return std::nullopt;
  if (frac_digits == 1) frac *= 10;
  const std::int64_t ticks = whole * 100 + frac;
  return negative ? -ticks : ticks;
}

ParseResult parse_tick_stream(std::istream& in, std::size_t max_records) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  bool any_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty()) continue;
    const bool first_content = !any_content;
    any_content = true;
    const auto comma = row.find(',');
    if (comma == std::string::npos || row.find(',', comma + 1) != std::string::npos) {
      throw DataError("line " + std::to_string(line_no) + ": expected 2 columns `stock_id,price`");
    }
    const std::string id = trim(row.substr(0, comma));
    const std::string price = trim(row.substr(comma + 1));
    if (first_content && !looks_numeric(price)) continue;  // header
    if (id.empty()) throw DataError("line " + std::to_string(line_no) + ": empty stock_id");
    std::optional<std::int64_t> ticks;
    try {
      ticks = parse_price_ticks(price);
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!ticks) {
      result.off_grid.push_back({line_no, "price not on the 0.01 grid: " + price});
      continue;
    }
    if (*ticks <= 0) throw DataError("line " + std::to_string(line_no) + ": non-positive price " + price);
    if (!result.records.empty() && result.records.front().stock_id != id) {
      throw DataError("line " + std::to_string(line_no) + ": stock_id changes within file (" + id + ")");
    }
    result.records.push_back({id, result.records.size(), *ticks});
    if (max_records != 0 && result.records.size() == max_records) break;
  }
  if (!any_content) throw DataError("empty tick file");
  return result;
}

ParseResult parse_tick_file(const std::string& path, std::size_t max_records) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse_tick_stream(in, max_records);
}

void write_tick_csv(std::ostream& out, const std::vector<TickRecord>& ticks) {
  out << "stock_id,price\n";
  for (const auto& t : ticks) {
    const std::int64_t cents = t.price_ticks % 100;
    out << t.stock_id << ',' << t.price_ticks / 100 << '.' << (cents < 10 ? "0" : "") << cents << '\n';
  }
}

std::vector<PriceChange> compute_price_changes(const std::vector<TickRecord>& prices) {
  if (prices.size() < 2) throw DataError("need at least 2 ticks to form a price change");
  std::vector<PriceChange> out(prices.size() - 1);
  for (std::size_t j = 0; j + 1 < prices.size(); ++j) {
    out[j].delta_ticks = prices[j + 1].price_ticks - prices[j].price_ticks;
  }
  return out;
}

PriceChangeLabel label_five_class(PriceChange delta) {
  if (delta.delta_ticks <= -2) return PriceChangeLabel::kDown2;
  if (delta.delta_ticks == -1) return PriceChangeLabel::kDown1;
  if (delta.delta_ticks == 0) return PriceChangeLabel::kFlat;
  if (delta.delta_ticks == 1) return PriceChangeLabel::kUp1;
  return PriceChangeLabel::kUp2;
}

CoarseLabel map_to_three_class(PriceChangeLabel label) {
  switch (label) {
    case PriceChangeLabel::kDown2:
    case PriceChangeLabel::kDown1:
      return CoarseLabel::kA;
    case PriceChangeLabel::kFlat:
      return CoarseLabel::kB;
    default:
      return CoarseLabel::kC;
  }
}

std::vector<PriceChangeLabel> label_sequence(const std::vector<PriceChange>& changes) {
  std::vector<PriceChangeLabel> out;
  out.reserve(changes.size());
  for (const auto& c : changes) out.push_back(label_five_class(c));
  return out;
}

std::vector<double> compute_log_returns(const std::vector<TickRecord>& prices) {
  if (prices.size() < 2) throw DataError("need at least 2 ticks to form a return");
  std::vector<double> out(prices.size() - 1);
  double prev = 0.0;
  for (std::size_t i = 0; i < prices.size(); ++i) {
    if (prices[i].price_ticks <= 0) throw DataError("non-positive price at index " + std::to_string(i));
    const double logp = std::log(static_cast<double>(prices[i].price_ticks) * kTickSize);
    if (i > 0) out[i - 1] = logp - prev;
    prev = logp;
  }
  return out;
}

std::array<double, kNumClasses> WindowSample::one_hot_target() const {
  std::array<double, kNumClasses> y{};
  y[static_cast<std::size_t>(to_int(target))] = 1.0;
  return y;
}

void encode_window(const std::vector<PriceChangeLabel>& labels, std::size_t first, std::size_t window,
                   double* out) {
  std::fill(out, out + kNumClasses * window, 0.0);
  for (std::size_t t = 0; t < window; ++t) {
    out[static_cast<std::size_t>(to_int(labels[first + t])) * window + t] = 1.0;
  }
}

std::vector<WindowSample> build_windows(const std::vector<PriceChangeLabel>& labels, std::size_t window) {
  if (window == 0) throw DataError("window length must be positive");
  if (labels.size() <= window) {
    throw DataError("label sequence of length " + std::to_string(labels.size()) + " too short for window " +
                    std::to_string(window));
  }
  std::vector<WindowSample> out(labels.size() - window);
  for (std::size_t j = 0; j < out.size(); ++j) {
    auto& s = out[j];
    s.window = window;
    s.features.resize(kNumClasses * window);
    encode_window(labels, j, window, s.features.data());
    s.target_index = j + window;
    s.target = labels[s.target_index];
  }
  return out;
}

std::size_t train_count(std::size_t n, double ratio) {
  if (n < 2) throw DataError("need at least 2 samples to split");
  if (!(ratio > 0.0 && ratio < 1.0)) throw DataError("split ratio must lie in (0, 1)");
  // 1e-7 absorbs representation error in ratio*n without crossing a tenth.
  auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-7));
  return std::min(k, n);
}

WindowSample StockDataset::sample(std::size_t j) const {
  if (j >= num_samples()) throw DataError("sample index out of range");
  WindowSample s;
  s.window = window;
  s.features.resize(kNumClasses * window);
  encode_sample(j, s.features.data());
  s.target_index = target_index(j);
  s.target = labels[s.target_index];
  return s;
}

void StockDataset::encode_sample(std::size_t j, double* out) const { encode_window(labels, j, window, out); }

StockDataset make_dataset(std::string stock_id, std::vector<TickRecord> ticks, std::size_t window, double ratio) {
  StockDataset ds;
  ds.stock_id = std::move(stock_id);
  ds.window = window;
  ds.labels = label_sequence(compute_price_changes(ticks));
  ds.returns = compute_log_returns(ticks);
  ds.ticks = std::move(ticks);
  if (window == 0) throw DataError("window length must be positive");
  if (ds.labels.size() <= window) {
    throw DataError(ds.stock_id + ": " + std::to_string(ds.labels.size()) + " price changes, window " +
                    std::to_string(window) + " leaves no samples");
  }
  const std::size_t n = ds.labels.size() - window;
  ds.num_train = train_count(n, ratio);
  ds.num_test = n - ds.num_train;
  return ds;
}

// ---- synthetic -----------------------------------------------------------------

MarkovSpec always_flat_markov() {
  MarkovSpec spec;
  for (auto& row : spec.transition) {
    row.fill(0.0);
    row[2] = 1.0;
  }
  return spec;
}

void validate(const MarkovSpec& spec) {
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    double sum = 0.0;
    for (double p : spec.transition[r]) {
      if (!(p >= 0.0)) throw DataError("transition row " + std::to_string(r) + " has a negative entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw DataError("transition row " + std::to_string(r) + " does not sum to 1");
  }
  if (spec.initial_class < 0 || spec.initial_class >= kNumClasses) throw DataError("initial class out of range");
}

void validate(const SgarchSpec& spec) {
  if (!(spec.omega > 0.0)) throw DataError("SGARCH omega must be positive");
  if (spec.alpha < 0.0 || spec.beta < 0.0) throw DataError("SGARCH alpha, beta must be nonnegative");
  if (!(spec.alpha + spec.beta < 1.0)) throw DataError("SGARCH alpha + beta must be < 1 (stationarity)");
  if (spec.innovation != Innovation::kNorm && !(spec.nu > 2.0)) throw DataError("Student-t nu must exceed 2");
}

std::vector<double> simulate_sgarch_returns(const SgarchSpec& spec, std::size_t n, std::uint64_t seed) {
  validate(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::student_t_distribution<double> student(spec.nu);
  const double t_scale = spec.innovation == Innovation::kNorm ? 1.0 : std::sqrt((spec.nu - 2.0) / spec.nu);
  auto draw = [&] { return spec.innovation == Innovation::kNorm ? normal(rng) : t_scale * student(rng); };

  const double uncond = spec.omega / (1.0 - spec.alpha - spec.beta);
  // Burn-in removes dependence on the starting variance.
  double var = uncond;
  double eps = 0.0;
  for (int i = 0; i < 1000; ++i) {
    var = spec.omega + spec.alpha * eps * eps + spec.beta * var;
    eps = std::sqrt(var) * draw();
  }
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    var = spec.omega + spec.alpha * eps * eps + spec.beta * var;
    eps = std::sqrt(var) * draw();
    out[t] = spec.mu + eps;
  }
  return out;
}

namespace {

std::size_t draw_class(const std::array<double, kNumClasses>& row, double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    acc += row[k];
    if (u < acc) return k;
  }
  for (std::size_t k = kNumClasses; k-- > 0;) {
    if (row[k] > 0.0) return k;
  }
  return kNumClasses - 1;
}

std::int64_t step_price(std::int64_t price, std::int64_t move) {
  return price + move > 0 ? price + move : price - move;
}

}  // namespace

std::vector<TickRecord> generate_synthetic_ticks(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.length == 0) throw DataError("synthetic length must be positive");
  if (spec.start_price_ticks <= 0) throw DataError("start price must be positive");
  std::vector<TickRecord> out;
  out.reserve(spec.length);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::int64_t price = spec.start_price_ticks;
  out.push_back({spec.stock_id, 0, price});

  if (const auto* m = std::get_if<MarkovSpec>(&spec.mode)) {
    validate(*m);
    std::size_t cls = static_cast<std::size_t>(m->initial_class);
    for (std::size_t i = 1; i < spec.length; ++i) {
      cls = draw_class(m->transition[cls], unif(rng));
      price = step_price(price, m->class_ticks[cls]);
      out.push_back({spec.stock_id, i, price});
    }
  } else if (const auto* r = std::get_if<RuleSpec>(&spec.mode)) {
    if (r->order < 1) throw DataError("rule order must be >= 1");
    if (!(r->noise >= 0.0 && r->noise <= 1.0)) throw DataError("rule noise must lie in [0, 1]");
    std::uniform_int_distribution<int> any_class(0, kNumClasses - 1);
    std::vector<int> history;
    for (std::size_t i = 1; i < spec.length; ++i) {
      int cls = 0;
      if (static_cast<int>(history.size()) < r->order || unif(rng) < r->noise) {
        cls = any_class(rng);
      } else {
        const std::size_t n = history.size();
        for (int k = 0; k < r->order; ++k) cls += (k + 1) * history[n - 1 - static_cast<std::size_t>(k)];
        cls %= kNumClasses;
      }
      history.push_back(cls);
      price = step_price(price, r->class_ticks[static_cast<std::size_t>(cls)]);
      out.push_back({spec.stock_id, i, price});
    }
  } else {
    const auto& g = std::get<SgarchSpec>(spec.mode);
    const auto returns = simulate_sgarch_returns(g, spec.length - 1, seed);
    double level = static_cast<double>(price);
    for (std::size_t i = 1; i < spec.length; ++i) {
      level *= std::exp(returns[i - 1]);
      price = std::max<std::int64_t>(1, std::llround(level));
      out.push_back({spec.stock_id, i, price});
    }
  }
  return out;
}

}  // namespace uhf
