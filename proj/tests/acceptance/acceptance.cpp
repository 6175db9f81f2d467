// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "support/garch_oracle.hpp"
#include "support/oracles.hpp"
#include "uhf/evaluation.hpp"
#include "uhf/experiment.hpp"
#include "uhf/garch.hpp"
#include "uhf/model.hpp"

using namespace uhf;
namespace fs = std::filesystem;
using nn::Tensor;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

Tensor random_one_hot(std::size_t batch, std::size_t time, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> cls(0, kNumClasses - 1);
  Tensor x({batch, kNumClasses, time});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t t = 0; t < time; ++t) x[(n * kNumClasses + static_cast<std::size_t>(cls(rng))) * time + t] = 1.0;
  }
  return x;
}

// Per-step outputs: the hidden sequence every model emits before its head.
Tensor step_outputs(const TrainedModel& model, const Tensor& input) {
  nn::Tape tape;
  ParamBinder bind = [&](const std::string& path) { return tape.reference(model.params.at(path)); };
  return tape.value(forward(tape, model.config, bind, tape.reference(input), nullptr).trunk);
}

Verdict causality() {
  std::mt19937_64 rng(101);
  const ModelKind kinds[] = {ModelKind::kTcn, ModelKind::kTcnAttention, ModelKind::kLstm};
  std::size_t compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ModelConfig c;
    c.kind = kinds[trial % 3];
    c.channels = 16;
    c.lstm_hidden = 16;
    const auto model = build(c, rng());
    const std::size_t batch = 2, time = c.window;
    Tensor x = random_one_hot(batch, time, rng);
    const std::size_t t_prime = 1 + rng() % (time - 1);
    const Tensor before = step_outputs(model, x);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t k = 0; k < kNumClasses; ++k) x[(n * kNumClasses + k) * time + t_prime] = u(rng);
    }
    const Tensor after = step_outputs(model, x);
    const std::size_t channels = before.dim(1);
    bool changed_later = false;
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t ch = 0; ch < channels; ++ch) {
        for (std::size_t t = 0; t < time; ++t) {
          const std::size_t i = (n * channels + ch) * time + t;
          const bool same = std::memcmp(before.data() + i, after.data() + i, sizeof(double)) == 0;
          if (t < t_prime && !same) {
            return {false, fmt("trial %d (%s): output at t=%zu changed after perturbing t'=%zu", trial,
                               model_kind_name(c.kind).c_str(), t, t_prime)};
          }
          changed_later = changed_later || (t >= t_prime && !same);
          compared += t < t_prime;
        }
      }
    }
    if (!changed_later) return {false, fmt("trial %d: perturbation had no effect at all", trial)};
  }
  return {true, fmt("100 trials, %zu earlier outputs bit-identical", compared)};
}

Verdict receptive_field_measurement() {
  std::string detail;
  for (auto [k, blocks] : {std::pair<std::size_t, std::size_t>{2, 1}, {3, 1}, {3, 2}, {3, 4}}) {
    const std::size_t expected = 1 + 2 * (k - 1) * ((std::size_t{1} << blocks) - 1);
    ModelConfig c;
    c.kernel_size = k;
    c.blocks = blocks;
    const std::size_t measured = testing::measured_receptive_field(k, blocks, 200 + 10 * k + blocks, 4);
    detail += fmt("(k=%zu,L=%zu): %zu ", k, blocks, measured);
    if (measured != expected || receptive_field(c) != expected) {
      return {false, detail + fmt("expected %zu", expected)};
    }
  }
  return {true, detail};
}

Verdict gradient_checks() {
  double worst = 0.0;
  std::string where;
  std::size_t scalars = 0;
  std::mt19937_64 rng(303);
  for (auto kind : {ModelKind::kTcn, ModelKind::kTcnAttention, ModelKind::kLstm}) {
    ModelConfig c;
    c.kind = kind;
    c.blocks = 2;
    c.kernel_size = 3;
    c.channels = 4;
    c.lstm_hidden = 4;
    c.window = 16;
    c.dropout = 0.0;
    auto model = build(c, rng());
    // nonzero biases keep ReLU inputs off the kink
    std::uniform_real_distribution<double> shift(0.1, 0.5);
    for (auto& [path, p] : model.params) {
      if (path.ends_with(".bias")) {
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] += shift(rng);
      }
    }
    const Tensor x = random_one_hot(3, c.window, rng);
    const std::vector<int> targets{0, 2, 4};
    const auto r = testing::gradcheck(model.params, [&](nn::Tape& tape, const ParamBinder& bind) {
      return nn::softmax_cross_entropy(tape, forward(tape, c, bind, tape.reference(x), nullptr).logits, targets);
    });
    scalars += r.checked;
    if (r.checked != model.params.scalar_count()) return {false, model_kind_name(kind) + ": not every scalar checked"};
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = model_kind_name(kind) + " " + r.worst;
    }
  }
  return {worst < 1e-4, fmt("%zu scalars, max relative error %.3g", scalars, worst) + (worst > 0 ? " at " + where : "")};
}

Verdict cross_entropy_oracle() {
  nn::Tape tape;
  const std::vector<int> targets{0, 1, 2, 3, 4, 2, 2};
  const nn::Var uniform = tape.constant(Tensor({targets.size(), kNumClasses}, 0.0));
  const double loss = tape.value(nn::softmax_cross_entropy(tape, uniform, targets))[0];
  const double gap = std::abs(loss - std::log(5.0));
  if (gap > 1e-12) return {false, fmt("uniform loss off ln 5 by %.3g", gap)};

  // d(mean loss)/dz = (pi - y) / n, checked by finite differences
  std::mt19937_64 rng(404);
  std::normal_distribution<double> z(0.0, 2.0);
  nn::ParameterSet params;
  Tensor logits({targets.size(), kNumClasses});
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = z(rng);
  params.add("z", logits);
  const auto r = testing::gradcheck(params, [&](nn::Tape& t, const ParamBinder& bind) {
    return nn::softmax_cross_entropy(t, bind("z"), targets);
  });
  nn::Tape t2;
  const nn::Var zv = t2.parameter(params.at("z"));
  t2.backward(nn::softmax_cross_entropy(t2, zv, targets));
  const Tensor pi = nn::softmax(params.at("z"));
  double identity = 0.0;
  const double n = static_cast<double>(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (int k = 0; k < kNumClasses; ++k) {
      const double expected = (pi[i * kNumClasses + k] - (k == targets[i] ? 1.0 : 0.0)) / n;
      identity = std::max(identity, std::abs(params.at("z").grad()[i * kNumClasses + k] - expected));
    }
  }
  return {r.max_rel_error < 1e-6 && identity < 1e-15,
          fmt("|L - ln 5| = %.2g, (pi - y)/n gap %.2g, finite-difference rel error %.2g", gap, identity,
              r.max_rel_error)};
}

double test_accuracy(const TrainedModel& model, const StockDataset& data) {
  std::size_t hit = 0;
  const auto preds = predict_test(model, data);
  for (const auto& p : preds) hit += classify(p.probs) == to_int(p.truth);
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

Verdict learnability() {
  SyntheticSpec syn;
  syn.mode = RuleSpec{};
  syn.length = 50000;
  syn.stock_id = "RULE";
  const auto data = make_dataset("RULE", generate_synthetic_ticks(syn, 505), 64);
  std::array<std::size_t, kNumClasses> counts{};
  for (std::size_t j = 0; j < data.num_samples(); ++j) ++counts[to_int(data.target(j))];
  const double majority = static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
                          static_cast<double>(data.num_samples());
  if (majority > 0.5) return {false, fmt("majority-class share %.3f exceeds 0.5", majority)};

  std::string detail = fmt("majority share %.3f;", majority);
  bool pass = true;
  struct Run {
    ModelKind kind;
    double target;
    double lr;
  };
  for (const Run run : {Run{ModelKind::kTcn, 0.90, 3e-3}, Run{ModelKind::kLstm, 0.85, 1e-2}}) {
    ModelConfig c;
    c.kind = run.kind;
    c.blocks = 3;
    c.kernel_size = 3;
    c.channels = 16;
    c.lstm_hidden = 32;
    auto model = build(c, 506);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 256;
    tc.learning_rate = run.lr;
    double acc = 0.0;
    std::size_t epoch = 0;
    while (epoch < 10 && acc <= run.target) {
      tc.seed = 507 + epoch++;
      train(model, data, tc);
      acc = test_accuracy(model, data);
    }
    pass = pass && acc > run.target;
    detail += fmt(" %s %.4f after %zu epoch(s) (need > %.2f);", model_kind_name(run.kind).c_str(), acc, epoch,
                  run.target);
  }
  return {pass, detail};
}

Verdict garch_recovery() {
  const GarchSpec norm{VarianceModel::kSgarch, Innovation::kNorm};
  SgarchSpec sim;  // omega 1e-8, alpha 0.1, beta 0.8
  std::string detail;
  bool pass = true;
  double oracle_gap = 0.0, skew_gap = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = simulate_sgarch_returns(sim, 100000, 600 + seed);
    const auto fit = fit_mle(norm, r);
    if (!fit.converged) return {false, fmt("seed %llu: ", static_cast<unsigned long long>(seed)) + fit.failure};
    const auto& p = fit.params;
    const bool ok = std::abs(p.alpha - 0.1) <= 0.05 && std::abs(p.beta - 0.8) <= 0.05 && p.omega >= 0.5e-8 &&
                    p.omega <= 2e-8;
    pass = pass && ok;
    detail += fmt("[a=%.4f b=%.4f w=%.3g]", p.alpha, p.beta, p.omega);
    oracle_gap = std::max(oracle_gap, std::abs(neg_log_likelihood(norm, p, r) - testing::oracle_nll(norm, p, r)));
    GarchParams t = p;
    t.nu = 5.0 + static_cast<double>(seed);
    t.xi = 1.0;
    const double sstd = neg_log_likelihood({VarianceModel::kSgarch, Innovation::kSstd}, t, r);
    const double std_ = neg_log_likelihood({VarianceModel::kSgarch, Innovation::kStd}, t, r);
    skew_gap = std::max(skew_gap, std::abs(sstd - std_));
  }
  pass = pass && oracle_gap < 1e-9 && skew_gap < 1e-9;
  return {pass, detail + fmt(" oracle NLL gap %.2g, sstd(xi=1) vs std gap %.2g", oracle_gap, skew_gap)};
}

Verdict discretization_bridge() {
  SyntheticSpec syn;
  SgarchSpec sim;
  sim.omega = 2e-8;
  sim.alpha = 0.08;
  sim.beta = 0.75;
  syn.mode = sim;
  syn.length = 12000;
  syn.start_price_ticks = 2000;
  syn.stock_id = "BRIDGE";
  const auto data = make_dataset("BRIDGE", generate_synthetic_ticks(syn, 707), 64);
  double worst = 0.0;
  std::size_t checked = 0, fits = 0;
  for (const auto& spec : all_garch_specs()) {
    const auto fit = fit_mle(spec, training_returns(data));
    if (!fit.converged) continue;
    ++fits;
    for (const auto& p : forecast_test_probs(fit, data)) {
      if (p[0] < 0.0 || p[1] < 0.0 || p[2] < 0.0) return {false, spec.label() + ": negative probability"};
      worst = std::max(worst, std::abs(p[0] + p[1] + p[2] - 1.0));
      ++checked;
    }
  }
  const GarchSpec norm{VarianceModel::kSgarch, Innovation::kNorm};
  GarchParams zero_mean;
  const std::int64_t price = 1000;  // 10.00
  const double r_high = std::log1p(1.0 / static_cast<double>(price));
  const double tail = class_probabilities(norm, zero_mean, r_high / 1.645, price)[2];
  double asym = 0.0;
  for (double sigma : {1e-4, 1e-3, 1e-2}) {
    const auto p = class_probabilities(norm, zero_mean, sigma, price);
    asym = std::max(asym, std::abs(p[0] - p[2]));
  }
  const bool pass = fits > 0 && worst <= 1e-12 && std::abs(tail - 0.05) <= 1e-3 && asym < 1e-3;
  return {pass, fmt("%zu fits, %zu transactions, max |sum - 1| %.2g; P(C) at z=1.645: %.6f; max |P(A)-P(C)| %.2g",
                    fits, checked, worst, tail, asym)};
}

Verdict evaluation_identities() {
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<int> cls(0, 4), len(1, 500);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = len(rng);
    std::vector<int> truth(n), pred(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = cls(rng) < 2 ? 2 : cls(rng);
      pred[i] = cls(rng) < 2 ? 2 : cls(rng);
    }
    const auto cm5 = confusion(truth, pred, 5);
    const auto cm3 = confusion(coarsen_predictions(truth), coarsen_predictions(pred), 3);
    const auto m5 = metrics(cm5), m3 = metrics(cm3);
    if (m3.accuracy < m5.accuracy) return {false, fmt("trial %d: coarse accuracy dropped", trial)};
    if (m3.recall[1] != m5.recall[2]) return {false, fmt("trial %d: recall(B) != recall(2)", trial)};
    const auto merged_col = cm5.column_sum(0) + cm5.column_sum(1);
    const auto merged_hit = cm5.at(0, 0) + cm5.at(0, 1) + cm5.at(1, 0) + cm5.at(1, 1);
    const std::optional<double> merged =
        merged_col ? std::optional<double>(static_cast<double>(merged_hit) / static_cast<double>(merged_col))
                   : std::nullopt;
    if (m3.precision[0] != merged) return {false, fmt("trial %d: merged-column precision differs", trial)};
  }
  return {true, "1000 random prediction sets"};
}

Verdict undefined_precision(const fs::path& scratch) {
  std::mt19937_64 rng(909);
  std::uniform_int_distribution<int> cls(0, 2);
  std::vector<MetricsReport> stocks;
  for (int s = 0; s < 3; ++s) {
    std::vector<int> truth(200), only_b(200, 1);
    for (auto& t : truth) t = cls(rng);
    stocks.push_back(metrics(confusion(truth, only_b, 3)));
    if (stocks.back().precision[0] || stocks.back().precision[2]) return {false, "per-stock precision defined"};
  }
  const auto avg = macro_average(stocks);
  std::string row;
  for (const auto& v : avg.precision) row += format_metric(v) + ",";
  const bool unit_ok = !avg.precision[0] && !avg.precision[2] && avg.precision[1].has_value() &&
                       format_metric(avg.precision[0]) == "-";

  // end to end: on all-flat data the deep model predicts only B
  ExperimentConfig c;
  c.synthetic = "flat";
  c.stocks = 2;
  c.length = 2000;
  c.models = {"TCN"};
  c.model.channels = 4;
  c.model.blocks = 2;
  c.model.window = 16;
  c.train.epochs = 2;
  c.train.learning_rate = 1e-2;
  c.out = (scratch / "flat").string();
  std::ostringstream log;
  const auto run = cmd_run(c, log);
  std::ifstream in(run.dir / "tables" / "table1.csv");
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  const bool table_ok = line == "TCN,-,1.000000,-,-,1.000000,-,1.000000";
  return {unit_ok && table_ok, "macro precision (A, B, C) = " + row + " table row: " + line};
}

Verdict end_to_end_determinism(const fs::path& scratch) {
  auto config_for = [&](const std::string& root) {
    ExperimentConfig c;
    c.synthetic = "sgarch";
    c.stocks = 2;
    c.length = 4000;
    c.sgarch.omega = 2e-8;
    c.sgarch.alpha = 0.08;
    c.sgarch.beta = 0.75;
    c.models = {"TCN", "LSTM", "SGARCH-norm", "EGARCH-std"};
    c.model.channels = 8;
    c.model.blocks = 2;
    c.model.window = 16;
    c.model.lstm_hidden = 8;
    c.train.epochs = 2;
    c.garch.min_returns = 500;
    c.jobs = root == "a" ? 1 : 4;
    c.out = (scratch / root).string();
    return c;
  };
  auto metrics_bytes = [](const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir / "metrics")) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) {
      std::ifstream in(f, std::ios::binary);
      std::ostringstream s;
      s << in.rdbuf();
      all += f.filename().string() + "\n" + s.str();
    }
    return std::pair{files.size(), all};
  };
  std::ostringstream log;
  const auto a = cmd_run(config_for("a"), log);
  const auto b = cmd_run(config_for("b"), log);
  const auto [na, bytes_a] = metrics_bytes(a.dir);
  const auto [nb, bytes_b] = metrics_bytes(b.dir);
  const bool pass = a.failed == 0 && b.failed == 0 && b.resumed == 0 && na == nb && na > 0 && bytes_a == bytes_b;
  return {pass, fmt("%zu metric files, %zu bytes, serial vs 4 threads, %s", na, bytes_a.size(),
                    bytes_a == bytes_b ? "byte-identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  const fs::path scratch = fs::temp_directory_path() / ("uhf_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(scratch);
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "causality", 60, causality},
      {2, "receptive field", 60, receptive_field_measurement},
      {3, "gradient checks", 120, gradient_checks},
      {4, "cross-entropy oracle", 60, cross_entropy_oracle},
      {5, "learnability", 600, learnability},
      {6, "GARCH recovery", 300, garch_recovery},
      {7, "discretization bridge", 300, discretization_bridge},
      {8, "evaluation identities", 60, evaluation_identities},
      {9, "undefined precision", 60, [&] { return undefined_precision(scratch); }},
      {10, "end-to-end determinism", 300, [&] { return end_to_end_determinism(scratch); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      v.pass = false;
      v.detail += fmt(" [over the %.0f s budget]", c.budget_s);
    }
    failed += !v.pass;
    std::printf("%s %2d %-24s %7.1fs  %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, secs, v.detail.c_str());
    std::fflush(stdout);
  }
  std::error_code ec;
  fs::remove_all(scratch, ec);
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
