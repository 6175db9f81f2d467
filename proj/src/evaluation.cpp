#include "uhf/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace uhf {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < k; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t pred) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < k; ++t) s += at(t, pred);
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (std::size_t c = 0; c < k; ++c) s += at(c, c);
  return s;
}

int classify(std::span<const double> probs) {
  if (probs.empty()) throw EvaluationError("classify: empty probability vector");
  // max_element keeps the first of equal maxima
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

int coarsen_label(int five_class) {
  if (five_class < 0 || five_class > 4) throw EvaluationError("coarsen_label: label out of range");
  return five_class <= 1 ? 0 : five_class == 2 ? 1 : 2;
}

std::vector<int> coarsen_predictions(std::span<const int> five_class) {
  std::vector<int> out(five_class.size());
  std::transform(five_class.begin(), five_class.end(), out.begin(), coarsen_label);
  return out;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred, std::size_t k) {
  if (truth.size() != pred.size()) {
    throw EvaluationError("confusion: " + std::to_string(truth.size()) + " labels vs " + std::to_string(pred.size()) +
                          " predictions");
  }
  ConfusionMatrix cm(k);
  const int kk = static_cast<int>(k);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= kk || pred[i] < 0 || pred[i] >= kk) {
      throw EvaluationError("confusion: label out of range at position " + std::to_string(i));
    }
    ++cm.at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(pred[i]));
  }
  return cm;
}

ConfusionMatrix coarsen_matrix(const ConfusionMatrix& five) {
  if (five.k != 5) throw EvaluationError("coarsen_matrix: expected five classes");
  ConfusionMatrix out(3);
  for (int t = 0; t < 5; ++t) {
    for (int p = 0; p < 5; ++p) out.at(coarsen_label(t), coarsen_label(p)) += five.at(t, p);
  }
  return out;
}

ConfusionMatrix pooled(std::span<const ConfusionMatrix> matrices) {
  if (matrices.empty()) throw EvaluationError("pooled: no matrices");
  ConfusionMatrix out(matrices.front().k);
  for (const auto& m : matrices) {
    if (m.k != out.k) throw EvaluationError("pooled: class count mismatch");
    for (std::size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += m.counts[i];
  }
  return out;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw EvaluationError("metrics: empty confusion matrix");
  MetricsReport r;
  r.recall.resize(cm.k);
  r.precision.resize(cm.k);
  for (std::size_t c = 0; c < cm.k; ++c) {
    const double hit = static_cast<double>(cm.at(c, c));
    if (const auto row = cm.row_sum(c)) r.recall[c] = hit / static_cast<double>(row);
    if (const auto col = cm.column_sum(c)) r.precision[c] = hit / static_cast<double>(col);
  }
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  return r;
}

namespace {

std::vector<std::optional<double>> mean_or_absent(std::span<const MetricsReport> reports,
                                                  std::vector<std::optional<double>> MetricsReport::*field) {
  const std::size_t k = (reports.front().*field).size();
  std::vector<std::optional<double>> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    double sum = 0.0;
    bool complete = true;
    for (const auto& r : reports) {
      const auto& v = (r.*field)[c];
      if (!v) {
        complete = false;
        break;
      }
      sum += *v;
    }
    if (complete) out[c] = sum / static_cast<double>(reports.size());
  }
  return out;
}

}  // namespace

MetricsReport macro_average(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw EvaluationError("macro_average: no reports");
  const std::size_t k = reports.front().recall.size();
  for (const auto& r : reports) {
    if (r.recall.size() != k || r.precision.size() != k) throw EvaluationError("macro_average: class count mismatch");
  }
  if (reports.size() == 1) return reports.front();
  MetricsReport out;
  out.recall = mean_or_absent(reports, &MetricsReport::recall);
  out.precision = mean_or_absent(reports, &MetricsReport::precision);
  double acc = 0.0;
  for (const auto& r : reports) acc += r.accuracy;
  out.accuracy = acc / static_cast<double>(reports.size());
  return out;
}

std::vector<std::vector<std::size_t>> best_precision_counts(const std::vector<std::vector<MetricsReport>>& reports) {
  if (reports.empty()) return {};
  const std::size_t stocks = reports.front().size();
  const std::size_t k = stocks ? reports.front().front().precision.size() : 0;
  for (const auto& model : reports) {
    if (model.size() != stocks) throw EvaluationError("best_precision_counts: models cover different stock sets");
    for (const auto& r : model) {
      if (r.precision.size() != k) throw EvaluationError("best_precision_counts: class count mismatch");
    }
  }
  std::vector<std::vector<std::size_t>> counts(reports.size(), std::vector<std::size_t>(k, 0));
  for (std::size_t s = 0; s < stocks; ++s) {
    for (std::size_t c = 0; c < k; ++c) {
      std::optional<double> best;
      for (const auto& model : reports) {
        const auto& v = model[s].precision[c];
        if (v && (!best || *v > *best)) best = v;
      }
      if (!best) continue;
      for (std::size_t m = 0; m < reports.size(); ++m) {
        const auto& v = reports[m][s].precision[c];
        if (v && *v == *best) ++counts[m][c];
      }
    }
  }
  return counts;
}

std::string class_name(std::size_t k, std::size_t c) {
  if (k == 3) return std::string(1, static_cast<char>('A' + c));
  return std::to_string(c);
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
  out << "truth";
  for (std::size_t p = 0; p < cm.k; ++p) out << ',' << class_name(cm.k, p);
  out << '\n';
  for (std::size_t t = 0; t < cm.k; ++t) {
    out << class_name(cm.k, t);
    for (std::size_t p = 0; p < cm.k; ++p) out << ',' << cm.at(t, p);
    out << '\n';
  }
}

ConfusionMatrix read_confusion_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw EvaluationError("confusion csv: missing header");
  const auto k = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (k != 3 && k != 5) throw EvaluationError("confusion csv: expected 3 or 5 classes");
  ConfusionMatrix cm(k);
  for (std::size_t t = 0; t < k; ++t) {
    if (!std::getline(in, line)) throw EvaluationError("confusion csv: missing row " + std::to_string(t));
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    if (cell != class_name(k, t)) throw EvaluationError("confusion csv: unexpected row label '" + cell + "'");
    for (std::size_t p = 0; p < k; ++p) {
      if (!std::getline(row, cell, ',')) throw EvaluationError("confusion csv: short row " + std::to_string(t));
      try {
        std::size_t used = 0;
        cm.at(t, p) = std::stoull(cell, &used);
        if (used != cell.size()) throw EvaluationError("");
      } catch (const std::exception&) {
        throw EvaluationError("confusion csv: bad count '" + cell + "'");
      }
    }
  }
  return cm;
}

std::string format_metric(const std::optional<double>& value) {
  if (!value) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *value);
  return buf;
}

nlohmann::ordered_json metrics_json(const MetricsReport& report, std::size_t k) {
  auto section = [&](const std::vector<std::optional<double>>& values) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < k; ++c) {
      j[class_name(k, c)] = values[c] ? nlohmann::ordered_json(*values[c]) : nlohmann::ordered_json(nullptr);
    }
    return j;
  };
  nlohmann::ordered_json j;
  j["recall"] = section(report.recall);
  j["precision"] = section(report.precision);
  j["accuracy"] = report.accuracy;
  return j;
}

}  // namespace uhf
