#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace uhf {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// counts[t * k + p]: rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(std::size_t classes = 0) : k(classes), counts(classes * classes, 0) {}
  std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts[truth * k + pred]; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * k + pred]; }
  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t column_sum(std::size_t pred) const;
  std::uint64_t trace() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricsReport {
  std::vector<std::optional<double>> recall;
  std::vector<std::optional<double>> precision;  // absent when the class was never predicted
  double accuracy = 0.0;
};

/// Argmax, ties to the lowest index. Throws on an empty vector.
int classify(std::span<const double> probs);

/// {0,1} -> 0 (A), {2} -> 1 (B), {3,4} -> 2 (C).
int coarsen_label(int five_class);
std::vector<int> coarsen_predictions(std::span<const int> five_class);

/// Throws EvaluationError on length mismatch or a label outside [0, k).
ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred, std::size_t k);

/// Five-class matrix with rows and columns merged by the coarsening map.
ConfusionMatrix coarsen_matrix(const ConfusionMatrix& five);

/// Element-wise sum. Throws on empty input or mismatched class counts.
ConfusionMatrix pooled(std::span<const ConfusionMatrix> matrices);

/// Throws EvaluationError for an empty matrix.
MetricsReport metrics(const ConfusionMatrix& cm);

/// Unweighted mean over stocks; a metric absent for any stock is absent.
MetricsReport macro_average(std::span<const MetricsReport> reports);

/// reports[m][s] is model m on stock s. Returns counts[m][c]: the number of
/// stocks on which model m attains the highest defined precision for class c,
/// every tied model being credited.
std::vector<std::vector<std::size_t>> best_precision_counts(const std::vector<std::vector<MetricsReport>>& reports);

/// "A", "B", "C" for three classes; "0".."4" for five.
std::string class_name(std::size_t k, std::size_t c);

/// Header row "truth,<pred classes...>", one row per true class.
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm);
ConfusionMatrix read_confusion_csv(std::istream& in);

/// Fixed six-decimal rendering; "-" when absent.
std::string format_metric(const std::optional<double>& value);

/// {"recall": {...}, "precision": {...}, "accuracy": x}, null for absent values.
nlohmann::ordered_json metrics_json(const MetricsReport& report, std::size_t k);

}  // namespace uhf
