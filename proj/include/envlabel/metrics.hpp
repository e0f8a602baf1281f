#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace envlabel::metrics {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t n_classes = 0) : n_(n_classes), cells_(n_classes * n_classes, 0) {}

  std::size_t n_classes() const { return n_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return cells_[truth * n_ + predicted]; }
  std::uint64_t& at(std::size_t truth, std::size_t predicted) { return cells_[truth * n_ + predicted]; }
  std::uint64_t total() const;
  std::uint64_t trace() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> cells_;
};

/// Throws std::out_of_range for an index >= n_classes.
ConfusionMatrix confusion(std::span<const std::pair<std::size_t, std::size_t>> pairs, std::size_t n_classes);

enum class Averaging { Macro, Micro, Weighted };

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;  // false when the class was never predicted
  bool recall_defined = true;     // false when the class never occurs
  std::uint64_t support = 0;
};

struct Summary {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<ClassScores> per_class;
  /// Some per-class precision or recall had a zero denominator and entered the
  /// average as 0.
  bool has_undefined = false;
};

/// Accuracy plus averaged precision, recall and F1. With Macro, F1 is the mean
/// of per-class F1 values. Undefined per-class terms count as 0. Throws
/// std::invalid_argument on an empty matrix.
Summary summarize(const ConfusionMatrix& cm, Averaging averaging = Averaging::Macro);

struct ScoredPrediction {
  std::size_t truth = 0;
  std::vector<double> scores;  // one per class, higher = more confident
};

/// One-vs-rest area under the precision-recall curve for class `cls`, by
/// right-continuous step integration over distinct score thresholds (tied
/// scores form one threshold). nullopt when there is no positive example.
std::optional<double> auprc(std::span<const ScoredPrediction> predictions, std::size_t cls);

/// Aligned predictions for one taxonomy category.
struct CategoryData {
  std::string name;
  std::size_t n_classes = 0;
  std::vector<std::size_t> truth;
  std::vector<std::size_t> predicted;
  /// Optional per-sample score vectors; when empty, one-hot scores of
  /// `predicted` are used for AUPRC.
  std::vector<std::vector<double>> scores;
};

struct CategoryReport {
  std::string name;
  Summary summary;
  ConfusionMatrix confusion;
  std::vector<std::optional<double>> class_auprc;
  /// Mean over classes where AUPRC is computable; nullopt if none is.
  std::optional<double> auprc;
};

struct MetricsReport {
  std::vector<CategoryReport> categories;
  Averaging averaging = Averaging::Macro;
  // Unweighted means across categories.
  double mean_accuracy = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;
  std::optional<double> mean_auprc;

  /// Fixed-width table: Category | Accuracy | Precision | Recall | F1-Score | AUPRC.
  std::string to_table() const;
  /// One JSON record per category plus a "mean" record.
  std::string to_records() const;
};

/// Throws std::invalid_argument on misaligned lengths, empty categories or
/// score vectors of the wrong size.
MetricsReport evaluate(std::span<const CategoryData> categories, Averaging averaging = Averaging::Macro);

}  // namespace envlabel::metrics
