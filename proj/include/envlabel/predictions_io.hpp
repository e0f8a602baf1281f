#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "envlabel/label_model.hpp"
#include "envlabel/metrics.hpp"

namespace envlabel {

/// One line of a predictions file:
///   {"frame_id": "...", "daytime": "Day", "precipitation": "LightSnow", "fog": "None",
///    "road": "Wet", "roadside": "Dry", "infrastructure": "Urban",
///    "scores": {"daytime": [0.9, 0.05, 0.05], ...}}
/// Category values use class_name(); "scores" and each of its entries are optional.
struct FramePrediction {
  std::string frame_id;
  std::array<std::size_t, kCategoryCount> classes{};
  std::array<std::optional<std::vector<double>>, kCategoryCount> scores;
};

/// Throws ParseError naming the field (missing category, unknown value, ...).
FramePrediction parse_prediction(std::string_view line);
std::string format_prediction(const FramePrediction& prediction);
std::vector<FramePrediction> parse_predictions(std::string_view text);

struct EvaluationInput {
  std::vector<metrics::CategoryData> categories;  // six, in taxonomy order
  std::size_t matched = 0;
  std::vector<std::string> unmatched;  // predicted frames without a Final ground-truth label
};

/// Aligns predictions with Final-valid ground truth by frame_id. Scores are
/// used for a category only if every matched prediction carries them.
EvaluationInput align_predictions(const std::vector<FramePrediction>& predictions,
                                  const std::vector<FrameAnnotation>& ground_truth);

}  // namespace envlabel
