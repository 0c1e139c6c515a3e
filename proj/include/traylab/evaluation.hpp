#pragma once

// Question-answering and layout metrics.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "traylab/catalog.hpp"

namespace traylab {

/// |A ∩ B| / |A ∪ B|, with 1.0 when both are empty. Duplicates are ignored.
double iou(std::span<const Color> a, std::span<const Color> b);

struct LayoutMetrics {
  double color_location = 0.0;       // C+L
  double location_type = 0.0;        // L+T
  double color_location_type = 0.0;  // C+L+T
  bool operator==(const LayoutMetrics&) const = default;
};

/// Fraction of ground-truth instances matched by some predicted instance on
/// the given attributes. An empty ground truth scores 1.0 when the prediction
/// is empty too, else 0.
LayoutMetrics layout_metrics(const SceneLayout& predicted, const SceneLayout& truth);

struct PredictionRecord {
  std::string id;
  std::vector<Color> answer;
  std::optional<SceneLayout> layout;
};

struct TruthRecord {
  std::string id;
  std::vector<Color> answer;
  SceneLayout layout;
};

struct EvaluationSummary {
  std::size_t problems = 0;
  double mean_iou = 0.0;
  double precise_iou_rate = 0.0;  // fraction with IoU exactly 1
  std::vector<double> per_problem_iou;
  std::optional<LayoutMetrics> layout;  // mean over problems that carry a layout
};

/// Records are matched by position; differing ids or counts are a StructuralError.
EvaluationSummary evaluate(std::span<const PredictionRecord> predictions, std::span<const TruthRecord> truths);

}  // namespace traylab
