#include "traylab/evaluation.hpp"

#include <set>

#include "traylab/errors.hpp"

namespace traylab {

double iou(std::span<const Color> a, std::span<const Color> b) {
  const std::set<Color> sa(a.begin(), a.end());
  const std::set<Color> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t common = 0;
  for (Color c : sa) common += sb.count(c);
  return static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);
}

LayoutMetrics layout_metrics(const SceneLayout& predicted, const SceneLayout& truth) {
  if (truth.entries.empty()) {
    const double v = predicted.entries.empty() ? 1.0 : 0.0;
    return {v, v, v};
  }
  std::size_t cl = 0, lt = 0, clt = 0;
  for (const auto& t : truth.entries) {
    bool m_cl = false, m_lt = false, m_clt = false;
    for (const auto& p : predicted.entries) {
      if (p.cell != t.cell) continue;
      m_cl = m_cl || p.color == t.color;
      m_lt = m_lt || p.cls == t.cls;
      m_clt = m_clt || (p.color == t.color && p.cls == t.cls);
    }
    cl += m_cl;
    lt += m_lt;
    clt += m_clt;
  }
  const double n = static_cast<double>(truth.entries.size());
  return {static_cast<double>(cl) / n, static_cast<double>(lt) / n, static_cast<double>(clt) / n};
}

EvaluationSummary evaluate(std::span<const PredictionRecord> predictions, std::span<const TruthRecord> truths) {
  if (predictions.size() != truths.size()) {
    throw StructuralError("evaluation got " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(truths.size()) + " problems");
  }
  EvaluationSummary s;
  s.problems = predictions.size();
  LayoutMetrics sum;
  std::size_t with_layout = 0;
  std::size_t precise = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].id != truths[i].id) {
      throw StructuralError("problem id mismatch at position " + std::to_string(i) + ": '" + predictions[i].id +
                            "' vs '" + truths[i].id + "'");
    }
    const double v = iou(predictions[i].answer, truths[i].answer);
    s.per_problem_iou.push_back(v);
    total += v;
    precise += v == 1.0;
    if (predictions[i].layout) {
      const LayoutMetrics m = layout_metrics(*predictions[i].layout, truths[i].layout);
      sum.color_location += m.color_location;
      sum.location_type += m.location_type;
      sum.color_location_type += m.color_location_type;
      ++with_layout;
    }
  }
  if (s.problems > 0) {
    s.mean_iou = total / static_cast<double>(s.problems);
    s.precise_iou_rate = static_cast<double>(precise) / static_cast<double>(s.problems);
  }
  if (with_layout > 0) {
    const double n = static_cast<double>(with_layout);
    s.layout = LayoutMetrics{sum.color_location / n, sum.location_type / n, sum.color_location_type / n};
  }
  return s;
}

}  // namespace traylab
