#include "traylab/optimizers.hpp"

#include <algorithm>
#include <cmath>

#include "traylab/errors.hpp"

namespace traylab {

ParamSpace::ParamSpace(std::vector<ObjectClass> classes, ParamRanges ranges)
    : classes_(std::move(classes)), ranges_(ranges) {
  std::sort(classes_.begin(), classes_.end());
  classes_.erase(std::unique(classes_.begin(), classes_.end()), classes_.end());
  if (classes_.empty()) throw StructuralError("parameter space needs at least one class");
}

const Bound& ParamSpace::bound(std::size_t i) const {
  switch (i % 4) {
    case 0: return ranges_.sliding_friction;
    case 1: return ranges_.armature;
    case 2: return ranges_.stiffness;
    default: return ranges_.damping;
  }
}

std::vector<Bound> ParamSpace::bounds() const {
  std::vector<Bound> out;
  for (std::size_t i = 0; i < dim(); ++i) out.push_back(bound(i));
  return out;
}

ParamVector ParamSpace::flatten(const ClassParamMap& params) const {
  ParamVector v;
  v.reserve(dim());
  for (ObjectClass cls : classes_) {
    auto it = params.find(cls);
    if (it == params.end()) throw StructuralError("parameters lack class " + std::string(to_string(cls)));
    const PhysicsParams& p = it->second;
    v.insert(v.end(), {p.sliding_friction, p.armature, p.stiffness, p.damping});
  }
  return v;
}

ClassParamMap ParamSpace::unflatten(std::span<const double> v) const {
  if (v.size() != dim()) {
    throw StructuralError("parameter vector has " + std::to_string(v.size()) + " entries, expected " +
                          std::to_string(dim()));
  }
  ClassParamMap out;
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    out[classes_[c]] = {v[4 * c], v[4 * c + 1], v[4 * c + 2], v[4 * c + 3], class_info(classes_[c]).mass};
  }
  return out;
}

ParamVector ParamSpace::clamp(ParamVector v) const {
  if (v.size() != dim()) throw StructuralError("parameter vector has the wrong dimension");
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = bound(i).clamp(v[i]);
  return v;
}

ParamVector ParamSpace::snap(ParamVector v) const {
  if (v.size() != dim()) throw StructuralError("parameter vector has the wrong dimension");
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = snap_to_grid(v[i], bound(i));
  return v;
}

double snap_to_grid(double v, const Bound& b) {
  auto round1 = [](double x) { return std::round(x * 10.0) / 10.0; };
  double g = round1(b.clamp(v));
  if (b.lo_open && g <= b.lo) g = round1(b.lo + 0.1);
  if (b.hi_open && g >= b.hi) g = round1(b.hi - 0.1);
  return g;
}

void OptTrace::append(TracePoint p) {
  points_.push_back(std::move(p));
  const std::size_t i = points_.size() - 1;
  if (!best_ || points_[i].total_error < points_[*best_].total_error) best_ = i;
}

const TracePoint& OptTrace::best() const {
  if (!best_) throw StructuralError("optimization trace is empty");
  return points_[*best_];
}

ParamVector random_propose(std::span<const Bound> bounds, Rng& rng) {
  ParamVector v;
  v.reserve(bounds.size());
  for (const Bound& b : bounds) v.push_back(snap_to_grid(rng.uniform(b.lo, b.hi), b));
  return v;
}

RandomSearch::RandomSearch(ParamSpace space, std::size_t batch) : space_(std::move(space)), batch_(std::max<std::size_t>(batch, 1)) {}

std::vector<Proposal> RandomSearch::propose(const OptTrace&, Rng& rng) {
  const auto bounds = space_.bounds();
  std::vector<Proposal> out;
  for (std::size_t i = 0; i < batch_; ++i) out.push_back({random_propose(bounds, rng), {}});
  return out;
}

ScriptedOptimizer::ScriptedOptimizer(ParamSpace space, std::vector<ParamVector> script)
    : space_(std::move(space)), script_(std::move(script)) {
  if (script_.empty()) throw StructuralError("scripted optimizer needs at least one entry");
  for (const auto& v : script_) {
    if (v.size() != space_.dim()) throw StructuralError("scripted entry has the wrong dimension");
  }
}

std::vector<Proposal> ScriptedOptimizer::propose(const OptTrace& feedback, Rng&) {
  const std::size_t i = std::min(feedback.size(), script_.size() - 1);
  return {{space_.clamp(script_[i]), {}}};
}

}  // namespace traylab
