#pragma once

// Black-box optimizers over the flattened per-class parameter vector.
//
// Every optimizer follows the same protocol: propose() returns a batch of
// candidates given the feedback trace so far, the caller evaluates them, then
// observe() receives the evaluated points in proposal order. Batches have one
// element except for CMA-ES, which proposes a whole generation.

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "traylab/catalog.hpp"
#include "traylab/rng.hpp"

namespace traylab {

using ParamVector = std::vector<double>;

/// Layout of the parameter vector: for each class in catalog order, its
/// (sliding_friction, armature, stiffness, damping). Masses are fixed.
class ParamSpace {
 public:
  explicit ParamSpace(std::vector<ObjectClass> classes, ParamRanges ranges = {});

  std::size_t dim() const { return 4 * classes_.size(); }
  const std::vector<ObjectClass>& classes() const { return classes_; }
  const Bound& bound(std::size_t i) const;
  std::vector<Bound> bounds() const;

  ParamVector flatten(const ClassParamMap& params) const;
  /// Masses come from the class catalog.
  ClassParamMap unflatten(std::span<const double> v) const;

  /// Coordinate-wise clamp into the closed bounds.
  ParamVector clamp(ParamVector v) const;
  /// Clamp, round to the 0.1 grid, and step off open endpoints.
  ParamVector snap(ParamVector v) const;

 private:
  std::vector<ObjectClass> classes_;
  ParamRanges ranges_;
};

double snap_to_grid(double v, const Bound& b);

struct TracePoint {
  ParamVector params;
  std::map<int, double> per_object_error;
  double total_error = 0.0;
};

/// Append-only evaluation history. best_index() is the earliest minimum.
class OptTrace {
 public:
  void append(TracePoint p);
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const TracePoint& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<TracePoint>& points() const { return points_; }
  std::optional<std::size_t> best_index() const { return best_; }
  const TracePoint& best() const;

 private:
  std::vector<TracePoint> points_;
  std::optional<std::size_t> best_;
};

struct Proposal {
  ParamVector params;
  std::string program_text;  // the raw program when the proposer produced one
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual std::string name() const = 0;
  /// May throw OptimizerStepError when no usable proposal could be produced.
  virtual std::vector<Proposal> propose(const OptTrace& feedback, Rng& rng) = 0;
  virtual void observe(std::span<const TracePoint> evaluated) { (void)evaluated; }
};

/// Uniform per coordinate, snapped to the 0.1 grid inside open endpoints.
ParamVector random_propose(std::span<const Bound> bounds, Rng& rng);

class RandomSearch final : public Optimizer {
 public:
  explicit RandomSearch(ParamSpace space, std::size_t batch = 1);
  std::string name() const override { return "random"; }
  std::vector<Proposal> propose(const OptTrace& feedback, Rng& rng) override;

 private:
  ParamSpace space_;
  std::size_t batch_;
};

/// Replays a fixed list: entry i for a trace of length i, the last entry
/// once exhausted. Entries are clamped into bounds.
class ScriptedOptimizer final : public Optimizer {
 public:
  ScriptedOptimizer(ParamSpace space, std::vector<ParamVector> script);
  std::string name() const override { return "scripted"; }
  std::vector<Proposal> propose(const OptTrace& feedback, Rng& rng) override;

 private:
  ParamSpace space_;
  std::vector<ParamVector> script_;
};

// ---------------------------------------------------------------------------
// CMA-ES

struct CmaEsSettings {
  std::size_t lambda = 0;  // 0: 4 + floor(3 ln n)
  double sigma = 0.3;
  std::vector<Bound> bounds;  // empty: unbounded
};

/// (mu/mu_w, lambda)-CMA-ES with the standard default strategy parameters,
/// cumulative step-size adaptation, and rank-one + rank-mu covariance updates.
/// Candidates are clamped to the bounds and the clamped points enter the update.
class CmaEs {
 public:
  CmaEs(std::vector<double> mean, CmaEsSettings settings);

  static std::size_t default_lambda(std::size_t n);

  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  std::size_t lambda() const { return lambda_; }
  double sigma() const { return sigma_; }
  std::vector<double> mean() const;
  std::size_t generation() const { return generation_; }

  std::vector<std::vector<double>> ask(Rng& rng);
  /// Throws StructuralError before ask() or when fitness.size() != lambda.
  void tell(std::span<const double> fitness);

  double best_value() const { return best_value_; }
  const std::vector<double>& best_point() const { return best_point_; }

 private:
  void update_eigensystem();

  std::size_t lambda_;
  std::size_t mu_;
  Eigen::VectorXd weights_;
  double mu_eff_;
  double c_sigma_, d_sigma_, c_c_, c_1_, c_mu_, chi_n_;
  std::vector<Bound> bounds_;

  Eigen::VectorXd mean_;
  double sigma_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd basis_;  // eigenvectors of cov_
  Eigen::VectorXd scale_;  // sqrt of eigenvalues
  Eigen::VectorXd p_sigma_, p_c_;
  std::size_t generation_ = 0;
  std::size_t evaluations_ = 0;

  std::vector<Eigen::VectorXd> pending_;
  double best_value_;
  std::vector<double> best_point_;
};

/// CMA-ES in the unit cube mapped affinely onto the parameter bounds,
/// starting from the center with sigma 0.3. One generation per propose().
class CmaEsOptimizer final : public Optimizer {
 public:
  explicit CmaEsOptimizer(ParamSpace space, std::size_t lambda = 0, double sigma = 0.3);
  std::string name() const override { return "cmaes"; }
  std::size_t batch_size() const { return es_.lambda(); }
  std::vector<Proposal> propose(const OptTrace& feedback, Rng& rng) override;
  void observe(std::span<const TracePoint> evaluated) override;

 private:
  ParamSpace space_;
  CmaEs es_;
};

// ---------------------------------------------------------------------------
// Gaussian-process Bayesian optimization

struct GpBoSettings {
  std::size_t initial_points = 5;
  std::size_t candidates = 1024;
  double jitter = 1e-6;
};

/// Minimization with a squared-exponential GP on inputs normalized to the
/// unit cube and standardized outputs; the length-scale is the median pairwise
/// distance of the observed inputs. Returns the expected-improvement maximizer
/// over uniform random candidates. Fewer than `initial_points` observations, or
/// a degenerate fit, yields a space-filling (maximin over 64 draws) sample.
class GpBo {
 public:
  explicit GpBo(std::vector<Bound> bounds, GpBoSettings settings = {});

  std::vector<double> propose(std::span<const std::vector<double>> xs, std::span<const double> ys, Rng& rng) const;

  /// True when the last propose() call fell back to a random sample.
  bool last_was_fallback() const { return last_fallback_; }

 private:
  std::vector<double> space_filling(std::span<const std::vector<double>> xs, Rng& rng) const;

  std::vector<Bound> bounds_;
  GpBoSettings settings_;
  mutable bool last_fallback_ = false;
};

class GpBoOptimizer final : public Optimizer {
 public:
  explicit GpBoOptimizer(ParamSpace space, GpBoSettings settings = {});
  std::string name() const override { return "bo"; }
  std::vector<Proposal> propose(const OptTrace& feedback, Rng& rng) override;

 private:
  ParamSpace space_;
  GpBo bo_;
};

}  // namespace traylab
