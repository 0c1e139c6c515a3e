#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>

#include "traylab/errors.hpp"
#include "traylab/optimizers.hpp"

namespace traylab {
namespace {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Expected improvement below `best` for a Gaussian prediction.
double expected_improvement(double mean, double sd, double best) {
  if (sd <= 0.0) return std::max(best - mean, 0.0);
  const double z = (best - mean) / sd;
  return (best - mean) * normal_cdf(z) + sd * normal_pdf(z);
}

}  // namespace

GpBo::GpBo(std::vector<Bound> bounds, GpBoSettings settings) : bounds_(std::move(bounds)), settings_(settings) {
  if (bounds_.empty()) throw StructuralError("GP-BO needs at least one dimension");
  if (settings_.candidates == 0) throw StructuralError("GP-BO needs at least one candidate");
  for (const auto& b : bounds_) {
    if (!(b.hi > b.lo)) throw StructuralError("GP-BO bounds must have positive width");
  }
}

std::vector<double> GpBo::space_filling(std::span<const std::vector<double>> xs, Rng& rng) const {
  last_fallback_ = true;
  const std::size_t d = bounds_.size();
  auto draw = [&] {
    std::vector<double> u(d);
    for (auto& v : u) v = rng.uniform();
    return u;
  };
  std::vector<double> best = draw();
  if (!xs.empty()) {
    double best_gap = -1.0;
    for (int k = 0; k < 64; ++k) {
      std::vector<double> u = k == 0 ? best : draw();
      double gap = std::numeric_limits<double>::infinity();
      for (const auto& x : xs) {
        double sq = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double t = (x[i] - bounds_[i].lo) / (bounds_[i].hi - bounds_[i].lo) - u[i];
          sq += t * t;
        }
        gap = std::min(gap, sq);
      }
      if (gap > best_gap) {
        best_gap = gap;
        best = std::move(u);
      }
    }
  }
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = bounds_[i].clamp(bounds_[i].lo + best[i] * (bounds_[i].hi - bounds_[i].lo));
  return out;
}

std::vector<double> GpBo::propose(std::span<const std::vector<double>> xs, std::span<const double> ys, Rng& rng) const {
  if (xs.size() != ys.size()) throw StructuralError("GP-BO inputs and outputs differ in length");
  const std::size_t d = bounds_.size();
  for (const auto& x : xs) {
    if (x.size() != d) throw StructuralError("GP-BO input has the wrong dimension");
  }
  if (xs.size() < settings_.initial_points) return space_filling(xs, rng);

  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      x(r, static_cast<Eigen::Index>(i)) =
          (xs[static_cast<std::size_t>(r)][i] - bounds_[i].lo) / (bounds_[i].hi - bounds_[i].lo);
    }
  }
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), n);
  const double y_mean = y.mean();
  const double y_sd = std::sqrt((y.array() - y_mean).square().sum() / static_cast<double>(n));
  y = (y.array() - y_mean) / (y_sd > 0.0 ? y_sd : 1.0);

  std::vector<double> distances;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a + 1; b < n; ++b) distances.push_back((x.row(a) - x.row(b)).norm());
  }
  if (distances.empty()) return space_filling(xs, rng);
  std::nth_element(distances.begin(), distances.begin() + static_cast<long>(distances.size() / 2), distances.end());
  const double length = distances[distances.size() / 2];
  if (!(length > 1e-9)) return space_filling(xs, rng);

  const double inv_two_l2 = 1.0 / (2.0 * length * length);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) k(a, b) = std::exp(-(x.row(a) - x.row(b)).squaredNorm() * inv_two_l2);
    k(a, a) += settings_.jitter;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) return space_filling(xs, rng);
  const Eigen::VectorXd alpha = llt.solve(y);
  const double best = y.minCoeff();

  last_fallback_ = false;
  std::vector<double> best_u;
  double best_ei = -1.0;
  Eigen::VectorXd u(static_cast<Eigen::Index>(d));
  Eigen::VectorXd kx(n);
  for (std::size_t c = 0; c < settings_.candidates; ++c) {
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.uniform();
    for (Eigen::Index a = 0; a < n; ++a) kx[a] = std::exp(-(x.row(a).transpose() - u).squaredNorm() * inv_two_l2);
    const double mean = kx.dot(alpha);
    const double var = std::max(1.0 - kx.dot(llt.solve(kx)), 0.0);
    const double ei = expected_improvement(mean, std::sqrt(var), best);
    if (ei > best_ei) {
      best_ei = ei;
      best_u.assign(u.data(), u.data() + u.size());
    }
  }
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = bounds_[i].clamp(bounds_[i].lo + best_u[i] * (bounds_[i].hi - bounds_[i].lo));
  return out;
}

GpBoOptimizer::GpBoOptimizer(ParamSpace space, GpBoSettings settings)
    : space_(std::move(space)), bo_(space_.bounds(), settings) {}

std::vector<Proposal> GpBoOptimizer::propose(const OptTrace& feedback, Rng& rng) {
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (const auto& p : feedback.points()) {
    xs.push_back(p.params);
    ys.push_back(p.total_error);
  }
  return {{space_.clamp(bo_.propose(xs, ys, rng)), {}}};
}

}  // namespace traylab
