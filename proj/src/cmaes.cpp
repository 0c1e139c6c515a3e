#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "traylab/errors.hpp"
#include "traylab/optimizers.hpp"

namespace traylab {

std::size_t CmaEs::default_lambda(std::size_t n) {
  return 4 + static_cast<std::size_t>(std::floor(3.0 * std::log(static_cast<double>(n))));
}

CmaEs::CmaEs(std::vector<double> mean, CmaEsSettings settings)
    : bounds_(std::move(settings.bounds)),
      sigma_(settings.sigma),
      best_value_(std::numeric_limits<double>::infinity()) {
  const auto n = static_cast<Eigen::Index>(mean.size());
  if (n == 0) throw StructuralError("CMA-ES needs a nonempty mean");
  if (!bounds_.empty() && bounds_.size() != mean.size()) throw StructuralError("CMA-ES bounds dimension mismatch");
  if (!(sigma_ > 0.0)) throw StructuralError("CMA-ES step size must be positive");

  const double nd = static_cast<double>(n);
  lambda_ = settings.lambda > 0 ? settings.lambda : default_lambda(mean.size());
  if (lambda_ < 2) throw StructuralError("CMA-ES population must have at least two members");
  mu_ = lambda_ / 2;

  weights_.resize(static_cast<Eigen::Index>(mu_));
  for (std::size_t i = 0; i < mu_; ++i) {
    weights_[static_cast<Eigen::Index>(i)] =
        std::log((static_cast<double>(lambda_) + 1.0) / 2.0) - std::log(static_cast<double>(i + 1));
  }
  weights_ /= weights_.sum();
  mu_eff_ = 1.0 / weights_.squaredNorm();

  c_sigma_ = (mu_eff_ + 2.0) / (nd + mu_eff_ + 5.0);
  d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (nd + 1.0)) - 1.0) + c_sigma_;
  c_c_ = (4.0 + mu_eff_ / nd) / (nd + 4.0 + 2.0 * mu_eff_ / nd);
  c_1_ = 2.0 / ((nd + 1.3) * (nd + 1.3) + mu_eff_);
  c_mu_ = std::min(1.0 - c_1_, 2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) / ((nd + 2.0) * (nd + 2.0) + mu_eff_));
  chi_n_ = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

  mean_ = Eigen::Map<const Eigen::VectorXd>(mean.data(), n);
  cov_ = Eigen::MatrixXd::Identity(n, n);
  basis_ = Eigen::MatrixXd::Identity(n, n);
  scale_ = Eigen::VectorXd::Ones(n);
  p_sigma_ = Eigen::VectorXd::Zero(n);
  p_c_ = Eigen::VectorXd::Zero(n);
}

std::vector<double> CmaEs::mean() const { return {mean_.data(), mean_.data() + mean_.size()}; }

std::vector<std::vector<double>> CmaEs::ask(Rng& rng) {
  const Eigen::Index n = mean_.size();
  pending_.clear();
  std::vector<std::vector<double>> out;
  for (std::size_t k = 0; k < lambda_; ++k) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
    Eigen::VectorXd x = mean_ + sigma_ * (basis_ * scale_.cwiseProduct(z));
    if (!bounds_.empty()) {
      for (Eigen::Index i = 0; i < n; ++i) x[i] = bounds_[static_cast<std::size_t>(i)].clamp(x[i]);
    }
    out.emplace_back(x.data(), x.data() + n);
    pending_.push_back(std::move(x));
  }
  return out;
}

void CmaEs::tell(std::span<const double> fitness) {
  if (pending_.empty()) throw StructuralError("CMA-ES tell() called without a pending ask()");
  if (fitness.size() != lambda_) {
    throw StructuralError("CMA-ES tell() got " + std::to_string(fitness.size()) + " values for a population of " +
                          std::to_string(lambda_));
  }
  const Eigen::Index n = mean_.size();

  std::vector<std::size_t> order(lambda_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });

  if (fitness[order[0]] < best_value_) {
    best_value_ = fitness[order[0]];
    const auto& x = pending_[order[0]];
    best_point_.assign(x.data(), x.data() + n);
  }

  Eigen::MatrixXd steps(n, static_cast<Eigen::Index>(mu_));
  for (std::size_t i = 0; i < mu_; ++i) {
    steps.col(static_cast<Eigen::Index>(i)) = (pending_[order[i]] - mean_) / sigma_;
  }
  const Eigen::VectorXd y_w = steps * weights_;
  mean_ += sigma_ * y_w;

  const Eigen::VectorXd c_inv_sqrt_y = basis_ * (basis_.transpose() * y_w).cwiseQuotient(scale_);
  p_sigma_ = (1.0 - c_sigma_) * p_sigma_ + std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_) * c_inv_sqrt_y;

  ++generation_;
  evaluations_ += lambda_;
  const double ps_norm = p_sigma_.norm();
  const double decay = std::sqrt(1.0 - std::pow(1.0 - c_sigma_, 2.0 * static_cast<double>(generation_)));
  const bool h_sigma = ps_norm / decay < (1.4 + 2.0 / (static_cast<double>(n) + 1.0)) * chi_n_;

  p_c_ = (1.0 - c_c_) * p_c_ + (h_sigma ? std::sqrt(c_c_ * (2.0 - c_c_) * mu_eff_) : 0.0) * y_w;

  const double lost = h_sigma ? 0.0 : c_c_ * (2.0 - c_c_);
  Eigen::MatrixXd rank_mu = steps * weights_.asDiagonal() * steps.transpose();
  cov_ = (1.0 - c_1_ - c_mu_) * cov_ + c_1_ * (p_c_ * p_c_.transpose() + lost * cov_) + c_mu_ * rank_mu;

  sigma_ *= std::exp((c_sigma_ / d_sigma_) * (ps_norm / chi_n_ - 1.0));
  update_eigensystem();
  pending_.clear();
}

void CmaEs::update_eigensystem() {
  cov_ = 0.5 * (cov_ + cov_.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov_);
  basis_ = solver.eigenvectors();
  scale_ = solver.eigenvalues().cwiseMax(1e-20).cwiseSqrt();
}

CmaEsOptimizer::CmaEsOptimizer(ParamSpace space, std::size_t lambda, double sigma)
    : space_(std::move(space)),
      es_(std::vector<double>(space_.dim(), 0.5),
          CmaEsSettings{lambda, sigma, std::vector<Bound>(space_.dim(), Bound{0.0, 1.0})}) {}

std::vector<Proposal> CmaEsOptimizer::propose(const OptTrace&, Rng& rng) {
  std::vector<Proposal> out;
  for (const auto& u : es_.ask(rng)) {
    ParamVector v(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      const Bound& b = space_.bound(i);
      v[i] = b.lo + u[i] * (b.hi - b.lo);
    }
    out.push_back({space_.clamp(std::move(v)), {}});
  }
  return out;
}

void CmaEsOptimizer::observe(std::span<const TracePoint> evaluated) {
  std::vector<double> fitness;
  fitness.reserve(evaluated.size());
  for (const auto& p : evaluated) fitness.push_back(p.total_error);
  es_.tell(fitness);
}

}  // namespace traylab
