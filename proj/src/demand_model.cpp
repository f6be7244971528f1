#include "nhcrop/demand_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nhcrop/errors.hpp"

namespace nhcrop {

void featurize_into(FeatureVector& out, const TaskContext& ctx, const Asset& asset, double price, double cost_proxy,
                    int n_task_kinds) {
  const double rel = asset.relevance(ctx.task_kind);
  out.setZero(feature_dimension(n_task_kinds));
  int i = 0;
  out[i++] = 1.0;
  out[i + ctx.task_kind] = 1.0;
  i += n_task_kinds;
  out[i++] = ctx.budget_level;
  out[i++] = ctx.privacy_sensitivity;
  out[i++] = asset.quality;
  out[i++] = asset.size_norm;
  out[i++] = asset.rarity;
  out[i++] = rel;
  out[i++] = price;
  out[i++] = price * price;
  out[i++] = cost_proxy;
  out[i++] = price * cost_proxy;
  out[i++] = rel * price;
}

FeatureVector featurize(const TaskContext& ctx, const Asset& asset, double price, double cost_proxy, int n_task_kinds) {
  if (!(price > 0.0 && price <= 1.0) || !(cost_proxy >= 0.0 && cost_proxy <= 1.0)) {
    throw std::invalid_argument("feature input out of range");
  }
  FeatureVector phi;
  featurize_into(phi, ctx, asset, price, cost_proxy, n_task_kinds);
  return phi;
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double regularized_log_loss(const Eigen::VectorXd& theta, const FeatureVector& phi, bool purchased, double ridge_l2) {
  const double z = theta.dot(phi);
  // log(1 + exp(z)) - y z, written to avoid overflow
  const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - (purchased ? z : 0.0) + 0.5 * ridge_l2 * theta.squaredNorm();
}

Eigen::VectorXd log_loss_gradient(const Eigen::VectorXd& theta, const FeatureVector& phi, bool purchased,
                                  double ridge_l2) {
  const double residual = logistic(theta.dot(phi)) - (purchased ? 1.0 : 0.0);
  return residual * phi + ridge_l2 * theta;
}

DemandModel::DemandModel(int n_task_kinds, const DemandParams& params)
    : DemandModel(n_task_kinds, params, Eigen::VectorXd::Zero(feature_dimension(n_task_kinds)),
                  params.ridge * Eigen::MatrixXd::Identity(feature_dimension(n_task_kinds),
                                                           feature_dimension(n_task_kinds)),
                  0) {}

DemandModel::DemandModel(int n_task_kinds, const DemandParams& params, Eigen::VectorXd theta, Eigen::MatrixXd v_matrix,
                         long rounds_seen)
    : n_task_kinds_(n_task_kinds),
      params_(params),
      theta_(std::move(theta)),
      v_(std::move(v_matrix)),
      rounds_seen_(rounds_seen) {
  if (v_.rows() != theta_.size() || v_.cols() != theta_.size()) {
    throw std::invalid_argument("design matrix and theta dimensions differ");
  }
  refactor();
}

void DemandModel::refactor() {
  chol_.compute(v_);
  if (chol_.info() != Eigen::Success) throw InvariantViolation("design matrix degenerate");
}

void DemandModel::check_dimension(const FeatureVector& phi) const {
  if (phi.size() != theta_.size()) throw std::invalid_argument("feature dimension mismatch");
}

double DemandModel::predict_q(const FeatureVector& phi) const {
  check_dimension(phi);
  return logistic(theta_.dot(phi));
}

double DemandModel::bonus_scale() const {
  return params_.beta0 * std::sqrt(std::log(1.0 + static_cast<double>(rounds_seen_) + 1.0));
}

double DemandModel::bonus(const FeatureVector& phi) const {
  check_dimension(phi);
  // phi^T V^{-1} phi = |L^{-1} phi|^2 with V = L L^T
  solve_scratch_ = phi;
  chol_.matrixL().solveInPlace(solve_scratch_);
  return bonus_scale() * std::sqrt(solve_scratch_.squaredNorm());
}

double DemandModel::clipped_q(const FeatureVector& phi) const {
  return std::clamp(predict_q(phi) + bonus(phi), 0.0, params_.q_max);
}

double DemandModel::safe_score(const TaskContext& ctx, const Asset& asset, double price, double cost_proxy) const {
  featurize_into(scratch_, ctx, asset, price, cost_proxy, n_task_kinds_);
  return clipped_q(scratch_) * (price - cost_proxy);
}

PriceScore DemandModel::best_price(const TaskContext& ctx, const Asset& asset, const PriceGrid& grid,
                                   double cost_proxy) const {
  PriceScore best{grid[0], safe_score(ctx, asset, grid[0], cost_proxy)};
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double score = safe_score(ctx, asset, grid[i], cost_proxy);
    if (score > best.score) best = {grid[i], score};
  }
  return best;
}

void DemandModel::update(const FeatureVector& phi_used, bool purchased) {
  check_dimension(phi_used);
  const double residual = (purchased ? 1.0 : 0.0) - logistic(theta_.dot(phi_used));
  theta_ += params_.learn_rate * (residual * phi_used - params_.ridge_l2 * theta_);
  v_.noalias() += phi_used * phi_used.transpose();
  ++rounds_seen_;
  refactor();
}

}  // namespace nhcrop
