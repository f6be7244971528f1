#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <limits>

#include "nhcrop/core_types.hpp"

namespace nhcrop {

using FeatureVector = Eigen::VectorXd;

inline constexpr double kUnclipped = std::numeric_limits<double>::infinity();

// Layout: [1, onehot(task_kind), budget, privacy, quality, size, rarity, rel,
//          price, price^2, cost, price*cost, rel*price]
inline int feature_dimension(int n_task_kinds) { return 12 + n_task_kinds; }

// Throws std::invalid_argument("feature input out of range") unless
// price is in (0,1] and cost_proxy in [0,1].
FeatureVector featurize(const TaskContext& ctx, const Asset& asset, double price, double cost_proxy, int n_task_kinds);
// Same layout without the range check (diagnostics and tests).
void featurize_into(FeatureVector& out, const TaskContext& ctx, const Asset& asset, double price, double cost_proxy,
                    int n_task_kinds);

double logistic(double z);

// L2-regularized logistic loss of one observation and its gradient in theta.
double regularized_log_loss(const Eigen::VectorXd& theta, const FeatureVector& phi, bool purchased, double ridge_l2);
Eigen::VectorXd log_loss_gradient(const Eigen::VectorXd& theta, const FeatureVector& phi, bool purchased,
                                  double ridge_l2);

struct DemandParams {
  double beta0 = 0.5;       // bonus scale
  double learn_rate = 0.1;  // SGD step
  double ridge = 1.0;       // V initialised to ridge * I
  double ridge_l2 = 1e-3;   // L2 on theta
  double q_max = 0.8;       // kUnclipped disables the ceiling
};

struct PriceScore {
  double price = 0.0;
  double score = 0.0;
};

// Online logistic purchase model with a design-matrix optimism bonus.
class DemandModel {
 public:
  DemandModel(int n_task_kinds, const DemandParams& params);
  // Explicit state, for diagnostics and tests. Throws InvariantViolation
  // ("design matrix degenerate") when v_matrix is not positive definite.
  DemandModel(int n_task_kinds, const DemandParams& params, Eigen::VectorXd theta, Eigen::MatrixXd v_matrix,
              long rounds_seen);

  double predict_q(const FeatureVector& phi) const;
  // beta0 * sqrt(log(rounds_seen + 2))
  double bonus_scale() const;
  double bonus(const FeatureVector& phi) const;
  double clipped_q(const FeatureVector& phi) const;

  // Argmax over the grid of clipped_q * (p - cost); ties go to the lowest price.
  PriceScore best_price(const TaskContext& ctx, const Asset& asset, const PriceGrid& grid, double cost_proxy) const;
  // clipped_q * (p - cost) at one price.
  double safe_score(const TaskContext& ctx, const Asset& asset, double price, double cost_proxy) const;

  // One SGD step on the regularized log-loss and V += phi phi^T.
  void update(const FeatureVector& phi_used, bool purchased);

  void set_q_max(double q_max) { params_.q_max = q_max; }
  double q_max() const { return params_.q_max; }
  const DemandParams& params() const { return params_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  const Eigen::MatrixXd& v_matrix() const { return v_; }
  long rounds_seen() const { return rounds_seen_; }
  int n_task_kinds() const { return n_task_kinds_; }
  int dimension() const { return static_cast<int>(theta_.size()); }

 private:
  void refactor();
  void check_dimension(const FeatureVector& phi) const;

  int n_task_kinds_;
  DemandParams params_;
  Eigen::VectorXd theta_;
  Eigen::MatrixXd v_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  long rounds_seen_ = 0;
  mutable FeatureVector scratch_;
  mutable Eigen::VectorXd solve_scratch_;
};

}  // namespace nhcrop
