#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "nhcrop/demand_model.hpp"
#include "nhcrop/errors.hpp"

using namespace nhcrop;

namespace {

constexpr int T = 3;

TaskContext random_ctx(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> k(0, T - 1);
  return testutil::context(k(g), u(g), u(g));
}

Asset random_asset(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return testutil::asset(u(g), u(g), u(g), {u(g), u(g), u(g)});
}

Eigen::VectorXd random_vec(std::mt19937_64& g, int n, double scale) {
  std::normal_distribution<double> z(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = z(g);
  return v;
}

Eigen::MatrixXd random_pd(std::mt19937_64& g, int n) {
  Eigen::MatrixXd a(n, n);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = z(g);
  return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST_CASE("feature layout") {
  const int d = feature_dimension(T);
  CHECK(d == 15);
  FeatureVector phi;
  featurize_into(phi, testutil::context(0, 0.0, 0.0), testutil::asset(0, 0, 0, {0, 0, 0}), 0.0, 0.0, T);
  REQUIRE(phi.size() == d);
  for (int i = 0; i < d; ++i) CHECK(phi[i] == ((i == 0 || i == 1) ? 1.0 : 0.0));

  const auto ctx = testutil::context(2, 0.3, 0.7);
  const auto a = testutil::asset(0.4, 0.5, 0.6, {0.1, 0.2, 0.9});
  const FeatureVector f1 = featurize(ctx, a, 0.5, 0.25, T);
  const FeatureVector f2 = featurize(ctx, a, 0.5, 0.25, T);
  CHECK(f1 == f2);
  // [1, onehot x3, budget, privacy, quality, size, rarity, rel, p, p^2, c, p*c, rel*p]
  const double expected[] = {1, 0, 0, 1, 0.3, 0.7, 0.4, 0.5, 0.6, 0.9, 0.5, 0.25, 0.25, 0.125, 0.45};
  for (int i = 0; i < d; ++i) CHECK(f1[i] == doctest::Approx(expected[i]).epsilon(1e-15));

  CHECK_THROWS_WITH(featurize(ctx, a, 0.0, 0.2, T), "feature input out of range");
  CHECK_THROWS_WITH(featurize(ctx, a, 0.5, 1.2, T), "feature input out of range");
}

TEST_CASE("purchase probability") {
  const DemandModel zero(T, {});
  std::mt19937_64 g(1);
  for (int i = 0; i < 10; ++i) CHECK(zero.predict_q(random_vec(g, 15, 1.0)) == 0.5);

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(15);
  theta[0] = 30.0;
  const DemandModel hot(T, {}, theta, Eigen::MatrixXd::Identity(15, 15), 0);
  FeatureVector e0 = FeatureVector::Zero(15);
  e0[0] = 1.0;
  CHECK(std::fabs(hot.predict_q(e0) - 1.0) < 1e-12);

  CHECK(logistic(1.0 * 1.0 + -2.0 * 1.0) == doctest::Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-15));
  CHECK(logistic(-1.0) == doctest::Approx(0.2689414213699951).epsilon(1e-14));
  CHECK_THROWS(zero.predict_q(FeatureVector::Zero(4)));
}

TEST_CASE("bonus") {
  DemandParams p;
  // beta_t = beta0 * sqrt(log 2) at rounds_seen = 0; choose beta0 so beta_t = 2.
  p.beta0 = 2.0 / std::sqrt(std::log(2.0));
  const DemandModel m(T, p);
  CHECK(m.bonus_scale() == doctest::Approx(2.0).epsilon(1e-15));
  FeatureVector e1 = FeatureVector::Zero(15);
  e1[0] = 1.0;
  CHECK(m.bonus(e1) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(m.bonus(FeatureVector::Zero(15)) == 0.0);

  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(15, 15);
  bad(3, 3) = -1.0;
  CHECK_THROWS_WITH_AS(DemandModel(T, p, Eigen::VectorXd::Zero(15), bad, 0), "design matrix degenerate",
                       InvariantViolation);
}

TEST_CASE("bonus by linear solve agrees with the explicit inverse") {
  std::mt19937_64 g(7);
  for (int trial = 0; trial < 100; ++trial) {
    DemandParams p;
    p.beta0 = 0.7;
    const Eigen::MatrixXd v = random_pd(g, 15);
    const long seen = static_cast<long>(trial);
    const DemandModel m(T, p, random_vec(g, 15, 0.3), v, seen);
    const FeatureVector phi = random_vec(g, 15, 1.0);
    const double beta = 0.7 * std::sqrt(std::log(static_cast<double>(seen) + 2.0));
    const double oracle = beta * std::sqrt(phi.dot(v.inverse() * phi));
    CHECK(std::fabs(m.bonus(phi) - oracle) <= 1e-9 * oracle);
  }
}

TEST_CASE("clipped purchase estimate") {
  // theta chosen so predict_q is a known value; bonus zero via beta0 = 0.
  auto model_with_q = [](double q, double q_max) {
    DemandParams p;
    p.beta0 = 0.0;
    p.q_max = q_max;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(15);
    theta[0] = std::log(q / (1.0 - q));
    return DemandModel(T, p, theta, Eigen::MatrixXd::Identity(15, 15), 0);
  };
  FeatureVector e0 = FeatureVector::Zero(15);
  e0[0] = 1.0;
  CHECK(model_with_q(0.95, 0.8).clipped_q(e0) == 0.8);
  CHECK(model_with_q(0.45, 0.8).clipped_q(e0) == doctest::Approx(0.45).epsilon(1e-14));
  CHECK(model_with_q(0.95, kUnclipped).clipped_q(e0) == doctest::Approx(0.95).epsilon(1e-14));

  // Optimism above one survives without a ceiling.
  DemandParams p;
  p.q_max = kUnclipped;
  p.beta0 = 3.0;
  const DemandModel loose(T, p);
  CHECK(loose.clipped_q(e0) > 1.0);

  std::mt19937_64 g(3);
  p.q_max = 0.8;
  const DemandModel tight(T, p, random_vec(g, 15, 1.0), random_pd(g, 15), 5);
  for (int i = 0; i < 200; ++i) {
    const double q = tight.clipped_q(random_vec(g, 15, 1.0));
    CHECK(q >= 0.0);
    CHECK(q <= 0.8);
  }
}

TEST_CASE("best price on constant demand") {
  DemandParams p;
  p.beta0 = 0.0;
  const DemandModel m(T, p);
  const auto ctx = testutil::context(1, 0.5, 0.5);
  const auto a = testutil::asset(0.5, 0.5, 0.5, {0.5, 0.5, 0.5});
  const PriceScore best = m.best_price(ctx, a, PriceGrid::decile(), 0.3);
  CHECK(best.price == 1.0);
  CHECK(best.score == doctest::Approx(0.35).epsilon(1e-14));

  const PriceScore degenerate = m.best_price(ctx, a, PriceGrid::decile(), 1.0);
  CHECK(degenerate.score <= 0.0);
  CHECK(degenerate.price == 1.0);  // q (p - 1) is maximal (zero) at p = 1

  // Every score ties at zero under a zero ceiling: lowest price wins.
  p.q_max = 0.0;
  const DemandModel flat(T, p);
  CHECK(flat.best_price(ctx, a, PriceGrid::decile(), 0.3).price == 0.1);
}

TEST_CASE("best price matches a brute-force scan") {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const PriceGrid grid = PriceGrid::decile();
  int ties = 0;
  for (int i = 0; i < 1000; ++i) {
    DemandParams p;
    p.q_max = (i % 11 == 0) ? 0.0 : (i % 3 == 0) ? kUnclipped : 0.1 + 0.9 * u(g);
    p.beta0 = (i % 5 == 0) ? 0.0 : u(g);
    const DemandModel m(T, p, random_vec(g, 15, 1.5), random_pd(g, 15), i % 50);
    const auto ctx = random_ctx(g);
    const auto a = random_asset(g);
    const double c = (i % 7 == 0) ? 1.0 : u(g);

    // Oracle: evaluate every grid point from the stated formula.
    double best_p = 0.0;
    double best_s = -std::numeric_limits<double>::infinity();
    for (double price : grid.prices()) {
      const FeatureVector phi = featurize(ctx, a, price, c, T);
      const double q_raw = 1.0 / (1.0 + std::exp(-m.theta().dot(phi)));
      const double b = m.bonus_scale() * std::sqrt(phi.dot(m.v_matrix().ldlt().solve(phi)));
      const double q = std::min(std::max(q_raw + b, 0.0), p.q_max);
      const double s = q * (price - c);
      if (s > best_s + 1e-12) {
        best_s = s;
        best_p = price;
      } else if (std::fabs(s - best_s) <= 1e-12) {
        ++ties;
      }
    }
    const PriceScore got = m.best_price(ctx, a, grid, c);
    CHECK(got.price == best_p);
    CHECK(got.score == doctest::Approx(best_s).epsilon(1e-9));
  }
  CHECK(ties > 0);
}

TEST_CASE("log-loss gradient matches central differences") {
  std::mt19937_64 g(5);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd theta = random_vec(g, 15, 0.8);
    const FeatureVector phi = random_vec(g, 15, 1.0);
    const bool y = (i % 2) == 0;
    const double l2 = 1e-3 * (i % 4);
    const Eigen::VectorXd grad = log_loss_gradient(theta, phi, y, l2);
    Eigen::VectorXd fd(15);
    for (int j = 0; j < 15; ++j) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[j] += h;
      tm[j] -= h;
      fd[j] = (regularized_log_loss(tp, phi, y, l2) - regularized_log_loss(tm, phi, y, l2)) / (2 * h);
    }
    CHECK((fd - grad).norm() <= 1e-5 * grad.norm());
  }
}

TEST_CASE("online update") {
  DemandParams p;
  p.ridge_l2 = 0.01;
  std::mt19937_64 g(9);
  DemandModel m(T, p, random_vec(g, 15, 1.0), Eigen::MatrixXd::Identity(15, 15), 0);
  const Eigen::VectorXd theta0 = m.theta();
  const Eigen::MatrixXd v0 = m.v_matrix();
  m.update(FeatureVector::Zero(15), true);
  CHECK(m.v_matrix() == v0);
  CHECK((m.theta() - (1.0 - p.learn_rate * p.ridge_l2) * theta0).norm() <= 1e-15);
  CHECK(m.rounds_seen() == 1);

  // y equal to the prediction: with a zero design vector and no L2 the step vanishes.
  p.ridge_l2 = 0.0;
  DemandModel still(T, p, theta0, Eigen::MatrixXd::Identity(15, 15), 0);
  still.update(FeatureVector::Zero(15), false);
  CHECK(still.theta() == theta0);
  // A saturated logit predicts exactly 1.0, so y = 1 leaves theta unchanged.
  Eigen::VectorXd sat = Eigen::VectorXd::Zero(15);
  sat[0] = 40.0;
  DemandModel exact(T, p, sat, Eigen::MatrixXd::Identity(15, 15), 0);
  FeatureVector e0 = FeatureVector::Zero(15);
  e0[0] = 1.0;
  REQUIRE(exact.predict_q(e0) == 1.0);
  exact.update(e0, true);
  CHECK(exact.theta() == sat);

  // Loewner monotonicity and a nonincreasing bonus for fixed phi and beta.
  DemandModel grow(T, p);
  const FeatureVector probe = random_vec(g, 15, 1.0);
  double prev_quad = probe.dot(grow.v_matrix().ldlt().solve(probe));
  for (int t = 0; t < 50; ++t) {
    const Eigen::MatrixXd before = grow.v_matrix();
    grow.update(random_vec(g, 15, 1.0), t % 2 == 0);
    const Eigen::VectorXd z = random_vec(g, 15, 1.0);
    CHECK(z.dot(grow.v_matrix() * z) >= z.dot(before * z) - 1e-12);
    const double quad = probe.dot(grow.v_matrix().ldlt().solve(probe));
    CHECK(quad <= prev_quad + 1e-12);
    prev_quad = quad;
  }
}
