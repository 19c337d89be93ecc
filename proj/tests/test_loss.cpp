#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "proxsaga/proxsaga.hpp"

using namespace proxsaga;

TEST(LossScalar, LogisticAtZeroMargin) {
  const LossEval e = loss_scalar(LossKind::logistic, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(e.value, std::log(2.0));
  EXPECT_DOUBLE_EQ(e.derivative, -0.5);
}

TEST(LossScalar, SquaredAtPerfectFit) {
  const LossEval e = loss_scalar(LossKind::squared, 1.7, 1.7);
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.derivative, 0.0);
}

TEST(LossScalar, LogisticTailsDoNotOverflow) {
  // log1p(exp(-50)) = exp(-50) - exp(-100)/2 + ...
  const double e50 = std::exp(-50.0);
  const LossEval far = loss_scalar(LossKind::logistic, 50.0, 1.0);
  EXPECT_NEAR(far.value / e50, 1.0, 1e-15);
  EXPECT_NEAR(far.derivative / -e50, 1.0, 1e-15);
  const LossEval wrong = loss_scalar(LossKind::logistic, 800.0, -1.0);
  EXPECT_DOUBLE_EQ(wrong.value, 800.0);
  EXPECT_DOUBLE_EQ(wrong.derivative, 1.0);
  const LossEval right = loss_scalar(LossKind::logistic, 800.0, 1.0);
  EXPECT_EQ(right.value, 0.0);
  EXPECT_TRUE(std::isfinite(right.derivative));
}

TEST(LossScalar, MatchesExtendedPrecisionOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> z(-30, 30);
  for (int k = 0; k < 1000; ++k) {
    const double m = z(rng);
    const double b = k % 2 ? 1.0 : -1.0;
    const LossEval e = loss_scalar(LossKind::logistic, m, b);
    EXPECT_NEAR(e.value, oracle::loss_value(LossKind::logistic, m, b),
                1e-15 * std::max(1.0, std::abs(m)));
    EXPECT_NEAR(e.derivative, oracle::loss_derivative(LossKind::logistic, m, b), 1e-15);
  }
}

TEST(Lipschitz, Examples) {
  const Dataset sq = fixtures::make_dataset({{{0, 1.0}, {1, 1.0}}}, {0.3}, 2);
  EXPECT_EQ(lipschitz_constant(sq, {LossKind::squared, 0.0}).L, 2.0);
  const Dataset lg = fixtures::make_dataset({{{0, 2.0}}}, {1.0}, 2);
  EXPECT_EQ(lipschitz_constant(lg, {LossKind::logistic, 0.5}).L, 1.5);
  Dataset empty;
  EXPECT_THROW(lipschitz_constant(empty, {LossKind::logistic, 0.0}), InvalidArgument);
}

TEST(Lipschitz, CurvatureAlongRowIsBounded) {
  // Second difference of f_i along a/||a||, a = [2, 0], lambda1 = 0.5: at most 1.5.
  const double lambda1 = 0.5;
  auto f = [&](double t) {
    const double x0 = t / 1.0;  // x = t * a / ||a|| = [t, 0]
    return oracle::loss_value(LossKind::logistic, 2.0 * x0, 1.0) + 0.5 * lambda1 * x0 * x0;
  };
  const double h = 1e-4;
  double worst = 0.0;
  for (double t = -5; t <= 5; t += 0.01) {
    worst = std::max(worst, (f(t + h) - 2 * f(t) + f(t - h)) / (h * h));
  }
  EXPECT_LE(worst, 1.5 + 1e-6);
  EXPECT_GT(worst, 1.49);
}

TEST(Lipschitz, AtLeastLambda1) {
  const Dataset d = gen_sparse_glm({200, 50, 0.1, 42}).data;
  const SmoothnessInfo info = lipschitz_constant(d, {LossKind::logistic, 1.0 / 200});
  EXPECT_GE(info.L, 1.0 / 200);
  for (double l : info.per_sample_L) EXPECT_LE(l, info.L);
  EXPECT_DOUBLE_EQ(info.kappa(), info.L * 200);
}

TEST(Objective, AtOriginIsLog2PlusPenalty) {
  const Dataset d = gen_sparse_glm({30, 10, 0.3, 8}).data;
  const std::vector<double> x(10, 0.0);
  EXPECT_DOUBLE_EQ(full_objective(d, {LossKind::logistic, 0.1}, Penalty::l1(3.0),
                                  singleton_partition(10), x),
                   std::log(2.0));
}

TEST(Objective, SquaredPerfectFitLeavesRegularizers) {
  const Dataset d = fixtures::make_dataset({{{0, 1.0}}, {{1, 2.0}}}, {0.5, -1.0}, 2);
  const std::vector<double> x{0.5, -0.5};
  EXPECT_DOUBLE_EQ(full_objective(d, {LossKind::squared, 0.2}, Penalty::l1(0.3),
                                  singleton_partition(2), x),
                   0.1 * 0.5 + 0.3 * 1.0);
}

TEST(Objective, MatchesDenseOracle) {
  std::mt19937_64 rng(4);
  for (LossKind kind : {LossKind::logistic, LossKind::squared}) {
    for (int k = 0; k < 10; ++k) {
      const Dataset d = gen_sparse_glm({25, 12, 0.4, rng(), kind}).data;
      const auto part = make_partition({{0, 1, 2}, {3}, {4, 5, 6, 7}, {8, 9, 10, 11}}, 12);
      const auto x = oracle::random_vector(rng, 12);
      for (const Penalty& h : {Penalty::l1(0.2), Penalty::group_l2(0.5), Penalty::none()}) {
        EXPECT_NEAR(full_objective(d, {kind, 0.04}, h, part, x),
                    oracle::objective(d, kind, 0.04, h, part, x), 1e-12);
      }
    }
  }
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(6);
  for (LossKind kind : {LossKind::logistic, LossKind::squared}) {
    const Dataset d = gen_sparse_glm({15, 8, 0.5, 3, kind}).data;
    const Loss loss{kind, 0.3};
    const auto a = oracle::dense(d);
    for (std::size_t i = 0; i < d.n_samples(); ++i) {
      auto x = oracle::random_vector(rng, 8);
      // Library gradient of f_i via a one-row dataset.
      const Dataset row = fixtures::make_dataset(
          {[&] {
            std::vector<std::pair<index_t, double>> r;
            const RowView v = d.features.row(i);
            for (std::size_t k = 0; k < v.size(); ++k) r.push_back({v.cols[k], v.vals[k]});
            return r;
          }()},
          {d.labels[i]}, 8);
      std::vector<double> g(8);
      smooth_gradient(row, loss, x, g);
      double err = 0.0, norm = 0.0;
      for (std::size_t j = 0; j < 8; ++j) {
        const double xj = x[j];
        x[j] = xj + 1e-6;
        const double up = smooth_objective(row, loss, x);
        x[j] = xj - 1e-6;
        const double down = smooth_objective(row, loss, x);
        x[j] = xj;
        const double fd = (up - down) / 2e-6;
        err += (fd - g[j]) * (fd - g[j]);
        norm += g[j] * g[j];
      }
      EXPECT_LE(std::sqrt(err), 1e-5 * std::max(1.0, std::sqrt(norm)));
      EXPECT_LT(oracle::max_abs_diff(g, oracle::sample_gradient(a, d, kind, 0.3, i, x)), 1e-14);
    }
  }
}

TEST(Gradient, ConvexityAndSmoothnessOnRandomPairs) {
  std::mt19937_64 rng(8);
  for (LossKind kind : {LossKind::logistic, LossKind::squared}) {
    const Dataset d = gen_sparse_glm({20, 10, 0.4, 9, kind}).data;
    const auto a = oracle::dense(d);
    const SmoothnessInfo info = lipschitz_constant(d, {kind, 0.1});
    for (std::size_t i = 0; i < d.n_samples(); ++i) {
      for (int k = 0; k < 10; ++k) {
        const auto x = oracle::random_vector(rng, 10);
        const auto y = oracle::random_vector(rng, 10);
        const auto gx = oracle::sample_gradient(a, d, kind, 0.1, i, x);
        const auto gy = oracle::sample_gradient(a, d, kind, 0.1, i, y);
        auto fi = [&](const std::vector<double>& z) {
          return loss_scalar(kind, oracle::dot(a[i], z), d.labels[i]).value +
                 0.05 * oracle::norm2(z);
        };
        double lin = 0.0, dist = 0.0, gd = 0.0;
        for (std::size_t j = 0; j < 10; ++j) {
          lin += gx[j] * (y[j] - x[j]);
          dist += (y[j] - x[j]) * (y[j] - x[j]);
          gd += (gy[j] - gx[j]) * (gy[j] - gx[j]);
        }
        EXPECT_GE(fi(y), fi(x) + lin - 1e-10);
        EXPECT_LE(std::sqrt(gd), info.per_sample_L[i] * std::sqrt(dist) + 1e-12);
      }
    }
  }
}

TEST(Labels, LogisticRequiresBinaryLabels) {
  const Dataset d = fixtures::make_dataset({{{0, 1.0}}}, {0.5}, 1);
  EXPECT_THROW(Problem::separable(d, {LossKind::logistic, 0.0}, Penalty::none()), InvalidArgument);
  EXPECT_NO_THROW(Problem::separable(d, {LossKind::squared, 0.0}, Penalty::none()));
  EXPECT_THROW(Problem::separable(d, {LossKind::squared, -1.0}, Penalty::none()), InvalidArgument);
}
