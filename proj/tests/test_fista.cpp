#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "proxsaga/proxsaga.hpp"

using namespace proxsaga;

TEST(Fista, MatchesNesterovOnQuadratic) {
  const Dataset d = fixtures::make_dataset({{{0, 1.0}}, {{0, 1.0}, {1, 2.0}}}, {1.0, -1.0}, 2);
  const double lambda1 = 0.1;
  const Problem pr = Problem::separable(d, {LossKind::squared, lambda1}, Penalty::none());
  // Hessian (A^T A)/2 + lambda1 I = [[1, 1], [1, 2]] + 0.1 I.
  const double L = (3.0 + std::sqrt(5.0)) / 2.0 + lambda1;
  const auto a = oracle::dense(d);
  auto grad = [&](const std::vector<double>& y) {
    std::vector<double> g(2, 0.0);
    for (std::size_t i = 0; i < 2; ++i) {
      const auto gi = oracle::sample_gradient(a, d, LossKind::squared, lambda1, i, y);
      for (std::size_t j = 0; j < 2; ++j) g[j] += gi[j] / 2.0;
    }
    return g;
  };

  FistaState state = fista_init(pr, std::vector<double>{0.0, 0.0});
  state.current_L = L * 1.0001;
  std::vector<double> x{0.0, 0.0}, y = x;
  double t = 1.0;
  for (int k = 0; k < 50; ++k) {
    fista_step(state, pr);
    const auto g = grad(y);
    std::vector<double> next{y[0] - g[0] / (L * 1.0001), y[1] - g[1] / (L * 1.0001)};
    const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
    for (std::size_t j = 0; j < 2; ++j) y[j] = next[j] + (t - 1.0) / t_next * (next[j] - x[j]);
    x = next;
    t = t_next;
    ASSERT_LT(oracle::max_abs_diff(state.x, x), 1e-13) << k;
    ASSERT_EQ(state.current_L, L * 1.0001);
  }
}

TEST(Fista, StaysAtOptimum) {
  const Problem& pr = fixtures::acceptance_problem();
  const Optimum& opt = fixtures::acceptance_optimum();
  FistaState state = fista_init(pr, opt.x);
  for (int k = 0; k < 20; ++k) fista_step(state, pr);
  EXPECT_LE(oracle::max_abs_diff(state.x, opt.x), 1e-12);
}

TEST(Fista, AgreesWithSagaOptimum) {
  const Problem& pr = fixtures::acceptance_problem();
  const Optimum& opt = fixtures::acceptance_optimum();
  FistaConfig c;
  c.iterations = 5000;
  const Trace t = run_fista(pr, c);
  EXPECT_EQ(t.solver, "fista");
  EXPECT_LE(t.checkpoints.back().objective - opt.objective, 1e-10);
  EXPECT_LE(oracle::max_abs_diff(t.final_x, opt.x), 1e-6);
}

TEST(Fista, BacktrackingCertifiesEveryStep) {
  const Problem& pr = fixtures::acceptance_problem();
  FistaState state = fista_init(pr, std::vector<double>(pr.dimension(), 0.0));
  const auto a = oracle::dense(pr.data());
  const double lambda1 = pr.loss().lambda1;
  auto smooth = [&](const std::vector<double>& x) {
    return oracle::objective(pr.data(), LossKind::logistic, lambda1, Penalty::none(),
                             pr.partition(), x);
  };
  double previous_L = state.current_L;
  // Long enough to reach the rounding floor, where a strict test would keep doubling L.
  for (int k = 0; k < 1500; ++k) {
    const auto y = state.y;
    fista_step(state, pr);
    std::vector<double> g(pr.dimension(), 0.0);
    for (std::size_t i = 0; i < pr.n_samples(); ++i) {
      const auto gi = oracle::sample_gradient(a, pr.data(), LossKind::logistic, lambda1, i, y);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += gi[j] / pr.n_samples();
    }
    double linear = 0.0, dist = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      linear += g[j] * (state.x[j] - y[j]);
      dist += (state.x[j] - y[j]) * (state.x[j] - y[j]);
    }
    EXPECT_LE(smooth(state.x), smooth(y) + linear + 0.5 * state.current_L * dist + 1e-12) << k;
    EXPECT_GE(state.current_L, previous_L);
    previous_L = state.current_L;
  }
  EXPECT_LE(state.current_L, 2.0 * pr.smoothness().L);
}

TEST(Fista, Determinism) {
  const Problem& pr = fixtures::acceptance_problem();
  FistaConfig c;
  c.iterations = 300;
  const Trace a = run_fista(pr, c);
  EXPECT_EQ(a.final_x, run_fista(pr, c).final_x);
  c.gradient_threads = 3;
  const Trace b = run_fista(pr, c);
  EXPECT_EQ(b.final_x, run_fista(pr, c).final_x);
  EXPECT_LE(oracle::max_abs_diff(a.final_x, b.final_x), 1e-12);
}

TEST(Fista, Validation) {
  FistaConfig c;
  c.iterations = 0;
  EXPECT_THROW(run_fista(fixtures::acceptance_problem(), c), InvalidArgument);
  FistaState state = fista_init(fixtures::acceptance_problem(), std::vector<double>(50, 0.0));
  state.current_L = 0.0;
  EXPECT_THROW(fista_step(state, fixtures::acceptance_problem()), InvalidArgument);
}

TEST(Fista, StopObjective) {
  FistaConfig c;
  c.iterations = 5000;
  c.stop_objective = fixtures::acceptance_optimum().objective + 1e-3;
  const Trace t = run_fista(fixtures::acceptance_problem(), c);
  EXPECT_LT(t.checkpoints.size(), 5001u);
  EXPECT_LE(t.checkpoints.back().objective, *c.stop_objective);
}
