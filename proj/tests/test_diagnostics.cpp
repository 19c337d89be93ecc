#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "proxsaga/proxsaga.hpp"

using namespace proxsaga;

namespace {

std::vector<Trace> instrumented_runs(std::size_t seeds, std::size_t epochs) {
  std::vector<Trace> runs;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    SolverConfig c;
    c.epochs = epochs;
    c.seed = seed;
    c.reference_point = fixtures::acceptance_optimum().x;
    runs.push_back(run_sequential(fixtures::acceptance_problem(), c));
  }
  return runs;
}

Checkpoint checkpoint(std::size_t t, double objective) {
  Checkpoint c;
  c.iterations = t;
  c.objective = objective;
  return c;
}

}  // namespace

TEST(Suboptimality, Examples) {
  const Problem& pr = fixtures::acceptance_problem();
  const Optimum& opt = fixtures::acceptance_optimum();
  Trace t;
  t.checkpoints.push_back(checkpoint(0, pr.objective(std::vector<double>(50, 0.0))));
  t.checkpoints.push_back(checkpoint(1, opt.objective));
  t.checkpoints.push_back(checkpoint(2, opt.objective - 5e-13));
  const auto s = suboptimality(t, opt.objective);
  EXPECT_NEAR(s[0], std::log(2.0) - opt.objective, 1e-14);
  EXPECT_EQ(s[1], 0.0);
  EXPECT_EQ(s[2], 0.0);
  t.checkpoints.push_back(checkpoint(3, opt.objective - 1e-9));
  EXPECT_THROW(suboptimality(t, opt.objective), StaleOptimumError);
}

TEST(Envelope, InitialBoundDominatesDistance) {
  const Optimum& opt = fixtures::acceptance_optimum();
  const double c0 = initial_lyapunov(fixtures::acceptance_problem(), opt.x);
  EXPECT_GE(c0, oracle::norm2(opt.x));
}

TEST(Envelope, LyapunovMatchesDenseOracle) {
  const Problem& pr = fixtures::acceptance_problem();
  const Optimum& opt = fixtures::acceptance_optimum();
  const auto a = oracle::dense(pr.data());
  double sum = 0.0;
  for (std::size_t i = 0; i < pr.n_samples(); ++i) {
    sum += oracle::norm2(oracle::sample_gradient(a, pr.data(), LossKind::logistic, pr.loss().lambda1, i, opt.x));
  }
  const double L = pr.smoothness().L;
  EXPECT_NEAR(initial_lyapunov(pr, opt.x), oracle::norm2(opt.x) + sum / (5 * L * L), 1e-12);
}

TEST(Envelope, HoldsAtTheoreticalRateAndRejectsFasterRate) {
  const Problem& pr = fixtures::acceptance_problem();
  const auto runs = instrumented_runs(10, 100);
  const double rho = sequential_rate(pr.n_samples(), pr.smoothness().kappa());
  EXPECT_DOUBLE_EQ(rho, 0.2 / pr.smoothness().kappa());
  const double c0 = initial_lyapunov(pr, fixtures::acceptance_optimum().x);
  const EnvelopeReport ok = rate_envelope_check(runs, rho, c0, 10.0);
  EXPECT_TRUE(ok.pass);
  EXPECT_EQ(ok.points.size(), 101u);
  EXPECT_GE(ok.points.front().bound, ok.points.front().median_distance_sq);
  EXPECT_FALSE(rate_envelope_check(runs, 20 * rho, c0, 10.0).pass);

  const auto j = to_json(ok);
  EXPECT_TRUE(j.at("pass").get<bool>());
  EXPECT_EQ(j.at("checkpoints").size(), 101u);
  EXPECT_TRUE(j.at("checkpoints")[0].contains("margin_log10"));
}

TEST(Envelope, Validation) {
  const auto runs = instrumented_runs(2, 2);
  EXPECT_THROW(rate_envelope_check(runs, 0.0, 1.0, 1.0), InvalidArgument);
  EXPECT_THROW(rate_envelope_check({}, 0.1, 1.0, 1.0), InvalidArgument);
  SolverConfig c;
  c.epochs = 2;
  EXPECT_THROW(rate_envelope_check({run_sequential(fixtures::acceptance_problem(), c)}, 0.1, 1.0, 1.0),
               InvalidArgument);
}

TEST(Median, Examples) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_THROW(median({}), InvalidArgument);
}

TEST(BruteForceProx, Examples) {
  EXPECT_NEAR(brute_force_prox(Penalty::l1(1.0), 1.0, 3.0), 2.0, 1e-6);
  EXPECT_EQ(brute_force_prox(Penalty::none(), 1.0, 0.7), 0.7);
  EXPECT_EQ(brute_force_prox(Penalty::box(0.0, 1.0), 1.0, 2.0), 1.0);
  EXPECT_EQ(brute_force_prox(Penalty::l1(1.0), 1.0, 0.5), 0.0);
}

TEST(DenseGradientOracle, MatchesLibraryGradient) {
  const Problem& pr = fixtures::acceptance_problem();
  std::mt19937_64 rng(4);
  const auto x = oracle::random_vector(rng, pr.dimension());
  const auto dense = dense_gradient_oracle(pr.data(), pr.loss(), x);
  std::vector<double> grad(pr.dimension());
  smooth_gradient(pr.data(), pr.loss(), x, grad);
  EXPECT_LE(oracle::max_abs_diff(dense, grad), 1e-14);
}

TEST(Hashing, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Hashing, ProblemHashStableAndSensitive) {
  const Problem& pr = fixtures::acceptance_problem();
  const std::string h = problem_hash(pr);
  EXPECT_EQ(h.size(), 64u);
  EXPECT_EQ(h, problem_hash(make_sparse_l1_problem(reference_instance_spec(), 0.1).problem));
  const Problem other_penalty(pr.data(), pr.loss(), Penalty::l1(pr.penalty().strength * 2), pr.partition());
  EXPECT_NE(h, problem_hash(other_penalty));
  const Problem other_loss(pr.data(), {LossKind::logistic, 0.01}, pr.penalty(), pr.partition());
  EXPECT_NE(h, problem_hash(other_loss));
  Dataset d = pr.data();
  d.labels[0] = -d.labels[0];
  EXPECT_NE(h, problem_hash(Problem(d, pr.loss(), pr.penalty(), pr.partition())));
}

TEST(ComputeOptimum, CacheRoundTrip) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(PROXSAGA_TEST_TMP) / "optimum-cache";
  fs::remove_all(dir);
  const Problem& pr = fixtures::acceptance_problem();
  OptimumOptions options;
  options.cache_dir = dir.string();
  options.epochs = 50;
  const Optimum first = compute_optimum(pr, options);
  EXPECT_FALSE(first.from_cache);
  EXPECT_EQ(first.method, "dense_saga");
  const Optimum second = compute_optimum(pr, options);
  EXPECT_TRUE(second.from_cache);
  EXPECT_EQ(second.x, first.x);
  EXPECT_EQ(second.objective, first.objective);

  options.epochs = 51;
  EXPECT_FALSE(compute_optimum(pr, options).from_cache);

  options.epochs = 50;
  std::ofstream(dir / ("optimum-" + first.hash + ".json")) << "{not json";
  const Optimum third = compute_optimum(pr, options);
  EXPECT_FALSE(third.from_cache);
  EXPECT_EQ(third.x, first.x);
  EXPECT_TRUE(compute_optimum(pr, options).from_cache);
}

TEST(ComputeOptimum, SparseMethodAboveDimensionLimit) {
  const Problem& pr = fixtures::acceptance_problem();
  OptimumOptions options;
  options.epochs = 20;
  options.dense_dimension_limit = 10;
  EXPECT_EQ(compute_optimum(pr, options).method, "sparse_prox_saga");
}
