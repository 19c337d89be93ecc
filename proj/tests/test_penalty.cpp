#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "proxsaga/proxsaga.hpp"

using namespace proxsaga;

TEST(PenaltyValue, Examples) {
  const std::vector<double> x{1.0, -3.0};
  EXPECT_EQ(penalty_value(Penalty::l1(2.0), x, singleton_partition(2)), 8.0);
  EXPECT_EQ(penalty_value(Penalty::none(), x, singleton_partition(2)), 0.0);
  EXPECT_EQ(penalty_value(Penalty::box(0, 1), std::vector<double>{0.5, 2.0}, singleton_partition(2)),
            std::numeric_limits<double>::infinity());
  EXPECT_EQ(penalty_value(Penalty::box(0, 1), std::vector<double>{0.5, 1.0}, singleton_partition(2)),
            0.0);
  EXPECT_DOUBLE_EQ(penalty_value(Penalty::group_l2(2.0), std::vector<double>{3, 4, 1},
                                 make_partition({{0, 1}, {2}}, 3)),
                   2.0 * (5.0 + 1.0));
}

TEST(PenaltyValue, MatchesOracleAndIsNonnegative) {
  std::mt19937_64 rng(3);
  const auto part = make_partition({{0, 3}, {1}, {2, 4, 5}}, 6);
  for (int k = 0; k < 50; ++k) {
    const auto x = oracle::random_vector(rng, 6);
    for (const Penalty& h : {Penalty::l1(0.7), Penalty::group_l2(1.3), Penalty::none()}) {
      const double v = penalty_value(h, x, part);
      EXPECT_GE(v, 0.0);
      EXPECT_NEAR(v, oracle::penalty(h, part, x), 1e-14);
    }
  }
}

TEST(PenaltyDescriptor, RejectsInvalidParameters) {
  EXPECT_THROW(Penalty::l1(-1.0), InvalidArgument);
  EXPECT_THROW(Penalty::group_l2(std::nan("")), InvalidArgument);
  EXPECT_THROW(Penalty::box(1.0, 0.0), InvalidArgument);
  EXPECT_NO_THROW(Penalty::box(1.0, 1.0));
}

TEST(ProxBlock, SoftThresholdExample) {
  std::vector<double> v{3.0, -0.5, 0.0};
  prox_block(Penalty::l1(1.0), {1.0, 1.0}, v);
  EXPECT_EQ(v, (std::vector<double>{2.0, 0.0, 0.0}));
  // The effective step is gamma * scale.
  std::vector<double> w{3.0};
  prox_block(Penalty::l1(0.5), {0.5, 4.0}, w);
  EXPECT_EQ(w[0], 2.0);
}

TEST(ProxBlock, ZeroIsIdentity) {
  std::vector<double> v{1.5, -2.0, 0.25};
  const auto copy = v;
  prox_block(Penalty::none(), {0.3, 2.0}, v);
  EXPECT_EQ(v, copy);
}

TEST(ProxBlock, GroupShrinksFullyInsideThreshold) {
  std::vector<double> v{0.0, 3.0, 0.0};  // norm 3 <= 5
  prox_block(Penalty::group_l2(5.0), {1.0, 1.0}, v);
  EXPECT_EQ(v, (std::vector<double>{0.0, 0.0, 0.0}));
  std::vector<double> w{3.0, 4.0};  // norm 5, threshold 1
  prox_block(Penalty::group_l2(1.0), {1.0, 1.0}, w);
  EXPECT_DOUBLE_EQ(w[0], 3.0 * 0.8);
  EXPECT_DOUBLE_EQ(w[1], 4.0 * 0.8);
  std::vector<double> zero{0.0, 0.0};
  prox_block(Penalty::group_l2(1.0), {1.0, 1.0}, zero);
  EXPECT_EQ(zero, (std::vector<double>{0.0, 0.0}));
}

TEST(ProxBlock, BoxClamps) {
  std::vector<double> v{-1.0, 0.5, 2.0};
  prox_block(Penalty::box(0, 1), {1.0, 1.0}, v);
  EXPECT_EQ(v, (std::vector<double>{0.0, 0.5, 1.0}));
}

TEST(ProxBlock, RejectsNonFiniteInputAndBadSteps) {
  std::vector<double> v{1.0, std::numeric_limits<double>::infinity()};
  EXPECT_THROW(prox_block(Penalty::l1(1.0), {1.0, 1.0}, v), InvalidArgument);
  std::vector<double> w{1.0};
  EXPECT_THROW(prox_block(Penalty::l1(1.0), {0.0, 1.0}, w), InvalidArgument);
  EXPECT_THROW(prox_block(Penalty::l1(1.0), {1.0, 0.5}, w), InvalidArgument);
}

TEST(ProxBlock, AgreesWithGridSearchIn1D) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> pos(0.1, 2.0);
  for (int k = 0; k < 100; ++k) {
    const double gamma = pos(rng);
    const double v = u(rng);
    const double lo = u(rng);
    for (const Penalty& h : {Penalty::l1(pos(rng)), Penalty::group_l2(pos(rng)), Penalty::none(),
                             Penalty::box(lo, lo + pos(rng))}) {
      std::vector<double> z{v};
      prox_block(h, {gamma, 1.0}, z);
      EXPECT_NEAR(z[0], brute_force_prox(h, gamma, v), 1e-5) << to_string(h.kind);
    }
  }
}

TEST(ProxBlock, SatisfiesSubgradientCharacterization) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> pos(0.1, 2.0);
  for (int k = 0; k < 300; ++k) {
    const double step = pos(rng);
    const double lambda = pos(rng);
    auto v = oracle::random_vector(rng, 1 + rng() % 5, 2.0);

    auto z = v;
    prox_block(Penalty::l1(lambda), {step, 1.0}, z);
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double g = (v[j] - z[j]) / step;
      if (z[j] != 0.0) {
        EXPECT_NEAR(g, lambda * (z[j] > 0 ? 1.0 : -1.0), 1e-12);
      } else {
        EXPECT_LE(std::abs(v[j] / step), lambda + 1e-12);
      }
    }

    z = v;
    prox_block(Penalty::group_l2(lambda), {step, 1.0}, z);
    const double zn = std::sqrt(oracle::norm2(z));
    if (zn > 0) {
      for (std::size_t j = 0; j < v.size(); ++j) {
        EXPECT_NEAR((v[j] - z[j]) / step, lambda * z[j] / zn, 1e-12);
      }
    } else {
      EXPECT_LE(std::sqrt(oracle::norm2(v)) / step, lambda + 1e-12);
    }

    z = v;
    prox_block(Penalty::box(-0.5, 0.5), {step, 1.0}, z);
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double g = v[j] - z[j];
      if (z[j] > -0.5 && z[j] < 0.5) {
        EXPECT_EQ(g, 0.0);
      }
      if (z[j] == -0.5) {
        EXPECT_LE(g, 0.0);
      }
      if (z[j] == 0.5) {
        EXPECT_GE(g, 0.0);
      }
    }
  }
}

TEST(ProxBlock, FirmlyNonExpansive) {
  std::mt19937_64 rng(29);
  for (int k = 0; k < 300; ++k) {
    const std::size_t len = 1 + rng() % 6;
    const auto v = oracle::random_vector(rng, len, 2.0);
    const auto w = oracle::random_vector(rng, len, 2.0);
    for (const Penalty& h : {Penalty::l1(0.8), Penalty::group_l2(1.1), Penalty::box(-1, 0.3)}) {
      auto zv = v;
      auto zw = w;
      prox_block(h, {0.7, 1.0}, zv);
      prox_block(h, {0.7, 1.0}, zw);
      double inner = 0.0, dist = 0.0, input = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        inner += (zv[j] - zw[j]) * (v[j] - w[j]);
        dist += (zv[j] - zw[j]) * (zv[j] - zw[j]);
        input += (v[j] - w[j]) * (v[j] - w[j]);
      }
      EXPECT_GE(inner, dist - 1e-10);
      EXPECT_LE(dist, input + 1e-12);
    }
  }
}

TEST(ProxBlock, ZeroStrengthL1IsIdentity) {
  std::vector<double> v{1.0, -2.0, 0.0};
  const auto copy = v;
  prox_block(Penalty::l1(0.0), {1.0, 1.0}, v);
  EXPECT_EQ(v, copy);
}

namespace {

// 4 rows over 3 coordinates: d = [1, 2, 4] under singleton blocks.
Problem small_problem(Penalty h, BlockPartition part) {
  return Problem(fixtures::make_dataset(
                     {{{0, 1.0}, {1, 1.0}, {2, 1.0}}, {{0, 1.0}, {1, 1.0}}, {{0, 1.0}}, {{0, 1.0}}},
                     {1, -1, 1, -1}, 3),
                 Loss{LossKind::logistic, 0.0}, h, std::move(part));
}

}  // namespace

TEST(ProxPhi, FullSupportWithUnitWeightsIsPlainProx) {
  const Dataset d = gen_sparse_glm({10, 6, 1.0, 2}).data;
  const auto part = make_partition({{0, 1}, {2, 3, 4}, {5}}, 6);
  const SupportIndex idx = build_support_index(d.features, part);
  std::mt19937_64 rng(5);
  for (const Penalty& h : {Penalty::l1(0.4), Penalty::group_l2(0.9), Penalty::box(-0.2, 0.1)}) {
    auto v = oracle::random_vector(rng, 6);
    auto expected = v;
    oracle::prox(h, part, 0.6, expected);
    prox_phi(h, part, idx, 3, 0.6, v);
    EXPECT_LT(oracle::max_abs_diff(v, expected), 1e-15);
  }
}

TEST(ProxPhi, ZeroPenaltyLeavesInputUnchanged) {
  const Problem pr = small_problem(Penalty::none(), singleton_partition(3));
  std::vector<double> v{1.0, -4.0, 2.5};
  const auto copy = v;
  prox_phi(pr.penalty(), pr.partition(), pr.index(), 0, 0.5, v);
  EXPECT_EQ(v, copy);
}

TEST(ProxPhi, UsesDoubledThresholdOnReweightedBlock) {
  const Problem pr = small_problem(Penalty::l1(1.0), singleton_partition(3));
  // Row 1 touches coordinates 0 (d = 1) and 1 (d = 2); gamma * lambda2 = 0.5.
  std::vector<double> v{3.0, 3.0, 3.0};
  prox_phi(pr.penalty(), pr.partition(), pr.index(), 1, 0.5, v);
  EXPECT_EQ(v, (std::vector<double>{2.5, 2.0, 3.0}));
}

TEST(ProxPhi, CoordinatesOutsideSupportAreUntouched) {
  const Problem pr = small_problem(Penalty::group_l2(0.3), make_partition({{0}, {1, 2}}, 3));
  std::vector<double> v{1.0, 1.0, 1.0};
  prox_phi(pr.penalty(), pr.partition(), pr.index(), 2, 0.5, v);
  EXPECT_EQ(v[1], 1.0);
  EXPECT_EQ(v[2], 1.0);
  EXPECT_LT(v[0], 1.0);
}

TEST(PhiValue, AveragesToPenalty) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    const std::size_t p = 1 + rng() % 20;
    SampleStream s(rng(), 0);
    const Dataset d = detail::random_dataset(s, n, p, 0.2);
    const BlockPartition part = detail::random_partition(s, p);
    const SupportIndex idx = build_support_index(d.features, part);
    const auto x = oracle::random_vector(rng, p);
    for (const Penalty& h : {Penalty::l1(0.5), Penalty::group_l2(1.5)}) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += phi_value(h, part, idx, i, x);
      mean /= static_cast<double>(n);
      const double hx = oracle::penalty(h, part, x);
      EXPECT_LE(std::abs(mean - hx), 1e-12 * std::max(1.0, hx));
    }
    // E D_i = I: for every block, (1/n) sum_i 1{B in T_i} d_B = 1.
    for (std::size_t b = 0; b < part.n_blocks(); ++b) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (idx.contains(i, static_cast<index_t>(b))) mean += idx.block_weight[b];
      }
      EXPECT_NEAR(mean / n, 1.0, 1e-12);
    }
  }
}
