#pragma once

// Deterministic generators for desk-scale test problems.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "proxsaga/error.hpp"
#include "proxsaga/loss.hpp"
#include "proxsaga/problem.hpp"
#include "proxsaga/random.hpp"
#include "proxsaga/saga.hpp"
#include "proxsaga/sparse_data.hpp"

namespace proxsaga {

enum class SupportLayout {
  /// Each row picks its columns uniformly without replacement.
  random,
  /// Row i uses columns (i*k + j) mod p, j < k: disjoint rows when n*k <= p.
  cyclic,
};

struct SyntheticSpec {
  std::size_t n = 200;
  std::size_t p = 50;
  double density = 0.1;
  std::uint64_t seed = 42;
  LossKind loss = LossKind::logistic;
  SupportLayout layout = SupportLayout::random;
};

/// Probability of flipping a logistic label; the squared loss uses N(0, 0.05^2) noise.
inline constexpr double label_noise = 0.05;

struct SyntheticProblem {
  Dataset data;
  /// Planted coefficients the labels were generated from.
  std::vector<double> planted;
};

inline std::size_t nonzeros_per_row(const SyntheticSpec& spec) {
  const auto k = static_cast<std::size_t>(std::llround(spec.density * static_cast<double>(spec.p)));
  return std::clamp<std::size_t>(k, 1, spec.p);
}

/// Rows with exactly max(1, round(density p)) standard normal entries; labels from a
/// planted model with ~10% nonzero coefficients passed through the loss link, plus noise.
inline SyntheticProblem gen_sparse_glm(const SyntheticSpec& spec) {
  if (spec.n == 0 || spec.p == 0) throw InvalidArgument("gen_sparse_glm: n and p must be positive");
  if (!(spec.density > 0.0 && spec.density <= 1.0)) {
    throw InvalidArgument("gen_sparse_glm: density must lie in (0, 1]");
  }
  SampleStream rng(spec.seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t k = nonzeros_per_row(spec);

  SyntheticProblem out;
  out.planted.assign(spec.p, 0.0);
  const std::size_t planted_nnz = std::max<std::size_t>(1, spec.p / 10);
  std::vector<index_t> order(spec.p);
  for (std::size_t j = 0; j < spec.p; ++j) order[j] = static_cast<index_t>(j);
  for (std::size_t j = 0; j < planted_nnz; ++j) {
    std::swap(order[j], order[j + rng.uniform_index(spec.p - j)]);
    out.planted[order[j]] = normal(rng);
  }

  CsrBuilder builder(spec.p);
  std::vector<index_t> cols;
  std::vector<char> taken(spec.p, 0);
  out.data.labels.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    cols.clear();
    if (spec.layout == SupportLayout::cyclic) {
      for (std::size_t j = 0; j < k; ++j) cols.push_back(static_cast<index_t>((i * k + j) % spec.p));
    } else {
      // Floyd's algorithm: k distinct columns with k draws.
      for (std::size_t j = spec.p - k; j < spec.p; ++j) {
        const auto candidate = static_cast<index_t>(rng.uniform_index(j + 1));
        const index_t pick = taken[candidate] ? static_cast<index_t>(j) : candidate;
        taken[pick] = 1;
        cols.push_back(pick);
      }
      for (index_t c : cols) taken[c] = 0;
    }
    std::sort(cols.begin(), cols.end());
    double margin = 0.0;
    for (index_t c : cols) {
      const double v = normal(rng);
      builder.push(c, v);
      margin += v * out.planted[c];
    }
    builder.end_row();

    if (spec.loss == LossKind::logistic) {
      double label = margin > 0.0 ? 1.0 : margin < 0.0 ? -1.0 : (rng.uniform01() < 0.5 ? 1.0 : -1.0);
      if (rng.uniform01() < label_noise) label = -label;
      out.data.labels.push_back(label);
    } else {
      out.data.labels.push_back(margin + label_noise * normal(rng));
    }
  }
  out.data.features = std::move(builder).finish();
  out.data.features.n_cols = spec.p;
  return out;
}

struct Regularization {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  /// Fraction of nonzero coefficients in the solution at lambda2.
  double nnz_fraction = 0.0;
  std::size_t solves = 0;
};

struct RegularizationSearch {
  double tolerance = 0.2;
  std::size_t max_steps = 40;
  std::size_t epochs_per_solve = 300;
  std::uint64_t seed = 0;
};

inline double nonzero_fraction(std::span<const double> x) {
  const auto nnz = std::count_if(x.begin(), x.end(), [](double v) { return v != 0.0; });
  return static_cast<double>(nnz) / static_cast<double>(x.size());
}

/// lambda1 = 1/n and lambda2 chosen by bisection (in log scale) so that the solved problem
/// has a nonzero fraction within `tolerance` (relative) of the target.
inline Regularization gen_regularization(const Dataset& data, LossKind loss_kind,
                                         PenaltyKind penalty_kind,
                                         const BlockPartition& partition,
                                         double target_nnz_fraction,
                                         const RegularizationSearch& search = {}) {
  if (data.n_samples() == 0) throw InvalidArgument("gen_regularization: empty dataset");
  if (!(target_nnz_fraction > 0.0 && target_nnz_fraction <= 1.0)) {
    throw InvalidArgument("gen_regularization: target must lie in (0, 1]");
  }
  if (penalty_kind != PenaltyKind::l1 && penalty_kind != PenaltyKind::group_l2) {
    throw InvalidArgument("gen_regularization: needs an l1 or group penalty");
  }
  Regularization reg;
  reg.lambda1 = 1.0 / static_cast<double>(data.n_samples());
  const Loss loss{loss_kind, reg.lambda1};
  const double lo_target = target_nnz_fraction * (1.0 - search.tolerance);
  const double hi_target = target_nnz_fraction * (1.0 + search.tolerance);

  auto solve = [&](double lambda2) {
    Penalty h = penalty_kind == PenaltyKind::l1 ? Penalty::l1(lambda2) : Penalty::group_l2(lambda2);
    Problem problem(data, loss, h, partition);
    SolverConfig config;
    config.epochs = search.epochs_per_solve;
    config.seed = search.seed;
    config.checkpoint_every = config.epochs * data.n_samples();
    ++reg.solves;
    return nonzero_fraction(run_sequential(problem, config).final_x);
  };
  auto accept = [&](double lambda2, double fraction) {
    reg.lambda2 = lambda2;
    reg.nnz_fraction = fraction;
    return reg;
  };

  const double at_zero = solve(0.0);
  if (at_zero >= lo_target && at_zero <= hi_target) return accept(0.0, at_zero);

  // Above lambda_max = ||grad f(0)||_inf (per block norm for groups) the solution is 0.
  std::vector<double> grad(data.n_features());
  smooth_gradient(data, loss, std::vector<double>(data.n_features(), 0.0), grad);
  double lambda_max = 0.0;
  for (const auto& block : partition.blocks) {
    double norm_sq = 0.0;
    double inf = 0.0;
    for (index_t j : block) {
      norm_sq += grad[j] * grad[j];
      inf = std::max(inf, std::abs(grad[j]));
    }
    lambda_max = std::max(lambda_max, penalty_kind == PenaltyKind::l1 ? inf : std::sqrt(norm_sq));
  }
  if (!(lambda_max > 0.0)) throw Error("gen_regularization: zero gradient at the origin");

  double log_lo = std::log(lambda_max) - std::log(1e8);
  double log_hi = std::log(lambda_max);
  for (std::size_t step = 0; step < search.max_steps; ++step) {
    const double lambda2 = std::exp(0.5 * (log_lo + log_hi));
    const double fraction = solve(lambda2);
    if (fraction >= lo_target && fraction <= hi_target) return accept(lambda2, fraction);
    if (fraction > hi_target) {
      log_lo = std::log(lambda2);
    } else {
      log_hi = std::log(lambda2);
    }
  }
  throw Error("gen_regularization: bisection did not bracket the target after " +
              std::to_string(search.max_steps) + " steps");
}

struct RegularizedProblem {
  Problem problem;
  Regularization regularization;
};

/// Synthetic data with lambda1 = 1/n and an l1 weight tuned to the target nonzero fraction,
/// over singleton blocks.
inline RegularizedProblem make_sparse_l1_problem(const SyntheticSpec& spec,
                                                 double target_nnz_fraction,
                                                 const RegularizationSearch& search = {}) {
  SyntheticProblem gen = gen_sparse_glm(spec);
  const BlockPartition partition = singleton_partition(spec.p);
  const Regularization reg = gen_regularization(gen.data, spec.loss, PenaltyKind::l1, partition,
                                                target_nnz_fraction, search);
  return {Problem(std::move(gen.data), Loss{spec.loss, reg.lambda1}, Penalty::l1(reg.lambda2),
                  partition),
          reg};
}

}  // namespace proxsaga
