#pragma once

// FISTA with backtracking line search: the synchronous full-gradient baseline.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "proxsaga/error.hpp"
#include "proxsaga/problem.hpp"
#include "proxsaga/saga.hpp"

namespace proxsaga {

struct FistaState {
  std::vector<double> x;
  std::vector<double> y;
  double t = 1.0;
  double current_L = 1.0;
};

struct FistaConfig {
  std::size_t iterations = 1000;
  /// Stop at the first iterate whose objective is at or below this value.
  std::optional<double> stop_objective;
  /// Threads for the full gradient; reduction order is fixed for a given count.
  std::size_t gradient_threads = 1;
  std::size_t max_doublings = 60;
  double backtrack_factor = 2.0;
};

namespace detail {

/// Smooth value and gradient at y; rows are split into contiguous chunks whose partial
/// sums are combined in chunk order.
inline double smooth_value_and_gradient(const Problem& problem, std::span<const double> y,
                                        std::span<double> grad, std::size_t threads) {
  const Dataset& data = problem.data();
  const std::size_t n = data.n_samples();
  const std::size_t p = problem.dimension();
  const Loss& loss = problem.loss();
  threads = std::clamp<std::size_t>(threads, 1, n);

  std::vector<std::vector<double>> partial(threads, std::vector<double>(p, 0.0));
  std::vector<double> partial_value(threads, 0.0);
  auto work = [&](std::size_t chunk) {
    const std::size_t begin = n * chunk / threads;
    const std::size_t end = n * (chunk + 1) / threads;
    auto& g = partial[chunk];
    double value = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const RowView row = data.features.row(i);
      const LossEval e = loss_scalar(loss.kind, row.dot(y), data.labels[i]);
      value += e.value;
      for (std::size_t k = 0; k < row.size(); ++k) g[row.cols[k]] += e.derivative * row.vals[k];
    }
    partial_value[chunk] = value;
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t c = 0; c < threads; ++c) pool.emplace_back(work, c);
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  double value = 0.0;
  double norm_sq = 0.0;
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t c = 0; c < threads; ++c) {
    value += partial_value[c];
    for (std::size_t j = 0; j < p; ++j) grad[j] += partial[c][j];
  }
  for (std::size_t j = 0; j < p; ++j) {
    grad[j] = grad[j] * inv_n + loss.lambda1 * y[j];
    norm_sq += y[j] * y[j];
  }
  return value * inv_n + 0.5 * loss.lambda1 * norm_sq;
}

}  // namespace detail

inline FistaState fista_init(const Problem& problem, std::span<const double> x0) {
  FistaState state;
  state.x.assign(x0.begin(), x0.end());
  state.y = state.x;
  state.current_L = problem.smoothness().L / 100.0;
  return state;
}

/// One accelerated proximal gradient step. current_L is doubled until
/// f(x+) <= f(y) + <grad f(y), x+ - y> + (L/2)||x+ - y||^2 holds at x+ = prox_{h/L}(y - grad f(y)/L).
inline void fista_step(FistaState& state, const Problem& problem,
                       const FistaConfig& config = {}) {
  if (!(state.current_L > 0.0)) throw InvalidArgument("fista_step: current_L must be positive");
  const std::size_t p = problem.dimension();
  std::vector<double> grad(p);
  const double fy =
      detail::smooth_value_and_gradient(problem, state.y, grad, config.gradient_threads);

  std::vector<double> next(p);
  std::vector<double> scratch(p);
  std::size_t doublings = 0;
  for (;;) {
    const double L = state.current_L;
    for (std::size_t j = 0; j < p; ++j) next[j] = state.y[j] - grad[j] / L;
    prox_full(problem.penalty(), problem.partition(), 1.0 / L, next);

    double linear = 0.0;
    double dist_sq = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double d = next[j] - state.y[j];
      linear += grad[j] * d;
      dist_sq += d * d;
    }
    const double f_next = smooth_objective(problem.data(), problem.loss(), next);
    // Near the optimum both sides agree to rounding; without the slack L would double forever.
    const double slack = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(fy);
    if (dist_sq == 0.0 || f_next <= fy + linear + 0.5 * L * dist_sq + slack) break;
    if (++doublings > config.max_doublings) {
      throw Error("fista: backtracking exceeded " + std::to_string(config.max_doublings) +
                  " doublings");
    }
    state.current_L *= config.backtrack_factor;
  }

  const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * state.t * state.t));
  const double momentum = (state.t - 1.0) / t_next;
  for (std::size_t j = 0; j < p; ++j) {
    state.y[j] = next[j] + momentum * (next[j] - state.x[j]);
  }
  state.x = std::move(next);
  state.t = t_next;
}

/// Vanilla FISTA (no restart) from x0 = 0; one checkpoint per iteration, each iteration
/// counted as one epoch.
inline Trace run_fista(const Problem& problem, const FistaConfig& config) {
  if (config.iterations == 0) throw InvalidArgument("fista: iterations must be at least 1");
  FistaState state = fista_init(problem, std::vector<double>(problem.dimension(), 0.0));
  Trace trace;
  trace.solver = "fista";
  trace.threads = config.gradient_threads;
  const auto start = std::chrono::steady_clock::now();
  auto record = [&](std::size_t k) {
    Checkpoint c;
    c.iterations = k;
    c.counter_iterations = k;
    c.epochs = static_cast<double>(k);
    c.objective = problem.objective(state.x);
    c.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.checkpoints.push_back(c);
    return c.objective;
  };
  record(0);
  for (std::size_t k = 1; k <= config.iterations; ++k) {
    fista_step(state, problem, config);
    const double objective = record(k);
    if (config.stop_objective && objective <= *config.stop_objective) break;
  }
  trace.step_size = 1.0 / state.current_L;
  trace.final_x = std::move(state.x);
  return trace;
}

}  // namespace proxsaga
