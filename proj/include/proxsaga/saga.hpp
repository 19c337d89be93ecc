#pragma once

// Sequential Sparse Proximal SAGA, the dense SAGA baseline and their shared machinery.

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "proxsaga/error.hpp"
#include "proxsaga/problem.hpp"
#include "proxsaga/random.hpp"

namespace proxsaga {

/// SAGA memory compressed to one scalar per sample: alpha_i = scalars[i] * a_i.
/// `avg` holds (1/n) sum_i alpha_i, maintained incrementally.
struct GradientMemory {
  std::vector<double> scalars;
  std::vector<double> avg;

  GradientMemory() = default;
  GradientMemory(std::size_t n, std::size_t p) : scalars(n, 0.0), avg(p, 0.0) {}

  std::size_t n() const noexcept { return scalars.size(); }
};

/// avg <- (1/n) sum_i scalars[i] a_i, summed directly.
inline void resync_average(GradientMemory& memory, const Dataset& data) {
  std::fill(memory.avg.begin(), memory.avg.end(), 0.0);
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    const RowView row = data.features.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      memory.avg[row.cols[k]] += memory.scalars[i] * row.vals[k];
    }
  }
  const double n = static_cast<double>(data.n_samples());
  for (double& v : memory.avg) v /= n;
}

enum class StepRule { fixed, one_fifth_L, one_half_L, one_thirty_sixth_L };

struct StepSize {
  StepRule rule = StepRule::one_fifth_L;
  double value = 0.0;

  static StepSize fixed(double gamma) { return {StepRule::fixed, gamma}; }

  double resolve(double L) const {
    switch (rule) {
      case StepRule::fixed:
        if (!(value > 0.0) || !std::isfinite(value)) {
          throw InvalidArgument("step size must be positive");
        }
        return value;
      case StepRule::one_fifth_L: return 1.0 / (5.0 * L);
      case StepRule::one_half_L: return 1.0 / (2.0 * L);
      case StepRule::one_thirty_sixth_L: return 1.0 / (36.0 * L);
    }
    return value;
  }
};

inline std::string to_string(const StepSize& step) {
  switch (step.rule) {
    case StepRule::fixed: return std::to_string(step.value);
    case StepRule::one_fifth_L: return "1/5L";
    case StepRule::one_half_L: return "1/2L";
    case StepRule::one_thirty_sixth_L: return "1/36L";
  }
  return "?";
}

/// Called with (worker id, sampled index) before each update. Instrumentation only.
using SampleObserver = std::function<void(std::size_t, std::size_t)>;

struct SolverConfig {
  StepSize step;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  /// Iterations between checkpoints; 0 means one epoch.
  std::size_t checkpoint_every = 0;
  /// Stop when the objective changes by less than this across an epoch; 0 disables.
  double tolerance = 0.0;
  /// Stop at the first checkpoint whose objective is at or below this value.
  std::optional<double> stop_objective;
  /// Record ||x_t - reference||^2 at checkpoints (test instrumentation).
  std::optional<std::vector<double>> reference_point;
  SampleObserver observer;

  void validate() const {
    if (epochs == 0) throw InvalidArgument("epochs must be at least 1");
    if (step.rule == StepRule::fixed) step.resolve(1.0);
    if (!(tolerance >= 0.0)) throw InvalidArgument("tolerance must be nonnegative");
  }

  std::size_t checkpoint_interval(std::size_t n) const noexcept {
    return checkpoint_every ? checkpoint_every : n;
  }
};

struct Checkpoint {
  std::size_t iterations = 0;
  double epochs = 0.0;
  double objective = 0.0;
  double wall_seconds = 0.0;
  /// Raw value of the iteration counter when the snapshot was taken.
  std::size_t counter_iterations = 0;
  std::optional<double> distance_sq;
};

struct Trace {
  std::vector<Checkpoint> checkpoints;
  std::vector<double> final_x;
  double step_size = 0.0;
  std::size_t threads = 1;
  std::string solver;
};

/// Scratch buffers reused across iterations; one per thread.
struct SpsWorkspace {
  std::vector<double> row_dense;   // a_i scattered, zero elsewhere
  std::vector<double> x_read;      // x read on T_i, indexed by coordinate
  std::vector<index_t> coords;     // coordinates of T_i in block order
  std::vector<double> next_values; // prox output aligned with coords

  explicit SpsWorkspace(std::size_t p = 0) : row_dense(p, 0.0), x_read(p, 0.0) {}
};

/// A vector supported on the coordinates of T_i.
struct SparseVector {
  std::vector<index_t> coords;
  std::vector<double> values;
};

namespace detail {

/// One coordinate of v_i: (l'_new - l'_old) a_ib + d_B (avg_b + lambda1 x_b).
inline double estimate_coordinate(double scalar_diff, double a, double weight, double avg,
                                  double lambda1, double x) noexcept {
  return scalar_diff * a + weight * (avg + lambda1 * x);
}

inline void scatter_row(const RowView& row, std::vector<double>& dense) {
  for (std::size_t k = 0; k < row.size(); ++k) dense[row.cols[k]] = row.vals[k];
}

inline void clear_row(const RowView& row, std::vector<double>& dense) {
  for (index_t j : row.cols) dense[j] = 0.0;
}

/// Sparse Proximal SAGA update for sample i through an access policy.
///
/// `Access` supplies read_x/apply_x, read_avg/add_avg and read_scalar/exchange_scalar.
/// All reads of this iteration precede all of its writes. The avg delta uses the scalar
/// the exchange replaced, not the one read earlier: two workers racing on the same i would
/// otherwise both add new - old and leave avg permanently off the mean of the scalars.
template <class Access>
void sparse_prox_update(const Problem& problem, Access& access, std::size_t i,
                        double gamma, SpsWorkspace& ws) {
  const Dataset& data = problem.data();
  const BlockPartition& partition = problem.partition();
  const SupportIndex& index = problem.index();
  const Penalty& h = problem.penalty();
  const double lambda1 = problem.loss().lambda1;
  const double inv_n = 1.0 / static_cast<double>(data.n_samples());
  const RowView row = data.features.row(i);
  const auto support = index.extended_support(i);

  ws.coords.clear();
  for (index_t b : support) {
    for (index_t j : partition.blocks[b]) {
      ws.coords.push_back(j);
      ws.x_read[j] = access.read_x(j);
    }
  }
  scatter_row(row, ws.row_dense);

  double margin = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) margin += row.vals[k] * ws.x_read[row.cols[k]];
  const double old_scalar = access.read_scalar(i);
  const double new_scalar = loss_derivative(problem.loss().kind, margin, data.labels[i]);
  const double diff = new_scalar - old_scalar;

  ws.next_values.resize(ws.coords.size());
  std::size_t pos = 0;
  for (index_t b : support) {
    const double weight = index.block_weight[b];
    const std::size_t len = partition.blocks[b].size();
    for (std::size_t k = pos; k < pos + len; ++k) {
      const index_t j = ws.coords[k];
      const double v = estimate_coordinate(diff, ws.row_dense[j], weight, access.read_avg(j),
                                           lambda1, ws.x_read[j]);
      ws.next_values[k] = ws.x_read[j] - gamma * v;
    }
    prox_block_unchecked(h, gamma * weight,
                         std::span<double>(ws.next_values).subspan(pos, len));
    pos += len;
  }

  for (std::size_t k = 0; k < ws.coords.size(); ++k) {
    const index_t j = ws.coords[k];
    access.apply_x(j, ws.x_read[j], ws.next_values[k]);
  }
  const double memory_diff = new_scalar - access.exchange_scalar(i, new_scalar);
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row.vals[k] != 0.0) access.add_avg(row.cols[k], memory_diff * row.vals[k] * inv_n);
  }
  clear_row(row, ws.row_dense);
}

struct SequentialAccess {
  std::span<double> x;
  GradientMemory& memory;

  double read_x(std::size_t j) const noexcept { return x[j]; }
  void apply_x(std::size_t j, double /*read*/, double next) noexcept { x[j] = next; }
  double read_avg(std::size_t j) const noexcept { return memory.avg[j]; }
  void add_avg(std::size_t j, double delta) noexcept { memory.avg[j] += delta; }
  double read_scalar(std::size_t i) const noexcept { return memory.scalars[i]; }
  double exchange_scalar(std::size_t i, double s) noexcept {
    return std::exchange(memory.scalars[i], s);
  }
};

}  // namespace detail

/// v_i on the coordinates of T_i, with exact l2 regularization:
/// v_i = grad f_i(x) - alpha_i + D_i (avg + lambda1 x).
inline SparseVector sparse_gradient_estimate(const Problem& problem, std::size_t i,
                                             std::span<const double> x,
                                             const GradientMemory& memory) {
  const Dataset& data = problem.data();
  const RowView row = data.features.row(i);
  const double new_scalar =
      loss_derivative(problem.loss().kind, row.dot(x), data.labels[i]);
  const double diff = new_scalar - memory.scalars[i];

  std::vector<double> dense(problem.dimension(), 0.0);
  detail::scatter_row(row, dense);
  SparseVector v;
  for (index_t b : problem.index().extended_support(i)) {
    const double weight = problem.index().block_weight[b];
    for (index_t j : problem.partition().blocks[b]) {
      v.coords.push_back(j);
      v.values.push_back(detail::estimate_coordinate(diff, dense[j], weight, memory.avg[j],
                                                     problem.loss().lambda1, x[j]));
    }
  }
  return v;
}

/// One Sparse Proximal SAGA iteration on sample i:
/// x <- prox_{gamma phi_i}(x - gamma v_i), alpha_i <- grad f_i(x), avg updated on S_i.
inline void sps_step(const Problem& problem, std::span<double> x, GradientMemory& memory,
                     std::size_t i, double gamma, SpsWorkspace& ws) {
  detail::SequentialAccess access{x, memory};
  detail::sparse_prox_update(problem, access, i, gamma, ws);
}

/// Textbook SAGA: u = grad f_i(x) - alpha_i + avg + lambda1 x, x <- prox_{gamma h}(x - gamma u).
/// Touches every coordinate.
inline void dense_saga_step(const Problem& problem, std::span<double> x,
                            GradientMemory& memory, std::size_t i, double gamma,
                            SpsWorkspace& ws) {
  const Dataset& data = problem.data();
  const RowView row = data.features.row(i);
  const double lambda1 = problem.loss().lambda1;
  const double new_scalar =
      loss_derivative(problem.loss().kind, row.dot(x), data.labels[i]);
  const double diff = new_scalar - memory.scalars[i];

  detail::scatter_row(row, ws.row_dense);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double u = diff * ws.row_dense[j] + (memory.avg[j] + lambda1 * x[j]);
    x[j] = x[j] - gamma * u;
  }
  prox_full(problem.penalty(), problem.partition(), gamma, x);

  const double inv_n = 1.0 / static_cast<double>(data.n_samples());
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row.vals[k] != 0.0) memory.avg[row.cols[k]] += diff * row.vals[k] * inv_n;
  }
  memory.scalars[i] = new_scalar;
  detail::clear_row(row, ws.row_dense);
}

/// ||x - prox_{gamma phi}(x - gamma D grad f(x))|| with phi = sum_B d_B h_B; zero iff x is optimal.
inline double fixed_point_residual(const Problem& problem, std::span<const double> x,
                                   double gamma) {
  if (!(gamma > 0.0)) throw InvalidArgument("fixed_point_residual: gamma must be positive");
  std::vector<double> w(x.size());
  smooth_gradient(problem.data(), problem.loss(), x, w);
  const auto& partition = problem.partition();
  const auto& weights = problem.index().block_weight;
  std::vector<double> scratch;
  for (std::size_t b = 0; b < partition.n_blocks(); ++b) {
    const double weight = weights[b];
    const auto& coords = partition.blocks[b];
    if (weight == 0.0) {
      for (index_t j : coords) w[j] = x[j];
      continue;
    }
    for (index_t j : coords) w[j] = x[j] - gamma * weight * w[j];
    detail::prox_gathered(problem.penalty(), gamma * weight, w, coords, scratch);
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) acc += (x[j] - w[j]) * (x[j] - w[j]);
  return std::sqrt(acc);
}

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += (a[j] - b[j]) * (a[j] - b[j]);
  return acc;
}

/// Shared driver of the sequential incremental solvers: x0 = 0, alpha_i = 0,
/// uniform seeded sampling, checkpoints every `checkpoint_interval` iterations.
template <class Step>
Trace run_incremental(const Problem& problem, const SolverConfig& config, const char* name,
                      Step&& step) {
  config.validate();
  const std::size_t n = problem.n_samples();
  const std::size_t p = problem.dimension();
  const double gamma = config.step.resolve(problem.smoothness().L);
  const std::size_t interval = config.checkpoint_interval(n);
  const std::size_t total = config.epochs * n;

  std::vector<double> x(p, 0.0);
  GradientMemory memory(n, p);
  SpsWorkspace ws(p);
  SampleStream rng(config.seed, 0);

  Trace trace;
  trace.solver = name;
  trace.step_size = gamma;
  const auto start = std::chrono::steady_clock::now();
  auto record = [&](std::size_t t) {
    Checkpoint c;
    c.iterations = t;
    c.counter_iterations = t;
    c.epochs = static_cast<double>(t) / static_cast<double>(n);
    c.objective = problem.objective(x);
    c.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (config.reference_point) c.distance_sq = squared_distance(x, *config.reference_point);
    trace.checkpoints.push_back(c);
    return c.objective;
  };

  record(0);
  double epoch_start_objective = trace.checkpoints.back().objective;
  for (std::size_t t = 1; t <= total; ++t) {
    const std::size_t i = rng.uniform_index(n);
    if (config.observer) config.observer(0, i);
    step(std::span<double>(x), memory, i, gamma, ws);

    const bool at_checkpoint = t % interval == 0 || t == total;
    if (at_checkpoint) {
      const double objective = record(t);
      if (config.stop_objective && objective <= *config.stop_objective) break;
    }
    if (config.tolerance > 0.0 && t % n == 0) {
      const double objective = at_checkpoint ? trace.checkpoints.back().objective
                                             : problem.objective(x);
      if (std::abs(epoch_start_objective - objective) < config.tolerance) {
        if (!at_checkpoint) record(t);
        break;
      }
      epoch_start_objective = objective;
    }
  }
  trace.final_x = std::move(x);
  return trace;
}

}  // namespace detail

/// Sparse Proximal SAGA from x0 = 0 with zero-initialized memory.
inline Trace run_sequential(const Problem& problem, const SolverConfig& config) {
  return detail::run_incremental(
      problem, config, "sparse_prox_saga",
      [&problem](std::span<double> x, GradientMemory& m, std::size_t i, double gamma,
                 SpsWorkspace& ws) { sps_step(problem, x, m, i, gamma, ws); });
}

/// Dense proximal SAGA baseline; same sampling stream as run_sequential.
inline Trace run_dense_saga(const Problem& problem, const SolverConfig& config) {
  return detail::run_incremental(
      problem, config, "dense_saga",
      [&problem](std::span<double> x, GradientMemory& m, std::size_t i, double gamma,
                 SpsWorkspace& ws) { dense_saga_step(problem, x, m, i, gamma, ws); });
}

}  // namespace proxsaga
