#pragma once

// ProxASAGA: lock-free asynchronous Sparse Proximal SAGA.

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "proxsaga/error.hpp"
#include "proxsaga/problem.hpp"
#include "proxsaga/random.hpp"
#include "proxsaga/saga.hpp"

namespace proxsaga {

/// Atomic `cell += delta` as a compare-and-swap loop on the cell's bit pattern.
/// Returns the number of failed exchanges (contention retries).
inline std::size_t atomic_float_add(std::atomic<double>& cell, double delta,
                                    std::memory_order order = std::memory_order_seq_cst) {
  double expected = cell.load(order == std::memory_order_relaxed ? std::memory_order_relaxed
                                                                 : std::memory_order_seq_cst);
  std::size_t retries = 0;
  while (!cell.compare_exchange_weak(expected, expected + delta, order,
                                     order == std::memory_order_relaxed
                                         ? std::memory_order_relaxed
                                         : std::memory_order_seq_cst)) {
    ++retries;
  }
  return retries;
}

/// Fixed-size array of atomically updated doubles.
class AtomicVector {
 public:
  AtomicVector() = default;
  explicit AtomicVector(std::size_t size)
      : size_(size), data_(std::make_unique<std::atomic<double>[]>(size)) {
    for (std::size_t j = 0; j < size_; ++j) data_[j].store(0.0, std::memory_order_relaxed);
  }

  std::size_t size() const noexcept { return size_; }
  std::atomic<double>& operator[](std::size_t j) noexcept { return data_[j]; }
  const std::atomic<double>& operator[](std::size_t j) const noexcept { return data_[j]; }

  std::vector<double> snapshot() const {
    std::vector<double> out(size_);
    for (std::size_t j = 0; j < size_; ++j) out[j] = data_[j].load();
    return out;
  }

 private:
  std::size_t size_ = 0;
  std::unique_ptr<std::atomic<double>[]> data_;
};

/// Parameters, memory average and memory scalars shared by all workers.
struct SharedState {
  AtomicVector x;
  AtomicVector avg;
  AtomicVector scalars;
  /// Completed iterations, published in batches.
  std::atomic<std::size_t> iteration_counter{0};

  SharedState(std::size_t n, std::size_t p) : x(p), avg(p), scalars(n) {}

  /// Memory view with avg recomputed exactly from the scalars. Call after workers join.
  GradientMemory resynced_memory(const Dataset& data) const {
    GradientMemory memory;
    memory.scalars = scalars.snapshot();
    memory.avg.assign(x.size(), 0.0);
    resync_average(memory, data);
    return memory;
  }
};

namespace detail {

template <std::memory_order Order>
struct AtomicAccess {
  SharedState& shared;

  double read_x(std::size_t j) const noexcept { return shared.x[j].load(Order); }
  void apply_x(std::size_t j, double read, double next) noexcept {
    atomic_float_add(shared.x[j], next - read, Order);
  }
  double read_avg(std::size_t j) const noexcept { return shared.avg[j].load(Order); }
  void add_avg(std::size_t j, double delta) noexcept {
    atomic_float_add(shared.avg[j], delta, Order);
  }
  double read_scalar(std::size_t i) const noexcept { return shared.scalars[i].load(Order); }
  double exchange_scalar(std::size_t i, double s) noexcept {
    return shared.scalars[i].exchange(s, Order);
  }
};

}  // namespace detail

/// One ProxASAGA iteration. i is sampled before anything is read, and only T_i is read:
/// coordinatewise inconsistent reads of x, alpha_i and avg on T_i; local computation of
/// delta-alpha, v-hat and delta-x; atomic adds into x on T_i, an atomic exchange of the memory
/// scalar, then atomic adds into avg on S_i.
inline void worker_iteration(SharedState& shared, const Problem& problem, std::size_t i,
                             double gamma, SpsWorkspace& ws, bool relaxed = false) {
  if (relaxed) {
    detail::AtomicAccess<std::memory_order_relaxed> access{shared};
    detail::sparse_prox_update(problem, access, i, gamma, ws);
  } else {
    detail::AtomicAccess<std::memory_order_seq_cst> access{shared};
    detail::sparse_prox_update(problem, access, i, gamma, ws);
  }
}

struct AsyncConfig : SolverConfig {
  std::size_t threads = 1;
  /// Iterations a worker performs between updates of the shared counter.
  std::size_t counter_batch = 100;
  /// Upper bound on `threads`.
  std::size_t max_threads = 256;
  /// Relaxed memory ordering for all atomics (strongest ordering otherwise).
  bool relaxed_atomics = false;
  /// Yield the CPU after every counter flush. When unset, workers yield only if there are
  /// more threads than hardware cores, so that the scheduler switches workers between
  /// iterations instead of preempting them mid-update.
  std::optional<bool> yield_between_batches;

  bool yields() const {
    if (yield_between_batches) return *yield_between_batches;
    const unsigned cores = std::thread::hardware_concurrency();
    return cores != 0 && threads > cores;
  }

  void validate() const {
    SolverConfig::validate();
    if (threads == 0) throw InvalidArgument("threads must be at least 1");
    if (threads > max_threads) {
      throw InvalidArgument("threads exceeds the configured cap of " +
                            std::to_string(max_threads));
    }
    if (counter_batch == 0) throw InvalidArgument("counter_batch must be at least 1");
  }
};

/// Runs ProxASAGA and keeps the shared state for inspection after the run.
class AsyncSolver {
 public:
  AsyncSolver(const Problem& problem, AsyncConfig config)
      : problem_(problem),
        config_(std::move(config)),
        shared_(problem.n_samples(), problem.dimension()) {
    config_.validate();
  }

  const SharedState& shared() const noexcept { return shared_; }

  Trace run() {
    const std::size_t n = problem_.n_samples();
    const std::size_t threads = config_.threads;
    const double gamma = config_.step.resolve(problem_.smoothness().L);
    const std::size_t interval = config_.checkpoint_interval(n);
    const std::size_t total = config_.epochs * n;
    const std::size_t batch = config_.counter_batch;

    n_slots_ = total / interval + 1;
    slots_ = std::make_unique<Slot[]>(n_slots_);
    start_ = std::chrono::steady_clock::now();
    stop_.store(false);
    failed_.store(false);
    publish(0, 0);

    Trace trace;
    trace.solver = "prox_asaga";
    trace.threads = threads;
    trace.step_size = gamma;

    std::atomic<bool> workers_done{false};
    std::thread monitor([&] { monitor_loop(trace, workers_done); });

    std::vector<std::thread> workers;
    std::exception_ptr spawn_error;
    try {
      workers.reserve(threads);
      for (std::size_t w = 0; w < threads; ++w) {
        const std::size_t quota = total / threads + (w < total % threads ? 1 : 0);
        workers.emplace_back(
            [=, this] { worker_loop(w, quota, gamma, interval, batch, config_.yields()); });
      }
    } catch (...) {
      spawn_error = std::current_exception();
      stop_.store(true);
    }
    for (auto& t : workers) t.join();
    workers_done.store(true);
    generation_.fetch_add(1);
    generation_.notify_all();
    monitor.join();

    if (spawn_error) {
      try {
        std::rethrow_exception(spawn_error);
      } catch (const std::exception& e) {
        throw Error(std::string("failed to spawn worker threads: ") + e.what());
      }
    }
    if (failed_.load()) throw Error("worker failed: " + failure_message_);

    trace.final_x = shared_.x.snapshot();
    const std::size_t done = shared_.iteration_counter.load();
    if (trace.checkpoints.empty() || trace.checkpoints.back().counter_iterations != done) {
      Checkpoint c;
      c.iterations = std::max(done, trace.checkpoints.empty()
                                        ? std::size_t{0}
                                        : trace.checkpoints.back().iterations + 1);
      c.counter_iterations = done;
      c.epochs = static_cast<double>(done) / static_cast<double>(n);
      c.objective = problem_.objective(trace.final_x);
      c.wall_seconds = elapsed();
      if (config_.reference_point) {
        c.distance_sq = detail::squared_distance(trace.final_x, *config_.reference_point);
      }
      trace.checkpoints.push_back(c);
    }
    return trace;
  }

 private:
  struct Slot {
    std::vector<double> x;
    std::size_t counter = 0;
    double wall_seconds = 0.0;
    std::atomic<bool> ready{false};
  };

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  void publish(std::size_t slot, std::size_t counter) {
    Slot& s = slots_[slot];
    s.x = shared_.x.snapshot();
    s.counter = counter;
    s.wall_seconds = elapsed();
    s.ready.store(true, std::memory_order_release);
    generation_.fetch_add(1);
    generation_.notify_all();
  }

  void worker_loop(std::size_t worker, std::size_t quota, double gamma, std::size_t interval,
                   std::size_t batch, bool yield) {
    try {
      SampleStream rng(config_.seed, worker);
      SpsWorkspace ws(problem_.dimension());
      const std::size_t n = problem_.n_samples();
      std::size_t pending = 0;
      auto flush = [&] {
        const std::size_t before = shared_.iteration_counter.fetch_add(pending);
        const std::size_t after = before + pending;
        pending = 0;
        for (std::size_t k = before / interval + 1; k * interval <= after; ++k) {
          if (k < n_slots_) publish(k, after);
        }
      };
      for (std::size_t t = 0; t < quota; ++t) {
        if (pending == 0 && stop_.load(std::memory_order_relaxed)) break;
        const std::size_t i = rng.uniform_index(n);
        if (config_.observer) config_.observer(worker, i);
        worker_iteration(shared_, problem_, i, gamma, ws, config_.relaxed_atomics);
        if (++pending == batch) {
          flush();
          if (yield) std::this_thread::yield();
        }
      }
      if (pending > 0) flush();
    } catch (const std::exception& e) {
      fail(e.what());
    } catch (...) {
      fail("unknown exception");
    }
  }

  void fail(const std::string& message) {
    std::lock_guard lock(failure_mutex_);
    if (!failed_.exchange(true)) failure_message_ = message;
    stop_.store(true);
  }

  /// Scores snapshots in checkpoint order; sets the stop flag once the target is reached.
  void monitor_loop(Trace& trace, const std::atomic<bool>& workers_done) {
    const std::size_t n = problem_.n_samples();
    const std::size_t interval = config_.checkpoint_interval(n);
    std::size_t next = 0;
    while (next < n_slots_) {
      const std::size_t seen = generation_.load();
      Slot& slot = slots_[next];
      if (slot.ready.load(std::memory_order_acquire)) {
        Checkpoint c;
        c.iterations = next * interval;
        c.counter_iterations = slot.counter;
        c.epochs = static_cast<double>(slot.counter) / static_cast<double>(n);
        c.objective = problem_.objective(slot.x);
        c.wall_seconds = slot.wall_seconds;
        if (config_.reference_point) {
          c.distance_sq = detail::squared_distance(slot.x, *config_.reference_point);
        }
        trace.checkpoints.push_back(c);
        std::vector<double>().swap(slot.x);
        ++next;
        if (config_.stop_objective && c.objective <= *config_.stop_objective) {
          stop_.store(true);
        }
        continue;
      }
      if (workers_done.load()) {
        // Later slots may still be ready if a worker crossed several boundaries out of order.
        bool any_ready = false;
        for (std::size_t k = next; k < n_slots_ && !any_ready; ++k) {
          any_ready = slots_[k].ready.load(std::memory_order_acquire);
        }
        if (!any_ready) break;
        ++next;
        continue;
      }
      generation_.wait(seen);
    }
  }

  const Problem& problem_;
  AsyncConfig config_;
  SharedState shared_;
  std::unique_ptr<Slot[]> slots_;
  std::size_t n_slots_ = 0;
  std::atomic<std::size_t> generation_{0};
  std::atomic<bool> stop_{false};
  std::atomic<bool> failed_{false};
  std::mutex failure_mutex_;
  std::string failure_message_;
  std::chrono::steady_clock::time_point start_;
};

inline Trace run_async(const Problem& problem, const AsyncConfig& config) {
  AsyncSolver solver(problem, config);
  return solver.run();
}

struct SpeedupRow {
  std::size_t cores = 1;
  double wall_speedup = 0.0;
  double theoretical_speedup = 0.0;
  bool reached = false;
  /// Counter iterations and seconds at the first checkpoint meeting the target.
  std::size_t iterations = 0;
  double seconds = 0.0;
};

struct SpeedupReport {
  std::vector<SpeedupRow> rows;
  double delta = 0.0;
  double L = 0.0;
  double kappa = 0.0;
};

/// Wall-clock and iteration-count ("theoretical") speedups to reach
/// objective - optimum <= target_subopt, relative to the first (single-core) entry:
///   wall = t_1 / t_c,   theoretical = c * iters_1 / iters_c.
inline SpeedupReport measure_speedup(const Problem& problem, const AsyncConfig& base,
                                     const std::vector<std::size_t>& cores,
                                     double optimum_objective, double target_subopt) {
  if (cores.empty() || cores.front() != 1) {
    throw InvalidArgument("measure_speedup: core list must start with 1");
  }
  for (std::size_t k = 1; k < cores.size(); ++k) {
    if (cores[k] <= cores[k - 1]) {
      throw InvalidArgument("measure_speedup: core list must be strictly ascending");
    }
  }
  SpeedupReport report;
  report.delta = problem.index().delta;
  report.L = problem.smoothness().L;
  report.kappa = problem.smoothness().kappa();

  std::optional<SpeedupRow> baseline;
  for (std::size_t c : cores) {
    // The same threshold value stops the run and scores it.
    const double threshold = optimum_objective + target_subopt;
    AsyncConfig config = base;
    config.threads = c;
    config.stop_objective = threshold;
    const Trace trace = run_async(problem, config);

    SpeedupRow row;
    row.cores = c;
    for (const Checkpoint& cp : trace.checkpoints) {
      if (cp.objective <= threshold) {
        row.reached = true;
        row.iterations = cp.counter_iterations;
        row.seconds = cp.wall_seconds;
        break;
      }
    }
    if (c == 1) baseline = row;
    if (row.reached && baseline && baseline->reached) {
      row.theoretical_speedup = static_cast<double>(c) *
                                static_cast<double>(baseline->iterations) /
                                static_cast<double>(std::max<std::size_t>(row.iterations, 1));
      row.wall_speedup = c == 1 ? 1.0 : baseline->seconds / std::max(row.seconds, 1e-12);
    }
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace proxsaga
