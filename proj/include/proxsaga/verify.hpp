#pragma once

// Property suite run by `proxsaga verify`: structural lemmas, prox characterization,
// loss calculus, solver equivalences, asynchronous outcomes and the linear-rate envelope.

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "proxsaga/async.hpp"
#include "proxsaga/diagnostics.hpp"
#include "proxsaga/fista.hpp"
#include "proxsaga/problem.hpp"
#include "proxsaga/random.hpp"
#include "proxsaga/saga.hpp"
#include "proxsaga/synthetic.hpp"

namespace proxsaga {

struct PropertyResult {
  std::string group;
  std::string name;
  bool pass = false;
  double observed = 0.0;
  double threshold = 0.0;
  /// Distance to the threshold on the passing side; negative when the property fails.
  double margin = 0.0;
  std::string note;
};

struct VerifyReport {
  std::vector<PropertyResult> results;
  double seconds = 0.0;

  bool pass() const {
    return std::all_of(results.begin(), results.end(),
                       [](const PropertyResult& r) { return r.pass; });
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["pass"] = pass();
    j["seconds"] = seconds;
    auto& list = j["properties"] = nlohmann::json::array();
    for (const auto& r : results) {
      list.push_back({{"group", r.group},
                      {"name", r.name},
                      {"pass", r.pass},
                      {"observed", r.observed},
                      {"threshold", r.threshold},
                      {"margin", r.margin},
                      {"note", r.note}});
    }
    return j;
  }
};

/// Blockwise prox under test: v <- prox_{step h_B}(v).
using ProxOperator = std::function<void(const Penalty&, double, std::span<double>)>;

struct VerifyOptions {
  /// Groups to run; empty runs all of them.
  std::vector<std::string> only;
  ProxOperator prox = [](const Penalty& h, double step, std::span<double> v) {
    prox_block_unchecked(h, step, v);
  };
  std::string cache_dir;
  std::uint64_t seed = 20170601;
};

inline const std::vector<std::string>& verify_groups() {
  static const std::vector<std::string> groups = {"support", "prox",  "loss",    "saga",
                                                  "async",   "fista", "envelope"};
  return groups;
}

/// The desk-scale l1-logistic instance used by the solver-level properties.
inline SyntheticSpec reference_instance_spec() { return SyntheticSpec{200, 50, 0.1, 42}; }

namespace detail {

class Recorder {
 public:
  explicit Recorder(VerifyReport& report) : report_(report) {}

  void group(std::string name) { group_ = std::move(name); }

  bool at_most(const std::string& name, double observed, double threshold,
               std::string note = {}) {
    return add(name, observed, threshold, observed <= threshold, threshold - observed,
               std::move(note));
  }

  bool at_least(const std::string& name, double observed, double threshold,
                std::string note = {}) {
    return add(name, observed, threshold, observed >= threshold, observed - threshold,
               std::move(note));
  }

 private:
  bool add(const std::string& name, double observed, double threshold, bool pass,
           double margin, std::string note) {
    if (std::isnan(observed)) pass = false;
    report_.results.push_back({group_, name, pass, observed, threshold, margin, std::move(note)});
    return pass;
  }

  VerifyReport& report_;
  std::string group_;
};

/// Random sparse dataset without empty rows or unused columns.
inline Dataset random_dataset(SampleStream& rng, std::size_t n, std::size_t p, double density,
                              LossKind kind = LossKind::logistic) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<index_t>> rows(n);
  std::vector<char> used(p, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (rng.uniform01() < density) {
        rows[i].push_back(static_cast<index_t>(j));
        used[j] = 1;
      }
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    if (!used[j]) rows[rng.uniform_index(n)].push_back(static_cast<index_t>(j));
  }
  for (auto& row : rows) {
    if (row.empty()) row.push_back(static_cast<index_t>(rng.uniform_index(p)));
  }
  Dataset data;
  CsrBuilder builder(p);
  for (auto& row : rows) {
    std::sort(row.begin(), row.end());
    for (index_t j : row) builder.push(j, normal(rng));
    builder.end_row();
    data.labels.push_back(kind == LossKind::logistic ? (rng.uniform01() < 0.5 ? -1.0 : 1.0)
                                                     : normal(rng));
  }
  data.features = std::move(builder).finish();
  return data;
}

/// Random partition of 0..p-1 into between 1 and p blocks of scattered coordinates.
inline BlockPartition random_partition(SampleStream& rng, std::size_t p) {
  std::vector<index_t> order(p);
  for (std::size_t j = 0; j < p; ++j) order[j] = static_cast<index_t>(j);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t count = 1 + rng.uniform_index(p);
  std::vector<std::vector<index_t>> blocks(count);
  for (std::size_t k = 0; k < p; ++k) {
    blocks[k < count ? k : rng.uniform_index(count)].push_back(order[k]);
  }
  for (auto& b : blocks) std::sort(b.begin(), b.end());
  return make_partition(std::move(blocks), p);
}

inline std::vector<double> random_vector(SampleStream& rng, std::size_t p, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> x(p);
  for (double& v : x) v = normal(rng);
  return x;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::abs(a[j] - b[j]));
  return worst;
}

/// Shared expensive fixtures, built on first use.
class Fixtures {
 public:
  explicit Fixtures(const VerifyOptions& options) : options_(options) {}

  const Problem& problem() {
    if (!instance_) instance_.emplace(make_sparse_l1_problem(reference_instance_spec(), 0.1));
    return instance_->problem;
  }

  const Optimum& optimum() {
    if (!optimum_) {
      OptimumOptions opt;
      opt.cache_dir = options_.cache_dir;
      optimum_ = compute_optimum(problem(), opt);
    }
    return *optimum_;
  }

 private:
  const VerifyOptions& options_;
  std::optional<RegularizedProblem> instance_;
  std::optional<Optimum> optimum_;
};

inline void verify_support(Recorder& rec, SampleStream& rng) {
  rec.group("support");
  double membership_errors = 0.0;
  double weight_errors = 0.0;
  double unbiased_d = 0.0;
  double unbiased_phi = 0.0;
  double delta_errors = 0.0;
  for (int instance = 0; instance < 20; ++instance) {
    const std::size_t n = 2 + rng.uniform_index(49);
    const std::size_t p = 1 + rng.uniform_index(20);
    const Dataset data = random_dataset(rng, n, p, 0.05 + 0.4 * rng.uniform01());
    const BlockPartition part = random_partition(rng, p);
    const SupportIndex idx = build_support_index(data.features, part, DeadBlockPolicy::reject);

    std::vector<std::size_t> count(part.n_blocks(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const RowView row = data.features.row(i);
      for (std::size_t b = 0; b < part.n_blocks(); ++b) {
        bool hit = false;
        for (index_t j : row.cols) hit = hit || part.block_of[j] == b;
        if (hit != idx.contains(i, static_cast<index_t>(b))) membership_errors += 1.0;
        if (hit) ++count[b];
      }
    }
    double expected_delta = 0.0;
    for (std::size_t b = 0; b < part.n_blocks(); ++b) {
      const double dn = static_cast<double>(n);
      if (idx.block_weight[b] != dn / static_cast<double>(count[b])) weight_errors += 1.0;
      expected_delta = std::max(expected_delta, static_cast<double>(count[b]) / dn);
      // (1/n) sum_i [D_i]_BB = n_B d_B / n
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (idx.contains(i, static_cast<index_t>(b))) mean += idx.block_weight[b];
      }
      unbiased_d = std::max(unbiased_d, std::abs(mean / dn - 1.0));
    }
    if (idx.delta != expected_delta || idx.delta < 1.0 / static_cast<double>(n) ||
        idx.delta > 1.0) {
      delta_errors += 1.0;
    }

    const std::vector<double> x = random_vector(rng, p);
    for (const Penalty& h : {Penalty::l1(0.3), Penalty::group_l2(0.7)}) {
      double mean_phi = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean_phi += phi_value(h, part, idx, i, x);
      mean_phi /= static_cast<double>(n);
      const double hx = penalty_value(h, x, part);
      unbiased_phi = std::max(unbiased_phi, std::abs(mean_phi - hx) / std::max(1.0, std::abs(hx)));
    }
  }
  rec.at_most("extended support matches brute-force membership", membership_errors, 0.0);
  rec.at_most("block weights equal n / n_B", weight_errors, 0.0);
  rec.at_most("delta equals max n_B / n within [1/n, 1]", delta_errors, 0.0);
  rec.at_most("mean of D_i is the identity", unbiased_d, 1e-12);
  rec.at_most("mean of phi_i equals h", unbiased_phi, 1e-12);
}

/// Worst violation of the prox optimality condition (v - z)/step in the subdifferential.
inline double prox_condition_violation(const Penalty& h, double step, std::span<const double> v,
                                       std::span<const double> z) {
  double worst = 0.0;
  switch (h.kind) {
    case PenaltyKind::zero:
      return max_abs_diff(v, z) / step;
    case PenaltyKind::l1:
      for (std::size_t j = 0; j < v.size(); ++j) {
        const double g = (v[j] - z[j]) / step;
        if (z[j] != 0.0) {
          worst = std::max(worst, std::abs(g - h.strength * (z[j] > 0.0 ? 1.0 : -1.0)));
        } else {
          worst = std::max(worst, std::abs(g) - h.strength);
        }
      }
      return worst;
    case PenaltyKind::group_l2: {
      double z_norm = 0.0;
      double g_norm = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j) {
        z_norm += z[j] * z[j];
        g_norm += (v[j] - z[j]) * (v[j] - z[j]);
      }
      z_norm = std::sqrt(z_norm);
      g_norm = std::sqrt(g_norm) / step;
      if (z_norm == 0.0) return g_norm - h.strength;
      for (std::size_t j = 0; j < v.size(); ++j) {
        worst = std::max(worst, std::abs((v[j] - z[j]) / step - h.strength * z[j] / z_norm));
      }
      return worst;
    }
    case PenaltyKind::box:
      for (std::size_t j = 0; j < v.size(); ++j) {
        const double g = (v[j] - z[j]) / step;
        if (z[j] < h.lo || z[j] > h.hi) return std::numeric_limits<double>::infinity();
        // Normal cone of [lo, hi] at z: {0} inside, (-inf, 0] at lo, [0, inf) at hi.
        double violation = std::abs(g);
        if (z[j] == h.lo && g <= 0.0) violation = 0.0;
        if (z[j] == h.hi && g >= 0.0) violation = 0.0;
        worst = std::max(worst, violation);
      }
      return worst;
  }
  return worst;
}

inline Penalty random_penalty(SampleStream& rng, PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::zero: return Penalty::none();
    case PenaltyKind::l1: return Penalty::l1(2.0 * rng.uniform01());
    case PenaltyKind::group_l2: return Penalty::group_l2(2.0 * rng.uniform01());
    case PenaltyKind::box: {
      const double a = 4.0 * rng.uniform01() - 2.0;
      return Penalty::box(a, a + 2.0 * rng.uniform01());
    }
  }
  return Penalty::none();
}

inline void verify_prox(Recorder& rec, SampleStream& rng, const ProxOperator& prox) {
  rec.group("prox");
  for (PenaltyKind kind : {PenaltyKind::l1, PenaltyKind::group_l2, PenaltyKind::box}) {
    double worst = 0.0;
    for (int c = 0; c < 300; ++c) {
      const Penalty h = random_penalty(rng, kind);
      const double step = 0.1 + 1.9 * rng.uniform01();
      std::vector<double> v = random_vector(rng, 1 + rng.uniform_index(6), 2.0);
      if (c % 10 == 0) v.assign(v.size(), 0.0);
      std::vector<double> z = v;
      prox(h, step, z);
      worst = std::max(worst, prox_condition_violation(h, step, v, z));
    }
    rec.at_most(std::string("optimality condition holds for ") + to_string(kind), worst, 1e-12);
  }

  double grid_error = 0.0;
  for (PenaltyKind kind :
       {PenaltyKind::zero, PenaltyKind::l1, PenaltyKind::group_l2, PenaltyKind::box}) {
    for (int c = 0; c < 100; ++c) {
      const Penalty h = random_penalty(rng, kind);
      const double step = 0.1 + 1.9 * rng.uniform01();
      const double v = 6.0 * rng.uniform01() - 3.0;
      double z = v;
      prox(h, step, std::span<double>(&z, 1));
      grid_error = std::max(grid_error, std::abs(z - brute_force_prox(h, step, v)));
    }
  }
  rec.at_most("1-D prox agrees with grid search", grid_error, 1e-5);

  double firm = 0.0;
  for (int c = 0; c < 300; ++c) {
    const Penalty h = random_penalty(
        rng, static_cast<PenaltyKind>(1 + rng.uniform_index(3)));
    const double step = 0.1 + 1.9 * rng.uniform01();
    const std::size_t len = 1 + rng.uniform_index(6);
    const std::vector<double> v = random_vector(rng, len, 2.0);
    const std::vector<double> w = random_vector(rng, len, 2.0);
    std::vector<double> zv = v;
    std::vector<double> zw = w;
    prox(h, step, zv);
    prox(h, step, zw);
    double inner = 0.0;
    double dist = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      inner += (zv[j] - zw[j]) * (v[j] - w[j]);
      dist += (zv[j] - zw[j]) * (zv[j] - zw[j]);
    }
    firm = std::max(firm, dist - inner);
  }
  rec.at_most("firm non-expansiveness", firm, 1e-10);

  std::vector<double> v{3.0, -0.5, 0.0};
  prox(Penalty::l1(1.0), 1.0, v);
  rec.at_most("soft threshold of [3, -0.5, 0] at 1", max_abs_diff(v, std::vector{2.0, 0.0, 0.0}),
              0.0);
}

inline void verify_loss(Recorder& rec, SampleStream& rng) {
  rec.group("loss");
  double fd_error = 0.0;
  double convexity = 0.0;
  double smoothness = 0.0;
  for (LossKind kind : {LossKind::logistic, LossKind::squared}) {
    for (int instance = 0; instance < 5; ++instance) {
      const std::size_t p = 3 + rng.uniform_index(10);
      const Dataset data = random_dataset(rng, 10, p, 0.5, kind);
      const Loss loss{kind, 0.1};
      const SmoothnessInfo info = lipschitz_constant(data, loss);
      auto f_i = [&](std::size_t i, std::span<const double> x) {
        double sq = 0.0;
        for (double v : x) sq += v * v;
        return loss_scalar(kind, data.features.row(i).dot(x), data.labels[i]).value +
               0.5 * loss.lambda1 * sq;
      };
      auto grad_i = [&](std::size_t i, std::span<const double> x) {
        const RowView row = data.features.row(i);
        std::vector<double> g(x.begin(), x.end());
        for (double& v : g) v *= loss.lambda1;
        const double s = loss_scalar(kind, row.dot(x), data.labels[i]).derivative;
        for (std::size_t k = 0; k < row.size(); ++k) g[row.cols[k]] += s * row.vals[k];
        return g;
      };
      for (std::size_t i = 0; i < data.n_samples(); ++i) {
        std::vector<double> x = random_vector(rng, p);
        const std::vector<double> y = random_vector(rng, p);
        const std::vector<double> g = grad_i(i, x);
        double err = 0.0;
        double norm = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
          const double xj = x[j];
          x[j] = xj + 1e-6;
          const double up = f_i(i, x);
          x[j] = xj - 1e-6;
          const double down = f_i(i, x);
          x[j] = xj;
          const double fd = (up - down) / 2e-6;
          err += (fd - g[j]) * (fd - g[j]);
          norm += g[j] * g[j];
        }
        fd_error = std::max(fd_error, std::sqrt(err) / std::max(1.0, std::sqrt(norm)));

        double linear = 0.0;
        double dist = 0.0;
        const std::vector<double> gy = grad_i(i, y);
        double gdiff = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
          linear += g[j] * (y[j] - x[j]);
          dist += (y[j] - x[j]) * (y[j] - x[j]);
          gdiff += (gy[j] - g[j]) * (gy[j] - g[j]);
        }
        convexity = std::max(convexity, f_i(i, x) + linear - f_i(i, y));
        smoothness =
            std::max(smoothness, std::sqrt(gdiff) - info.per_sample_L[i] * std::sqrt(dist));
      }
    }
  }
  rec.at_most("gradient matches central differences (relative)", fd_error, 1e-5);
  rec.at_most("first-order convexity", convexity, 1e-10);
  rec.at_most("per-sample gradient Lipschitz bound", smoothness, 1e-12);

  const LossEval far = loss_scalar(LossKind::logistic, 50.0, 1.0);
  rec.at_most("logistic tail at margin 50 stays accurate",
              std::abs(far.value - std::exp(-50.0)) / std::exp(-50.0) +
                  std::abs(far.derivative + std::exp(-50.0)) / std::exp(-50.0),
              1e-12);
}

/// Sparse SAGA without a prox, written against dense vectors: the h = 0 reference.
inline void reference_sparse_saga_step(const Problem& problem, std::vector<double>& x,
                                       std::vector<double>& scalars, std::vector<double>& avg,
                                       std::size_t i, double gamma) {
  const Dataset& data = problem.data();
  const RowView row = data.features.row(i);
  const double n = static_cast<double>(data.n_samples());
  const double s = loss_scalar(problem.loss().kind, row.dot(x), data.labels[i]).derivative;
  const double diff = s - scalars[i];
  std::vector<double> a(x.size(), 0.0);
  for (std::size_t k = 0; k < row.size(); ++k) a[row.cols[k]] = row.vals[k];
  for (index_t b : problem.index().extended_support(i)) {
    const double d = problem.index().block_weight[b];
    for (index_t j : problem.partition().blocks[b]) {
      x[j] -= gamma * (diff * a[j] + d * (avg[j] + problem.loss().lambda1 * x[j]));
    }
  }
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row.vals[k] != 0.0) avg[row.cols[k]] += diff * row.vals[k] / n;
  }
  scalars[i] = s;
}

inline void verify_saga(Recorder& rec, SampleStream& rng, Fixtures& fx) {
  rec.group("saga");
  double unbiased = 0.0;
  for (int instance = 0; instance < 10; ++instance) {
    const std::size_t n = 5 + rng.uniform_index(20);
    const std::size_t p = 2 + rng.uniform_index(15);
    Dataset data = random_dataset(rng, n, p, 0.3);
    const BlockPartition part = random_partition(rng, p);
    const Problem problem(std::move(data), Loss{LossKind::logistic, 0.2}, Penalty::l1(0.1), part);
    GradientMemory memory(n, p);
    for (double& s : memory.scalars) s = rng.uniform01() - 0.5;
    resync_average(memory, problem.data());
    const std::vector<double> x = random_vector(rng, p);
    std::vector<double> mean(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const SparseVector v = sparse_gradient_estimate(problem, i, x, memory);
      for (std::size_t k = 0; k < v.coords.size(); ++k) mean[v.coords[k]] += v.values[k];
    }
    for (double& m : mean) m /= static_cast<double>(n);
    unbiased = std::max(unbiased,
                        max_abs_diff(mean, dense_gradient_oracle(problem.data(), problem.loss(), x)));
  }
  rec.at_most("mean of v_i is the full gradient", unbiased, 1e-12);

  // Single block: the sparse and dense updates must coincide step by step.
  double single_block = 0.0;
  double zero_penalty = 0.0;
  double writes_outside = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SampleStream data_rng(seed, 7);
    const Dataset data = random_dataset(data_rng, 40, 15, 0.2);
    const std::size_t n = data.n_samples();
    const std::size_t p = data.n_features();
    const Loss loss{LossKind::logistic, 1.0 / static_cast<double>(n)};
    {
      const Problem problem(data, loss, Penalty::l1(0.01), single_block_partition(p));
      const double gamma = 1.0 / (5.0 * problem.smoothness().L);
      std::vector<double> xs(p, 0.0);
      std::vector<double> xd(p, 0.0);
      GradientMemory ms(n, p);
      GradientMemory md(n, p);
      SpsWorkspace ws(p);
      SampleStream pick(seed, 0);
      for (std::size_t t = 0; t < 3 * n; ++t) {
        const std::size_t i = pick.uniform_index(n);
        sps_step(problem, xs, ms, i, gamma, ws);
        dense_saga_step(problem, xd, md, i, gamma, ws);
        single_block = std::max(single_block, max_abs_diff(xs, xd));
      }
    }
    {
      const Problem problem(data, loss, Penalty::none(), random_partition(data_rng, p));
      const double gamma = 1.0 / (5.0 * problem.smoothness().L);
      std::vector<double> xs(p, 0.0);
      std::vector<double> xr(p, 0.0);
      std::vector<double> scalars(n, 0.0);
      std::vector<double> avg(p, 0.0);
      GradientMemory ms(n, p);
      SpsWorkspace ws(p);
      SampleStream pick(seed, 0);
      for (std::size_t t = 0; t < 3 * n; ++t) {
        const std::size_t i = pick.uniform_index(n);
        sps_step(problem, xs, ms, i, gamma, ws);
        reference_sparse_saga_step(problem, xr, scalars, avg, i, gamma);
        zero_penalty = std::max(zero_penalty, max_abs_diff(xs, xr));
      }
    }
    {
      // Every step may only write the coordinates of its own extended support.
      const Problem problem(data, loss, Penalty::l1(0.01), random_partition(data_rng, p));
      const double gamma = 1.0 / (5.0 * problem.smoothness().L);
      std::vector<double> x = random_vector(data_rng, p);
      GradientMemory memory(n, p);
      SpsWorkspace ws(p);
      SampleStream pick(seed, 0);
      for (std::size_t t = 0; t < 3 * n; ++t) {
        const std::size_t i = pick.uniform_index(n);
        const std::vector<double> before = x;
        sps_step(problem, x, memory, i, gamma, ws);
        for (std::size_t j = 0; j < p; ++j) {
          const auto b = static_cast<index_t>(problem.partition().block_of[j]);
          if (!problem.index().contains(i, b) &&
              std::bit_cast<std::uint64_t>(x[j]) != std::bit_cast<std::uint64_t>(before[j])) {
            writes_outside += 1.0;
          }
        }
      }
    }
  }
  rec.at_most("single block partition reproduces dense SAGA", single_block, 1e-14);
  rec.at_most("zero penalty reproduces prox-free sparse SAGA", zero_penalty, 1e-14);
  rec.at_most("steps leave coordinates outside T_i bit-identical", writes_outside, 0.0);

  const Problem& problem = fx.problem();
  const Optimum& opt = fx.optimum();
  rec.at_most("fixed-point residual at the optimum",
              fixed_point_residual(problem, opt.x, 1.0 / (5.0 * problem.smoothness().L)), 1e-8);

  SolverConfig config;
  config.epochs = 150;
  config.seed = 1;
  const Trace trace = run_sequential(problem, config);
  const auto gaps = suboptimality(trace, opt.objective);
  rec.at_most("sequential suboptimality after 150 epochs", gaps.back(), 1e-10);
}

inline void verify_async(Recorder& rec, Fixtures& fx) {
  rec.group("async");
  {
    std::atomic<double> cell{0.0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < 8; ++t) {
      pool.emplace_back([&cell] {
        for (int k = 0; k < 100000; ++k) atomic_float_add(cell, 1.0);
      });
    }
    pool.clear();
    rec.at_most("8 x 1e5 contended atomic adds are exact", std::abs(cell.load() - 800000.0), 0.0);
  }

  const Problem& problem = fx.problem();
  const Optimum& opt = fx.optimum();
  {
    SolverConfig seq;
    seq.epochs = 20;
    seq.seed = 9;
    AsyncConfig async;
    static_cast<SolverConfig&>(async) = seq;
    async.threads = 1;
    rec.at_most("one worker reproduces the sequential run",
                max_abs_diff(run_sequential(problem, seq).final_x, run_async(problem, async).final_x),
                1e-14);
  }

  for (std::size_t threads : {2u, 4u}) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      AsyncConfig config;
      config.threads = threads;
      config.seed = seed;
      config.epochs = 300;
      config.stop_objective = opt.objective + 1e-8;
      const Trace trace = run_async(problem, config);
      const auto gaps = suboptimality(trace, opt.objective);
      worst = std::max(worst, *std::min_element(gaps.begin(), gaps.end()));
    }
    rec.at_most("worst of 10 runs with " + std::to_string(threads) + " workers reaches", worst,
                1e-8);
  }

  {
    std::vector<std::atomic<char>> sampled_blocks(problem.partition().n_blocks());
    AsyncConfig config;
    config.threads = 4;
    config.epochs = 5;
    config.seed = 3;
    config.observer = [&](std::size_t, std::size_t i) {
      for (index_t b : problem.index().extended_support(i)) sampled_blocks[b].store(1);
    };
    const Trace trace = run_async(problem, config);
    double outside = 0.0;
    for (std::size_t j = 0; j < problem.dimension(); ++j) {
      if (!sampled_blocks[problem.partition().block_of[j]].load() &&
          std::bit_cast<std::uint64_t>(trace.final_x[j]) != std::bit_cast<std::uint64_t>(0.0)) {
        outside += 1.0;
      }
    }
    rec.at_most("coordinates outside sampled supports stay untouched", outside, 0.0);
  }
}

inline void verify_fista(Recorder& rec, Fixtures& fx) {
  rec.group("fista");
  const Problem& problem = fx.problem();
  const Optimum& opt = fx.optimum();
  FistaConfig fista;
  fista.iterations = 5000;
  const double f_fista = problem.objective(run_fista(problem, fista).final_x);
  rec.at_most("suboptimality after 5000 iterations", f_fista - opt.objective, 1e-10);

  SolverConfig config;
  config.epochs = 300;
  config.seed = 4;
  const double f_sps = problem.objective(run_sequential(problem, config).final_x);
  const double f_dense = problem.objective(run_dense_saga(problem, config).final_x);
  const double spread = std::max({f_sps, f_dense, f_fista}) - std::min({f_sps, f_dense, f_fista});
  rec.at_most("sparse, dense and accelerated solvers agree on the objective", spread, 1e-9);
}

/// Envelope rate factor tightened by this much must be rejected by the same runs.
inline constexpr double envelope_tightening = 20.0;

inline void verify_envelope(Recorder& rec, Fixtures& fx) {
  rec.group("envelope");
  const Problem& problem = fx.problem();
  const Optimum& opt = fx.optimum();
  std::vector<Trace> runs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SolverConfig config;
    config.epochs = 100;
    config.seed = seed;
    config.reference_point = opt.x;
    runs.push_back(run_sequential(problem, config));
  }
  const double rho = sequential_rate(problem.n_samples(), problem.smoothness().kappa());
  const double c0 = initial_lyapunov(problem, opt.x);
  const EnvelopeReport report = rate_envelope_check(runs, rho, c0, 10.0);
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& p : report.points) worst = std::min(worst, p.margin_log10);
  rec.at_least("median distance within the linear envelope (log10 margin)", worst, 0.0);

  const EnvelopeReport tight = rate_envelope_check(runs, envelope_tightening * rho, c0, 10.0);
  rec.at_least("envelope with a 20x faster rate is rejected", tight.pass ? 0.0 : 1.0, 1.0);
}

}  // namespace detail

/// Runs the selected property groups. Unknown group names are rejected.
inline VerifyReport run_verify(const VerifyOptions& options = {}) {
  for (const auto& g : options.only) {
    const auto& all = verify_groups();
    if (std::find(all.begin(), all.end(), g) == all.end()) {
      throw InvalidArgument("unknown property group '" + g + "'");
    }
  }
  auto selected = [&](const char* g) {
    return options.only.empty() ||
           std::find(options.only.begin(), options.only.end(), g) != options.only.end();
  };

  VerifyReport report;
  detail::Recorder rec(report);
  detail::Fixtures fx(options);
  SampleStream rng(options.seed, 0);
  const auto start = std::chrono::steady_clock::now();
  if (selected("support")) detail::verify_support(rec, rng);
  if (selected("prox")) detail::verify_prox(rec, rng, options.prox);
  if (selected("loss")) detail::verify_loss(rec, rng);
  if (selected("saga")) detail::verify_saga(rec, rng, fx);
  if (selected("async")) detail::verify_async(rec, fx);
  if (selected("fista")) detail::verify_fista(rec, fx);
  if (selected("envelope")) detail::verify_envelope(rec, fx);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace proxsaga
