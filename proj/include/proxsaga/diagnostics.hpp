#pragma once

// Suboptimality, rate envelopes, independent oracles and the cached optimum.

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proxsaga/error.hpp"
#include "proxsaga/problem.hpp"
#include "proxsaga/saga.hpp"

namespace proxsaga {

inline constexpr double stale_optimum_slack = 1e-12;

/// objective - optimum at every checkpoint, clamped at 0 within the slack.
inline std::vector<double> suboptimality(const Trace& trace, double optimum_objective) {
  std::vector<double> out;
  out.reserve(trace.checkpoints.size());
  for (const Checkpoint& c : trace.checkpoints) {
    const double gap = c.objective - optimum_objective;
    if (gap < -stale_optimum_slack) {
      throw StaleOptimumError("checkpoint at iteration " + std::to_string(c.iterations) +
                              " is below the cached optimum by " + std::to_string(-gap));
    }
    out.push_back(std::max(gap, 0.0));
  }
  return out;
}

/// Linear rate factor of sequential SAGA, rho = (1/5) min(1/n, a/kappa), for step a/(5L).
inline double sequential_rate(std::size_t n, double kappa, double a = 1.0) {
  return 0.2 * std::min(1.0 / static_cast<double>(n), a / kappa);
}

/// C0 = ||x0 - x*||^2 + (1/(5 L^2)) sum_i ||alpha_i^0 - grad f_i(x*)||^2 for x0 = 0 and
/// alpha^0 = 0, with grad f_i including the lambda1 x term.
inline double initial_lyapunov(const Problem& problem, std::span<const double> xstar) {
  const Dataset& data = problem.data();
  const double lambda1 = problem.loss().lambda1;
  double xstar_sq = 0.0;
  for (double v : xstar) xstar_sq += v * v;
  double grad_sum = 0.0;
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    const RowView row = data.features.row(i);
    const double s = loss_derivative(problem.loss().kind, row.dot(xstar), data.labels[i]);
    // ||s a_i + lambda1 x*||^2 = s^2 ||a_i||^2 + 2 s lambda1 <a_i, x*> + lambda1^2 ||x*||^2
    grad_sum += s * s * row.squared_norm() + 2.0 * s * lambda1 * row.dot(xstar) +
                lambda1 * lambda1 * xstar_sq;
  }
  const double L = problem.smoothness().L;
  return xstar_sq + grad_sum / (5.0 * L * L);
}

struct EnvelopePoint {
  std::size_t iterations = 0;
  double median_distance_sq = 0.0;
  double bound = 0.0;
  bool pass = false;
  /// log10(bound / median); positive means inside the envelope.
  double margin_log10 = 0.0;
};

struct EnvelopeReport {
  std::vector<EnvelopePoint> points;
  bool pass = true;
};

inline double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  return 0.5 * (upper + *std::max_element(values.begin(), values.begin() + mid));
}

/// Checks median over runs of ||x_t - x*||^2 <= (1 - rho)^t C0 slack at every checkpoint.
/// Each run must carry distance-instrumented checkpoints at the same iterations.
inline EnvelopeReport rate_envelope_check(const std::vector<Trace>& runs, double rho,
                                          double c0, double slack) {
  if (!(rho > 0.0 && rho < 1.0)) throw InvalidArgument("rate_envelope_check: rho must lie in (0,1)");
  if (runs.empty()) throw InvalidArgument("rate_envelope_check: no runs");
  EnvelopeReport report;
  const std::size_t points = runs.front().checkpoints.size();
  for (std::size_t k = 0; k < points; ++k) {
    std::vector<double> distances;
    const std::size_t t = runs.front().checkpoints[k].iterations;
    for (const Trace& run : runs) {
      if (run.checkpoints.size() <= k || run.checkpoints[k].iterations != t ||
          !run.checkpoints[k].distance_sq) {
        throw InvalidArgument("rate_envelope_check: runs are not aligned or not instrumented");
      }
      distances.push_back(*run.checkpoints[k].distance_sq);
    }
    EnvelopePoint point;
    point.iterations = t;
    point.median_distance_sq = median(distances);
    point.bound = std::exp(static_cast<double>(t) * std::log1p(-rho)) * c0 * slack;
    point.pass = point.median_distance_sq <= point.bound;
    point.margin_log10 = std::log10(point.bound) -
                         std::log10(std::max(point.median_distance_sq,
                                             std::numeric_limits<double>::min()));
    report.pass = report.pass && point.pass;
    report.points.push_back(point);
  }
  return report;
}

inline nlohmann::json to_json(const EnvelopeReport& report) {
  nlohmann::json j;
  j["pass"] = report.pass;
  auto& points = j["checkpoints"] = nlohmann::json::array();
  for (const auto& p : report.points) {
    points.push_back({{"iterations", p.iterations},
                      {"median_distance_sq", p.median_distance_sq},
                      {"bound", p.bound},
                      {"pass", p.pass},
                      {"margin_log10", p.margin_log10}});
  }
  return j;
}

/// argmin over a uniform grid of h(z) + (v - z)^2 / (2 gamma) for a 1-D penalty.
/// The grid spans [v - radius, v + radius] with the given spacing and also contains z = 0
/// and the box bounds so kinks are representable exactly.
inline double brute_force_prox(const Penalty& h, double gamma, double v, double spacing = 1e-6,
                               std::optional<double> radius = std::nullopt) {
  if (h.kind == PenaltyKind::group_l2) {
    // A 1-D group norm is lambda |z|.
    return brute_force_prox(Penalty::l1(h.strength), gamma, v, spacing, radius);
  }
  const double r = radius.value_or(std::abs(v) + gamma * h.strength +
                                   (h.kind == PenaltyKind::box
                                        ? std::max(std::abs(h.lo), std::abs(h.hi))
                                        : 0.0) + 1.0);
  auto objective = [&](double z) {
    const double one[1] = {z};
    return block_value(h, one) + (v - z) * (v - z) / (2.0 * gamma);
  };
  double best = v;
  double best_value = objective(v);
  auto consider = [&](double z) {
    const double value = objective(z);
    if (value < best_value) {
      best_value = value;
      best = z;
    }
  };
  // The objective is convex, so the minimizer lies within one coarse cell of the best
  // coarse point; refine there at full resolution.
  const double coarse = spacing * 1000.0;
  const auto coarse_steps = static_cast<long long>(std::ceil(r / coarse));
  for (long long k = -coarse_steps; k <= coarse_steps; ++k) consider(v + k * coarse);
  consider(0.0);
  if (h.kind == PenaltyKind::box) {
    consider(h.lo);
    consider(h.hi);
  }
  const double centre = best;
  for (long long k = -1000; k <= 1000; ++k) consider(centre + k * spacing);
  return best;
}

/// Dense, index-free reference for (1/n) sum_i grad f_i(x) with the lambda1 term.
inline std::vector<double> dense_gradient_oracle(const Dataset& data, const Loss& loss,
                                                 std::span<const double> x) {
  const std::size_t n = data.n_samples();
  const std::size_t p = data.n_features();
  std::vector<double> grad(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> a(p, 0.0);
    const RowView row = data.features.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) a[row.cols[k]] = row.vals[k];
    double z = 0.0;
    for (std::size_t j = 0; j < p; ++j) z += a[j] * x[j];
    const double s = loss_scalar(loss.kind, z, data.labels[i]).derivative;
    for (std::size_t j = 0; j < p; ++j) grad[j] += (s * a[j] + loss.lambda1 * x[j]) / static_cast<double>(n);
  }
  return grad;
}

/// Hex SHA-256 of a byte string.
inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < length; ++k) {
    out.push_back(hex[digest[k] >> 4]);
    out.push_back(hex[digest[k] & 0xf]);
  }
  return out;
}

namespace detail {

template <class T>
void append_bytes(std::string& out, std::span<const T> values) {
  out.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
}

inline void append_scalar(std::string& out, double v) {
  append_bytes(out, std::span<const double>(&v, 1));
}

}  // namespace detail

/// SHA-256 over the dataset bytes, loss, penalty, lambdas and partition.
inline std::string problem_hash(const Problem& problem) {
  std::string bytes;
  const Dataset& data = problem.data();
  const std::uint64_t dims[2] = {data.n_samples(), data.n_features()};
  detail::append_bytes(bytes, std::span<const std::uint64_t>(dims));
  detail::append_bytes(bytes, std::span<const std::size_t>(data.features.row_offsets));
  detail::append_bytes(bytes, std::span<const index_t>(data.features.col_indices));
  detail::append_bytes(bytes, std::span<const double>(data.features.values));
  detail::append_bytes(bytes, std::span<const double>(data.labels));
  bytes += to_string(problem.loss().kind);
  detail::append_scalar(bytes, problem.loss().lambda1);
  bytes += to_string(problem.penalty().kind);
  detail::append_scalar(bytes, problem.penalty().strength);
  detail::append_scalar(bytes, problem.penalty().lo);
  detail::append_scalar(bytes, problem.penalty().hi);
  for (const auto& block : problem.partition().blocks) {
    detail::append_bytes(bytes, std::span<const index_t>(block));
    bytes.push_back('|');
  }
  return sha256_hex(bytes);
}

struct Optimum {
  std::vector<double> x;
  double objective = 0.0;
  std::string hash;
  std::string method;
  std::size_t epochs = 0;
  bool from_cache = false;
};

struct OptimumOptions {
  std::size_t epochs = 5000;
  /// Dense SAGA is used up to this many coefficients, Sparse Proximal SAGA above it.
  std::size_t dense_dimension_limit = 1000;
  std::uint64_t seed = 12345;
  /// Cache directory; empty disables caching.
  std::string cache_dir;
};

/// Cache directory from PROXSAGA_CACHE_DIR, defaulting to ".proxsaga-cache".
inline std::string default_cache_dir() {
  if (const char* env = std::getenv("PROXSAGA_CACHE_DIR"); env && *env) return env;
  return ".proxsaga-cache";
}

/// High-precision reference solution: a long SAGA run at step 1/(5L), cached on disk under
/// the problem hash. A cached entry is used only if its hash and settings match.
inline Optimum compute_optimum(const Problem& problem, const OptimumOptions& options = {}) {
  const bool dense = problem.dimension() <= options.dense_dimension_limit;
  const std::string method = dense ? "dense_saga" : "sparse_prox_saga";
  const std::string hash = problem_hash(problem);
  std::filesystem::path file;
  if (!options.cache_dir.empty()) {
    file = std::filesystem::path(options.cache_dir) / ("optimum-" + hash + ".json");
    std::ifstream in(file);
    if (in) {
      try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("hash") == hash && j.at("method") == method &&
            j.at("epochs") == options.epochs && j.at("seed") == options.seed) {
          Optimum opt;
          opt.x = j.at("x").get<std::vector<double>>();
          opt.objective = j.at("objective").get<double>();
          opt.hash = hash;
          opt.method = method;
          opt.epochs = options.epochs;
          opt.from_cache = true;
          if (opt.x.size() == problem.dimension()) return opt;
        }
      } catch (const nlohmann::json::exception&) {
        // Unreadable cache entries are recomputed and overwritten.
      }
    }
  }

  SolverConfig config;
  config.epochs = options.epochs;
  config.seed = options.seed;
  config.checkpoint_every = options.epochs * problem.n_samples();
  Trace trace = dense ? run_dense_saga(problem, config) : run_sequential(problem, config);

  Optimum opt;
  opt.x = std::move(trace.final_x);
  opt.objective = problem.objective(opt.x);
  opt.hash = hash;
  opt.method = method;
  opt.epochs = options.epochs;

  if (!file.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(file.parent_path(), ec);
    nlohmann::json j{{"hash", hash},         {"method", method},
                     {"epochs", options.epochs}, {"seed", options.seed},
                     {"objective", opt.objective}, {"x", opt.x}};
    const auto tmp = file.string() + ".tmp";
    std::ofstream out(tmp);
    if (out) {
      out << j.dump();
      out.close();
      std::filesystem::rename(tmp, file, ec);
    }
  }
  return opt;
}

}  // namespace proxsaga
