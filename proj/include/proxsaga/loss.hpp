#pragma once

// Losses of linearly parametrized models f_i(x) = l(a_i^T x, b_i) + (lambda1/2)||x||^2.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "proxsaga/error.hpp"
#include "proxsaga/partition.hpp"
#include "proxsaga/penalty.hpp"
#include "proxsaga/sparse_data.hpp"

namespace proxsaga {

enum class LossKind { logistic, squared };

inline const char* to_string(LossKind kind) {
  return kind == LossKind::logistic ? "logistic" : "squared";
}

struct Loss {
  LossKind kind = LossKind::logistic;
  /// Weight of the (lambda1/2)||x||^2 term; gives lambda1-strong convexity.
  double lambda1 = 0.0;

  friend bool operator==(const Loss&, const Loss&) = default;
};

struct LossEval {
  double value;
  double derivative;
};

/// Upper bound on the scalar second derivative of the loss.
constexpr double curvature_bound(LossKind kind) noexcept {
  return kind == LossKind::logistic ? 0.25 : 1.0;
}

/// l'(z, b) only; the hot path of every solver.
inline double loss_derivative(LossKind kind, double z, double b) noexcept {
  if (kind == LossKind::squared) return z - b;
  // -b * sigmoid(-b z), with the exponential taken of a non-positive argument.
  const double t = -b * z;
  const double sigma = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t))
                                 : std::exp(t) / (1.0 + std::exp(t));
  return -b * sigma;
}

inline LossEval loss_scalar(LossKind kind, double z, double b) noexcept {
  if (kind == LossKind::squared) {
    const double r = z - b;
    return {0.5 * r * r, r};
  }
  const double t = -b * z;
  // log(1 + e^t) = t + log1p(e^-t) for t > 0.
  const double value = t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
  return {value, loss_derivative(kind, z, b)};
}

inline void validate_labels(const Dataset& data, const Loss& loss) {
  if (loss.kind == LossKind::logistic && !data.has_binary_labels()) {
    throw InvalidArgument("logistic loss requires labels in {-1, +1}");
  }
  if (!(loss.lambda1 >= 0.0) || !std::isfinite(loss.lambda1)) {
    throw InvalidArgument("lambda1 must be finite and nonnegative");
  }
}

struct SmoothnessInfo {
  /// max_i per_sample_L[i]
  double L = 0.0;
  std::vector<double> per_sample_L;
  /// Certified strong convexity lower bound (lambda1).
  double mu = 0.0;

  double kappa() const noexcept { return mu > 0.0 ? L / mu : INFINITY; }
};

/// per_sample_L[i] = c ||a_i||^2 + lambda1, c = 1/4 (logistic) or 1 (squared).
inline SmoothnessInfo lipschitz_constant(const Dataset& data, const Loss& loss) {
  if (data.n_samples() == 0) throw InvalidArgument("lipschitz_constant: empty dataset");
  SmoothnessInfo info;
  info.mu = loss.lambda1;
  info.per_sample_L.resize(data.n_samples());
  const double c = curvature_bound(loss.kind);
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    info.per_sample_L[i] = c * data.features.row(i).squared_norm() + loss.lambda1;
    info.L = std::max(info.L, info.per_sample_L[i]);
  }
  return info;
}

/// (1/n) sum_i l(a_i^T x, b_i) + (lambda1/2)||x||^2.
inline double smooth_objective(const Dataset& data, const Loss& loss,
                               std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    acc += loss_scalar(loss.kind, data.features.row(i).dot(x), data.labels[i]).value;
  }
  double norm_sq = 0.0;
  for (double v : x) norm_sq += v * v;
  return acc / static_cast<double>(data.n_samples()) + 0.5 * loss.lambda1 * norm_sq;
}

/// Gradient of the smooth part: (1/n) sum_i l'(a_i^T x) a_i + lambda1 x.
inline void smooth_gradient(const Dataset& data, const Loss& loss,
                            std::span<const double> x, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    const RowView row = data.features.row(i);
    const double s = loss_derivative(loss.kind, row.dot(x), data.labels[i]);
    for (std::size_t k = 0; k < row.size(); ++k) out[row.cols[k]] += s * row.vals[k];
  }
  const double inv_n = 1.0 / static_cast<double>(data.n_samples());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = out[j] * inv_n + loss.lambda1 * x[j];
}

/// f(x) + h(x).
inline double full_objective(const Dataset& data, const Loss& loss, const Penalty& h,
                             const BlockPartition& partition, std::span<const double> x) {
  return smooth_objective(data, loss, x) + penalty_value(h, x, partition);
}

}  // namespace proxsaga
