#pragma once

// Block-separable penalties h and their proximal operators.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "proxsaga/error.hpp"
#include "proxsaga/partition.hpp"

namespace proxsaga {

enum class PenaltyKind { zero, l1, group_l2, box };

inline const char* to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::zero: return "zero";
    case PenaltyKind::l1: return "l1";
    case PenaltyKind::group_l2: return "group_l2";
    case PenaltyKind::box: return "box";
  }
  return "unknown";
}

/// h(x) = sum over blocks of h_B(x_B). `strength` is the l1 / group weight.
struct Penalty {
  PenaltyKind kind = PenaltyKind::zero;
  double strength = 0.0;
  double lo = 0.0;
  double hi = 0.0;

  static Penalty none() { return {}; }
  static Penalty l1(double lambda) { return checked({PenaltyKind::l1, lambda, 0, 0}); }
  static Penalty group_l2(double lambda) {
    return checked({PenaltyKind::group_l2, lambda, 0, 0});
  }
  static Penalty box(double lo, double hi) {
    return checked({PenaltyKind::box, 0.0, lo, hi});
  }

  /// True when the prox acts independently on each coordinate.
  bool coordinatewise() const noexcept { return kind != PenaltyKind::group_l2; }

  friend bool operator==(const Penalty&, const Penalty&) = default;

 private:
  static Penalty checked(Penalty h) {
    if (!(h.strength >= 0.0) || !std::isfinite(h.strength)) {
      throw InvalidArgument("penalty strength must be finite and nonnegative");
    }
    if (h.kind == PenaltyKind::box && !(h.lo <= h.hi)) {
      throw InvalidArgument("box penalty requires lo <= hi");
    }
    return h;
  }
};

/// Step of a proximal map: the effective step is gamma * scale (scale = d_B for phi_i).
struct ProxStep {
  double gamma = 1.0;
  double scale = 1.0;

  double effective() const noexcept { return gamma * scale; }

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
      throw InvalidArgument("prox step gamma must be positive");
    }
    if (!(scale >= 1.0) || !std::isfinite(scale)) {
      throw InvalidArgument("prox step scale must be >= 1");
    }
  }
};

inline double soft_threshold(double v, double threshold) noexcept {
  if (v > threshold) return v - threshold;
  if (v < -threshold) return v + threshold;
  return 0.0;
}

/// h_B evaluated on the values of one block.
inline double block_value(const Penalty& h, std::span<const double> block) noexcept {
  switch (h.kind) {
    case PenaltyKind::zero: return 0.0;
    case PenaltyKind::l1: {
      double acc = 0.0;
      for (double v : block) acc += std::abs(v);
      return h.strength * acc;
    }
    case PenaltyKind::group_l2: {
      double acc = 0.0;
      for (double v : block) acc += v * v;
      return h.strength * std::sqrt(acc);
    }
    case PenaltyKind::box:
      for (double v : block) {
        if (!(v >= h.lo && v <= h.hi)) return std::numeric_limits<double>::infinity();
      }
      return 0.0;
  }
  return 0.0;
}

namespace detail {

inline double gather_block_value(const Penalty& h, std::span<const double> x,
                                 std::span<const index_t> coords,
                                 std::vector<double>& scratch) {
  scratch.resize(coords.size());
  for (std::size_t k = 0; k < coords.size(); ++k) scratch[k] = x[coords[k]];
  return block_value(h, scratch);
}

}  // namespace detail

/// h(x); +inf for a box penalty outside its bounds.
inline double penalty_value(const Penalty& h, std::span<const double> x,
                            const BlockPartition& partition) {
  if (h.coordinatewise()) return block_value(h, x);
  double acc = 0.0;
  std::vector<double> scratch;
  for (const auto& block : partition.blocks) {
    acc += detail::gather_block_value(h, x, block, scratch);
  }
  return acc;
}

/// Prox of a coordinatewise penalty applied to one value; no validation.
inline double prox_coordinate(const Penalty& h, double effective_step, double v) noexcept {
  switch (h.kind) {
    case PenaltyKind::zero: return v;
    case PenaltyKind::l1: return soft_threshold(v, effective_step * h.strength);
    case PenaltyKind::box: return std::clamp(v, h.lo, h.hi);
    case PenaltyKind::group_l2: break;
  }
  return v;
}

/// In-place prox of one block's values; no validation.
inline void prox_block_unchecked(const Penalty& h, double effective_step,
                                 std::span<double> v) noexcept {
  if (h.kind == PenaltyKind::group_l2) {
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    const double norm = std::sqrt(norm_sq);
    const double threshold = effective_step * h.strength;
    if (norm <= threshold) {
      std::fill(v.begin(), v.end(), 0.0);
      return;
    }
    const double shrink = 1.0 - threshold / norm;
    for (double& x : v) x *= shrink;
    return;
  }
  for (double& x : v) x = prox_coordinate(h, effective_step, x);
}

/// prox_{gamma*scale*h_B}(v), in place. Throws on a bad step or non-finite input.
inline void prox_block(const Penalty& h, const ProxStep& step, std::span<double> v) {
  step.validate();
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidArgument("prox_block: non-finite input");
  }
  prox_block_unchecked(h, step.effective(), v);
}

namespace detail {

inline void prox_gathered(const Penalty& h, double effective_step, std::span<double> x,
                          std::span<const index_t> coords, std::vector<double>& scratch) {
  if (h.coordinatewise()) {
    for (index_t j : coords) x[j] = prox_coordinate(h, effective_step, x[j]);
    return;
  }
  scratch.resize(coords.size());
  for (std::size_t k = 0; k < coords.size(); ++k) scratch[k] = x[coords[k]];
  prox_block_unchecked(h, effective_step, scratch);
  for (std::size_t k = 0; k < coords.size(); ++k) x[coords[k]] = scratch[k];
}

}  // namespace detail

/// Full prox_{gamma h}(v) over every block, in place.
inline void prox_full(const Penalty& h, const BlockPartition& partition, double gamma,
                      std::span<double> v) {
  ProxStep{gamma, 1.0}.validate();
  if (h.coordinatewise()) {
    for (double& x : v) x = prox_coordinate(h, gamma, x);
    return;
  }
  std::vector<double> scratch;
  for (const auto& block : partition.blocks) {
    detail::prox_gathered(h, gamma, v, block, scratch);
  }
}

/// prox_{gamma phi_i}(v), in place: blocks in T_i use step d_B*gamma, others are untouched.
inline void prox_phi(const Penalty& h, const BlockPartition& partition,
                     const SupportIndex& index, std::size_t i, double gamma,
                     std::span<double> v) {
  ProxStep{gamma, 1.0}.validate();
  std::vector<double> scratch;
  for (index_t b : index.extended_support(i)) {
    const std::span<const index_t> coords = partition.blocks[b];
    for (index_t j : coords) {
      if (!std::isfinite(v[j])) throw InvalidArgument("prox_phi: non-finite input");
    }
    detail::prox_gathered(h, gamma * index.block_weight[b], v, coords, scratch);
  }
}

/// phi_i(x) = sum over B in T_i of d_B h_B(x_B).
inline double phi_value(const Penalty& h, const BlockPartition& partition,
                        const SupportIndex& index, std::size_t i,
                        std::span<const double> x) {
  double acc = 0.0;
  std::vector<double> scratch;
  for (index_t b : index.extended_support(i)) {
    acc += index.block_weight[b] *
           detail::gather_block_value(h, x, partition.blocks[b], scratch);
  }
  return acc;
}

}  // namespace proxsaga
