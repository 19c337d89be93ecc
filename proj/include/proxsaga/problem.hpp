#pragma once

// A composite problem min f(x) + h(x) together with the derived index and constants.

#include <memory>
#include <span>
#include <utility>

#include "proxsaga/loss.hpp"
#include "proxsaga/partition.hpp"
#include "proxsaga/penalty.hpp"
#include "proxsaga/sparse_data.hpp"

namespace proxsaga {

class Problem {
 public:
  Problem(Dataset data, Loss loss, Penalty penalty, BlockPartition partition,
          DeadBlockPolicy policy = DeadBlockPolicy::reject)
      : data_(std::make_shared<const Dataset>(std::move(data))),
        loss_(loss),
        penalty_(penalty),
        partition_(std::move(partition)) {
    data_->validate();
    validate_labels(*data_, loss_);
    index_ = build_support_index(data_->features, partition_, policy);
    smoothness_ = lipschitz_constant(*data_, loss_);
  }

  /// Singleton blocks: the natural partition for coordinatewise penalties.
  static Problem separable(Dataset data, Loss loss, Penalty penalty) {
    const std::size_t p = data.n_features();
    return Problem(std::move(data), loss, penalty, singleton_partition(p));
  }

  const Dataset& data() const noexcept { return *data_; }
  const Loss& loss() const noexcept { return loss_; }
  const Penalty& penalty() const noexcept { return penalty_; }
  const BlockPartition& partition() const noexcept { return partition_; }
  const SupportIndex& index() const noexcept { return index_; }
  const SmoothnessInfo& smoothness() const noexcept { return smoothness_; }

  std::size_t n_samples() const noexcept { return data_->n_samples(); }
  std::size_t dimension() const noexcept { return data_->n_features(); }

  double objective(std::span<const double> x) const {
    return full_objective(*data_, loss_, penalty_, partition_, x);
  }

 private:
  std::shared_ptr<const Dataset> data_;
  Loss loss_;
  Penalty penalty_;
  BlockPartition partition_;
  SupportIndex index_;
  SmoothnessInfo smoothness_;
};

}  // namespace proxsaga
