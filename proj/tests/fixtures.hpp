#pragma once

// The l1-logistic acceptance instance (n=200, p=50, density 0.1, seed 42) and its optimum,
// built once per process.

#include "proxsaga/proxsaga.hpp"

namespace fixtures {

inline const proxsaga::RegularizedProblem& acceptance() {
  static const proxsaga::RegularizedProblem instance =
      proxsaga::make_sparse_l1_problem(proxsaga::reference_instance_spec(), 0.1);
  return instance;
}

inline const proxsaga::Problem& acceptance_problem() { return acceptance().problem; }

inline const proxsaga::Optimum& acceptance_optimum() {
  static const proxsaga::Optimum optimum = [] {
    proxsaga::OptimumOptions options;
    options.cache_dir = proxsaga::default_cache_dir();
    return proxsaga::compute_optimum(acceptance_problem(), options);
  }();
  return optimum;
}

/// Dataset from explicit (column, value) rows.
inline proxsaga::Dataset make_dataset(
    const std::vector<std::vector<std::pair<proxsaga::index_t, double>>>& rows,
    std::vector<double> labels, std::size_t p) {
  proxsaga::CsrBuilder builder(p);
  for (const auto& row : rows) {
    for (auto [j, v] : row) builder.push(j, v);
    builder.end_row();
  }
  proxsaga::Dataset data;
  data.features = std::move(builder).finish();
  data.features.n_cols = p;
  data.labels = std::move(labels);
  return data;
}

}  // namespace fixtures
