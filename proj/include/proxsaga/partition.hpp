#pragma once

// Block partitions of the coefficients and the per-sample extended supports.

#include <algorithm>
#include <charconv>
#include <istream>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "proxsaga/error.hpp"
#include "proxsaga/sparse_data.hpp"

namespace proxsaga {

/// A partition of {0..p-1} into blocks; `blocks[B]` is sorted.
struct BlockPartition {
  std::vector<index_t> block_of;
  std::vector<std::vector<index_t>> blocks;

  std::size_t dimension() const noexcept { return block_of.size(); }
  std::size_t n_blocks() const noexcept { return blocks.size(); }

  bool is_singleton() const noexcept { return blocks.size() == block_of.size(); }

  friend bool operator==(const BlockPartition&, const BlockPartition&) = default;
};

/// Builds a partition from explicit blocks, checking disjointness and coverage of 0..p-1.
inline BlockPartition make_partition(std::vector<std::vector<index_t>> blocks,
                                     std::size_t p) {
  if (p == 0) throw InvalidArgument("partition: dimension must be positive");
  constexpr index_t unassigned = std::numeric_limits<index_t>::max();
  BlockPartition part;
  part.block_of.assign(p, unassigned);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto& block = blocks[b];
    if (block.empty()) {
      throw InvalidArgument("partition: block " + std::to_string(b) + " is empty");
    }
    std::sort(block.begin(), block.end());
    for (index_t j : block) {
      if (j >= p) {
        throw InvalidArgument("partition: coordinate " + std::to_string(j) +
                              " out of range");
      }
      if (part.block_of[j] != unassigned) {
        throw InvalidArgument("partition: coordinate " + std::to_string(j) +
                              " appears in more than one block");
      }
      part.block_of[j] = static_cast<index_t>(b);
    }
  }
  const auto missing = std::find(part.block_of.begin(), part.block_of.end(), unassigned);
  if (missing != part.block_of.end()) {
    throw InvalidArgument("partition: coordinate " +
                          std::to_string(missing - part.block_of.begin()) +
                          " is not covered");
  }
  part.blocks = std::move(blocks);
  return part;
}

inline BlockPartition singleton_partition(std::size_t p) {
  if (p == 0) throw InvalidArgument("singleton_partition: p must be positive");
  BlockPartition part;
  part.block_of.resize(p);
  std::iota(part.block_of.begin(), part.block_of.end(), index_t{0});
  part.blocks.reserve(p);
  for (std::size_t j = 0; j < p; ++j) part.blocks.push_back({static_cast<index_t>(j)});
  return part;
}

inline BlockPartition single_block_partition(std::size_t p) {
  if (p == 0) throw InvalidArgument("single_block_partition: p must be positive");
  BlockPartition part;
  part.block_of.assign(p, 0);
  part.blocks.emplace_back(p);
  std::iota(part.blocks[0].begin(), part.blocks[0].end(), index_t{0});
  return part;
}

/// One block per line, whitespace-separated 0-based coordinate ids.
inline BlockPartition read_partition(std::istream& in, std::size_t p) {
  std::vector<std::vector<index_t>> blocks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::vector<index_t> block;
    std::string tok;
    while (tokens >> tok) {
      std::uint64_t j = 0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), j);
      if (ec != std::errc() || ptr != tok.data() + tok.size() ||
          j > std::numeric_limits<index_t>::max()) {
        throw ParseError(ParseErrorKind::malformed_token, line_no,
                         "'" + tok + "' is not a coordinate id");
      }
      block.push_back(static_cast<index_t>(j));
    }
    if (!block.empty()) blocks.push_back(std::move(block));
  }
  return make_partition(std::move(blocks), p);
}

enum class DeadBlockPolicy { reject, drop };

/// Extended supports T_i (CSR layout over block ids), block counts n_B,
/// weights d_B = n / n_B and the sparsity measure delta = max_B n_B / n.
struct SupportIndex {
  std::size_t n_samples = 0;
  std::vector<std::size_t> support_offsets{0};
  std::vector<index_t> support_blocks;
  std::vector<std::size_t> block_count;
  /// 0 for dropped blocks.
  std::vector<double> block_weight;
  std::vector<index_t> dropped_blocks;
  double delta = 0.0;

  std::span<const index_t> extended_support(std::size_t i) const noexcept {
    return std::span<const index_t>(support_blocks)
        .subspan(support_offsets[i], support_offsets[i + 1] - support_offsets[i]);
  }

  bool contains(std::size_t i, index_t block) const noexcept {
    const auto s = extended_support(i);
    return std::binary_search(s.begin(), s.end(), block);
  }
};

inline SupportIndex build_support_index(const CsrMatrix& features,
                                        const BlockPartition& partition,
                                        DeadBlockPolicy policy = DeadBlockPolicy::reject) {
  if (partition.dimension() != features.n_cols) {
    throw InvalidArgument("build_support_index: partition covers " +
                          std::to_string(partition.dimension()) +
                          " coordinates, data has " + std::to_string(features.n_cols));
  }
  if (features.n_rows == 0) throw InvalidArgument("build_support_index: no samples");

  SupportIndex index;
  index.n_samples = features.n_rows;
  index.block_count.assign(partition.n_blocks(), 0);
  // Row stamp per block avoids clearing a marker array for every row.
  std::vector<std::size_t> last_row(partition.n_blocks(), features.n_rows);
  std::vector<index_t> row_blocks;

  for (std::size_t i = 0; i < features.n_rows; ++i) {
    row_blocks.clear();
    for (index_t j : features.row(i).cols) {
      const index_t b = partition.block_of[j];
      if (last_row[b] != i) {
        last_row[b] = i;
        row_blocks.push_back(b);
      }
    }
    std::sort(row_blocks.begin(), row_blocks.end());
    for (index_t b : row_blocks) ++index.block_count[b];
    index.support_blocks.insert(index.support_blocks.end(), row_blocks.begin(),
                                row_blocks.end());
    index.support_offsets.push_back(index.support_blocks.size());
  }

  const double n = static_cast<double>(features.n_rows);
  index.block_weight.assign(partition.n_blocks(), 0.0);
  std::size_t max_count = 0;
  for (std::size_t b = 0; b < partition.n_blocks(); ++b) {
    const std::size_t count = index.block_count[b];
    if (count == 0) {
      if (policy == DeadBlockPolicy::reject) throw DeadBlockError(b);
      index.dropped_blocks.push_back(static_cast<index_t>(b));
      continue;
    }
    index.block_weight[b] = n / static_cast<double>(count);
    max_count = std::max(max_count, count);
  }
  index.delta = static_cast<double>(max_count) / n;
  return index;
}

}  // namespace proxsaga
