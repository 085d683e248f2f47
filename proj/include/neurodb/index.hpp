#pragma once

// Perfect kd-tree over sampled query instances. Each of the 2^h leaves is a
// partition of query space served by its own model.

#include <cstdint>
#include <vector>

#include "neurodb/binary.hpp"
#include "neurodb/core.hpp"

namespace neurodb::index {

struct Split {
  std::uint32_t dim = 0;
  double value = 0.0;
};

class PartitionIndex {
 public:
  PartitionIndex() = default;
  /// Internal nodes in heap order (children of i are 2i+1 and 2i+2).
  PartitionIndex(std::size_t height, std::size_t d_pred, std::vector<Split> splits);

  std::size_t height() const { return height_; }
  std::size_t d_pred() const { return d_pred_; }
  std::size_t leaf_count() const { return std::size_t{1} << height_; }
  const std::vector<Split>& splits() const { return splits_; }

  /// Root-to-leaf descent: left iff q[dim] <= value. Leaves are numbered
  /// 0..2^h-1 from left to right.
  std::size_t locate(QueryView q) const {
    std::size_t node = 0;
    for (std::size_t level = 0; level < height_; ++level) {
      const Split& s = splits_[node];
      node = 2 * node + (q[s.dim] <= s.value ? 1 : 2);
    }
    return node - (leaf_count() - 1);
  }

  /// locate() that also tallies the comparisons it made.
  std::size_t locate_counted(QueryView q, std::size_t& comparisons) const;

  /// Preorder node list: tag 0 = internal (dim u32, value f64), tag 1 =
  /// leaf (id u32).
  void serialize(binary::Writer& out) const;
  static PartitionIndex deserialize(binary::Reader& in);

  bool operator==(const PartitionIndex&) const;

 private:
  std::size_t height_ = 0;
  std::size_t d_pred_ = 0;
  std::vector<Split> splits_;
};

struct BuildResult {
  PartitionIndex index;
  /// Per leaf, positions into the construction query sequence.
  std::vector<std::vector<std::size_t>> leaf_members;
};

/// Recursive median split starting at dimension 0 and cycling through
/// dimensions. The split value is the lower median of the node's subset;
/// queries equal to it go left.
BuildResult build_index(const std::vector<QueryInstance>& queries, std::size_t height);

/// Smallest h >= 0 with c * 2^h >= n.
std::size_t choose_height(std::size_t n, std::size_t capacity);

}  // namespace neurodb::index
