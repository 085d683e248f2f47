#include "neurodb/index.hpp"

#include <algorithm>
#include <functional>
#include <limits>

namespace neurodb::index {

PartitionIndex::PartitionIndex(std::size_t height, std::size_t d_pred,
                               std::vector<Split> splits)
    : height_(height), d_pred_(d_pred), splits_(std::move(splits)) {
  require(height_ < 31, "tree height too large");
  require(d_pred_ >= 1, "index needs d_pred >= 1");
  require(splits_.size() == leaf_count() - 1, "split count must equal 2^h - 1");
  for (const auto& s : splits_) require(s.dim < d_pred_, "split dimension out of range");
}

std::size_t PartitionIndex::locate_counted(QueryView q, std::size_t& comparisons) const {
  std::size_t node = 0;
  for (std::size_t level = 0; level < height_; ++level) {
    const Split& s = splits_[node];
    ++comparisons;
    node = 2 * node + (q[s.dim] <= s.value ? 1 : 2);
  }
  return node - (leaf_count() - 1);
}

void PartitionIndex::serialize(binary::Writer& out) const {
  out.u32(static_cast<std::uint32_t>(height_));
  out.u32(static_cast<std::uint32_t>(d_pred_));
  const std::size_t internal = splits_.size();
  std::function<void(std::size_t)> visit = [&](std::size_t node) {
    if (node >= internal) {
      out.u8(1);
      out.u32(static_cast<std::uint32_t>(node - internal));
      return;
    }
    out.u8(0);
    out.u32(splits_[node].dim);
    out.f64(splits_[node].value);
    visit(2 * node + 1);
    visit(2 * node + 2);
  };
  visit(0);
}

PartitionIndex PartitionIndex::deserialize(binary::Reader& in) {
  const auto height = in.u32();
  const auto d_pred = in.u32();
  if (height >= 31 || d_pred == 0) {
    throw LoadError(LoadError::Kind::Malformed, "implausible index header");
  }
  const std::size_t internal = (std::size_t{1} << height) - 1;
  std::vector<Split> splits(internal);
  std::function<void(std::size_t)> visit = [&](std::size_t node) {
    const auto tag = in.u8();
    if (node >= internal) {
      if (tag != 1 || in.u32() != node - internal) {
        throw LoadError(LoadError::Kind::Malformed, "index leaf out of place");
      }
      return;
    }
    if (tag != 0) throw LoadError(LoadError::Kind::Malformed, "index is not a perfect tree");
    splits[node].dim = in.u32();
    splits[node].value = in.f64();
    if (splits[node].dim >= d_pred) {
      throw LoadError(LoadError::Kind::Malformed, "split dimension out of range");
    }
    visit(2 * node + 1);
    visit(2 * node + 2);
  };
  visit(0);
  return PartitionIndex(height, d_pred, std::move(splits));
}

bool PartitionIndex::operator==(const PartitionIndex& other) const {
  if (height_ != other.height_ || d_pred_ != other.d_pred_) return false;
  for (std::size_t i = 0; i < splits_.size(); ++i) {
    if (splits_[i].dim != other.splits_[i].dim) return false;
    if (splits_[i].value != other.splits_[i].value) return false;
  }
  return true;
}

BuildResult build_index(const std::vector<QueryInstance>& queries, std::size_t height) {
  require(height < 31, "tree height too large");
  const std::size_t leaves = std::size_t{1} << height;
  if (queries.size() < leaves) {
    throw BuildError("index of height " + std::to_string(height) + " needs at least " +
                         std::to_string(leaves) + " queries, got " +
                         std::to_string(queries.size()),
                     -1);
  }
  const std::size_t d_pred = queries.front().size();
  require(d_pred >= 1, "queries must have at least one dimension");
  for (const auto& q : queries) require(q.size() == d_pred, "queries have differing lengths");

  std::vector<Split> splits(leaves - 1);
  BuildResult result;
  result.leaf_members.resize(leaves);

  std::vector<std::size_t> all(queries.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  std::function<void(std::size_t, std::vector<std::size_t>, std::size_t, std::size_t)> grow =
      [&](std::size_t node, std::vector<std::size_t> members, std::size_t h, std::size_t dim) {
        if (h == 0) {
          const std::size_t leaf = node - (leaves - 1);
          if (members.empty()) {
            throw BuildError("leaf " + std::to_string(leaf) +
                                 " received no construction queries (too many duplicates "
                                 "or too few queries for the requested height)",
                             static_cast<int>(leaf));
          }
          result.leaf_members[leaf] = std::move(members);
          return;
        }
        if (members.empty()) {
          // descend so the error names the first empty leaf below this node
          grow(2 * node + 1, {}, h - 1, (dim + 1) % d_pred);
          return;
        }
        std::vector<double> keys(members.size());
        for (std::size_t i = 0; i < members.size(); ++i) keys[i] = queries[members[i]][dim];
        const auto mid = keys.begin() + static_cast<std::ptrdiff_t>((keys.size() - 1) / 2);
        std::nth_element(keys.begin(), mid, keys.end());
        const double median = *mid;
        splits[node] = {static_cast<std::uint32_t>(dim), median};

        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (auto m : members) (queries[m][dim] <= median ? left : right).push_back(m);
        members.clear();
        members.shrink_to_fit();
        const std::size_t next = (dim + 1) % d_pred;
        grow(2 * node + 1, std::move(left), h - 1, next);
        grow(2 * node + 2, std::move(right), h - 1, next);
      };
  grow(0, std::move(all), height, 0);
  result.index = PartitionIndex(height, d_pred, std::move(splits));
  return result;
}

std::size_t choose_height(std::size_t n, std::size_t capacity) {
  require(n >= 1 && capacity >= 1, "choose_height needs n >= 1 and c >= 1");
  std::size_t h = 0;
  std::size_t reach = capacity;
  while (reach < n) {
    ++h;
    if (reach > std::numeric_limits<std::size_t>::max() / 2) break;
    reach *= 2;
  }
  return h;
}

}  // namespace neurodb::index
