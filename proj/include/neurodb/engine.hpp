#pragma once

// NeuroEngine: a kd-tree over query space whose leaves each own a trained
// network. Answering a query is one root-to-leaf descent plus one forward
// pass; the dataset is not consulted.

#include <cstdint>
#include <string>
#include <vector>

#include "neurodb/core.hpp"
#include "neurodb/index.hpp"
#include "neurodb/mlp.hpp"

namespace neurodb::engine {

struct BuildOptions {
  std::size_t height = 4;
  mlp::Architecture architecture;  // input/output dims are filled from the spec
  mlp::TrainConfig train;
  std::size_t threads = 1;
};

struct BuildMetadata {
  std::vector<std::size_t> leaf_training_sizes;
  std::vector<std::uint64_t> leaf_seeds;
  std::vector<double> leaf_train_seconds;  // not persisted
  mlp::Architecture architecture;
  mlp::TrainConfig train;
};

class NeuroEngine {
 public:
  NeuroEngine(QueryFunctionSpec spec, index::PartitionIndex index,
              std::vector<mlp::Mlp> models, BuildMetadata metadata);

  const QueryFunctionSpec& spec() const { return spec_; }
  const index::PartitionIndex& index() const { return index_; }
  const std::vector<mlp::Mlp>& models() const { return models_; }
  const BuildMetadata& metadata() const { return metadata_; }

  std::vector<double> answer(QueryView q) const;
  void answer_into(QueryView q, std::span<double> out) const;
  double answer_scalar(QueryView q) const;
  /// Reference answer path that tallies comparisons and multiply-accumulates.
  std::vector<double> answer_counted(QueryView q, mlp::OpCounter& counter) const;

  std::size_t parameter_count() const;

  /// Replaces one leaf's model; other leaves are untouched.
  void replace_model(std::size_t leaf, mlp::Mlp model);

  std::vector<std::uint8_t> to_bytes() const;
  static NeuroEngine from_bytes(std::span<const std::uint8_t> file);
  void save(const std::string& path) const;
  static NeuroEngine load(const std::string& path);

  static constexpr std::uint32_t kFormatVersion = 1;

 private:
  QueryFunctionSpec spec_;
  index::PartitionIndex index_;
  std::vector<mlp::Mlp> models_;
  BuildMetadata metadata_;
};

/// Builds the index over the workload's queries and trains one network per
/// leaf on that leaf's labeled queries. Leaf i trains with seed
/// train.seed + i.
NeuroEngine build(const Workload& workload, const BuildOptions& options);

/// Trains the model that build() would place at a leaf with these samples.
mlp::Mlp train_leaf(const QueryFunctionSpec& spec, const BuildOptions& options,
                    const std::vector<QueryInstance>& queries,
                    const std::vector<std::vector<double>>& labels,
                    std::uint64_t seed);

/// For a k-NN point engine: the engine's free-space answer snapped to its
/// exact nearest dataset row.
std::vector<double> knn_point_refine(const NeuroEngine& engine, const Dataset& dataset,
                                     QueryView q);

std::vector<std::uint8_t> serialize_spec(const QueryFunctionSpec& spec);

}  // namespace neurodb::engine
