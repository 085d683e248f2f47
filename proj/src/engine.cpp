#include "neurodb/engine.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

#include "neurodb/oracle.hpp"

namespace neurodb::engine {

namespace {

const char kMagic[9] = "NEURODB\0";

void write_spec(binary::Writer& w, const QueryFunctionSpec& spec) {
  w.u8(static_cast<std::uint8_t>(spec.kind));
  w.u8(static_cast<std::uint8_t>(spec.predicate.kind));
  w.u32(static_cast<std::uint32_t>(spec.predicate.attributes.size()));
  for (auto a : spec.predicate.attributes) w.u32(static_cast<std::uint32_t>(a));
  w.u8(static_cast<std::uint8_t>(spec.aggregation.kind));
  w.u32(static_cast<std::uint32_t>(spec.aggregation.measure));
  w.u32(static_cast<std::uint32_t>(spec.k));
  w.u32(static_cast<std::uint32_t>(spec.data_dim));
  w.u8(spec.group_by ? 1 : 0);
  if (spec.group_by) {
    w.u32(static_cast<std::uint32_t>(spec.group_by->attribute));
    w.f64(spec.group_by->value);
  }
}

QueryFunctionSpec read_spec(binary::Reader& r) {
  auto malformed = [](const char* what) {
    return LoadError(LoadError::Kind::Malformed, what);
  };
  QueryFunctionSpec spec;
  const auto kind = r.u8();
  if (kind > 2) throw malformed("unknown query kind");
  spec.kind = static_cast<QueryKind>(kind);
  const auto pred = r.u8();
  if (pred > 2) throw malformed("unknown predicate kind");
  spec.predicate.kind = static_cast<PredicateKind>(pred);
  const auto attrs = r.u32();
  if (attrs > 4096) throw malformed("implausible attribute count");
  for (std::uint32_t i = 0; i < attrs; ++i) spec.predicate.attributes.push_back(r.u32());
  const auto agg = r.u8();
  if (agg > 4) throw malformed("unknown aggregation");
  spec.aggregation.kind = static_cast<AggKind>(agg);
  spec.aggregation.measure = r.u32();
  spec.k = r.u32();
  spec.data_dim = r.u32();
  if (r.u8()) {
    GroupBy g;
    g.attribute = r.u32();
    g.value = r.f64();
    spec.group_by = g;
  }
  try {
    spec.validate();
  } catch (const ContractError& e) {
    throw LoadError(LoadError::Kind::Malformed, std::string("invalid spec: ") + e.what());
  }
  return spec;
}

}  // namespace

NeuroEngine::NeuroEngine(QueryFunctionSpec spec, index::PartitionIndex index,
                         std::vector<mlp::Mlp> models, BuildMetadata metadata)
    : spec_(std::move(spec)),
      index_(std::move(index)),
      models_(std::move(models)),
      metadata_(std::move(metadata)) {
  spec_.validate();
  require(index_.d_pred() == spec_.d_pred(), "index d_pred does not match the spec");
  require(models_.size() == index_.leaf_count(), "need exactly one model per leaf");
  for (const auto& m : models_) {
    require(m.input_dim() == spec_.d_pred() && m.output_dim() == spec_.output_dim(),
            "leaf model dimensions do not match the spec");
  }
}

std::vector<double> NeuroEngine::answer(QueryView q) const {
  std::vector<double> out(spec_.output_dim());
  answer_into(q, out);
  return out;
}

void NeuroEngine::answer_into(QueryView q, std::span<double> out) const {
  require(q.size() == spec_.d_pred(), "query length does not match d_pred");
  models_[index_.locate(q)].forward_into(q, out);
}

double NeuroEngine::answer_scalar(QueryView q) const {
  double out = 0.0;
  answer_into(q, {&out, 1});
  return out;
}

std::vector<double> NeuroEngine::answer_counted(QueryView q, mlp::OpCounter& counter) const {
  require(q.size() == spec_.d_pred(), "query length does not match d_pred");
  const auto leaf = index_.locate_counted(q, counter.comparisons);
  return models_[leaf].forward_counted(q, counter);
}

std::size_t NeuroEngine::parameter_count() const {
  std::size_t total = 0;
  for (const auto& m : models_) total += m.parameter_count();
  return total;
}

void NeuroEngine::replace_model(std::size_t leaf, mlp::Mlp model) {
  require(leaf < models_.size(), "leaf id out of range");
  require(model.widths() == models_[leaf].widths(), "replacement model has a different shape");
  models_[leaf] = std::move(model);
}

std::vector<std::uint8_t> serialize_spec(const QueryFunctionSpec& spec) {
  binary::Writer w;
  write_spec(w, spec);
  return std::move(w.bytes());
}

std::vector<std::uint8_t> NeuroEngine::to_bytes() const {
  binary::Writer w;
  write_spec(w, spec_);
  const auto& arch = metadata_.architecture;
  w.u32(static_cast<std::uint32_t>(arch.n_layers));
  w.u32(static_cast<std::uint32_t>(arch.first_width));
  w.u32(static_cast<std::uint32_t>(arch.rest_width));
  w.u32(static_cast<std::uint32_t>(metadata_.train.epochs));
  w.u32(static_cast<std::uint32_t>(metadata_.train.batch_size));
  w.f64(metadata_.train.learning_rate);
  w.u64(metadata_.train.seed);
  index_.serialize(w);
  w.u32(static_cast<std::uint32_t>(models_.size()));
  for (std::size_t leaf = 0; leaf < models_.size(); ++leaf) {
    w.u64(leaf < metadata_.leaf_training_sizes.size() ? metadata_.leaf_training_sizes[leaf] : 0);
    w.u64(leaf < metadata_.leaf_seeds.size() ? metadata_.leaf_seeds[leaf] : 0);
    models_[leaf].serialize(w);
  }
  return binary::seal(kMagic, kFormatVersion, w.bytes());
}

NeuroEngine NeuroEngine::from_bytes(std::span<const std::uint8_t> file) {
  binary::Reader r(binary::unseal(kMagic, kFormatVersion, file));
  auto spec = read_spec(r);
  BuildMetadata meta;
  meta.architecture.n_layers = r.u32();
  meta.architecture.first_width = r.u32();
  meta.architecture.rest_width = r.u32();
  meta.architecture.input_dim = spec.d_pred();
  meta.architecture.output_dim = spec.output_dim();
  meta.train.epochs = r.u32();
  meta.train.batch_size = r.u32();
  meta.train.learning_rate = r.f64();
  meta.train.seed = r.u64();
  auto idx = index::PartitionIndex::deserialize(r);
  const auto count = r.u32();
  if (count != idx.leaf_count()) {
    throw LoadError(LoadError::Kind::Malformed, "model count does not match leaf count");
  }
  std::vector<mlp::Mlp> models;
  models.reserve(count);
  for (std::uint32_t leaf = 0; leaf < count; ++leaf) {
    meta.leaf_training_sizes.push_back(r.u64());
    meta.leaf_seeds.push_back(r.u64());
    models.push_back(mlp::Mlp::deserialize(r));
  }
  if (r.remaining() != 0) {
    throw LoadError(LoadError::Kind::Malformed, "trailing bytes in engine payload");
  }
  try {
    return NeuroEngine(std::move(spec), std::move(idx), std::move(models), std::move(meta));
  } catch (const ContractError& e) {
    throw LoadError(LoadError::Kind::Malformed, std::string("inconsistent engine: ") + e.what());
  }
}

void NeuroEngine::save(const std::string& path) const {
  binary::write_file(path, to_bytes());
}

NeuroEngine NeuroEngine::load(const std::string& path) {
  return from_bytes(binary::read_file(path));
}

mlp::Mlp train_leaf(const QueryFunctionSpec& spec, const BuildOptions& options,
                    const std::vector<QueryInstance>& queries,
                    const std::vector<std::vector<double>>& labels,
                    std::uint64_t seed) {
  mlp::Architecture arch = options.architecture;
  arch.input_dim = spec.d_pred();
  arch.output_dim = spec.output_dim();
  mlp::TrainConfig config = options.train;
  config.seed = seed;
  return mlp::train(arch, config, queries, labels).model;
}

NeuroEngine build(const Workload& workload, const BuildOptions& options) {
  workload.validate();
  require(!workload.labels.empty() && workload.labels.size() == workload.queries.size(),
          "engine build needs a labeled workload");
  auto built = index::build_index(workload.queries, options.height);
  const std::size_t leaves = built.index.leaf_count();

  BuildMetadata meta;
  meta.architecture = options.architecture;
  meta.architecture.input_dim = workload.spec.d_pred();
  meta.architecture.output_dim = workload.spec.output_dim();
  meta.architecture.validate();
  meta.train = options.train;
  meta.leaf_training_sizes.resize(leaves);
  meta.leaf_seeds.resize(leaves);
  meta.leaf_train_seconds.resize(leaves);

  std::vector<std::optional<mlp::Mlp>> trained(leaves);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t leaf = next++; leaf < leaves; leaf = next++) {
      try {
        const auto& members = built.leaf_members[leaf];
        std::vector<QueryInstance> xs;
        std::vector<std::vector<double>> ys;
        xs.reserve(members.size());
        ys.reserve(members.size());
        for (auto m : members) {
          xs.push_back(workload.queries[m]);
          ys.push_back(workload.labels[m]);
        }
        const std::uint64_t seed = options.train.seed + leaf;
        const auto start = std::chrono::steady_clock::now();
        trained[leaf] = train_leaf(workload.spec, options, xs, ys, seed);
        meta.leaf_train_seconds[leaf] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        meta.leaf_training_sizes[leaf] = members.size();
        meta.leaf_seeds[leaf] = seed;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, leaves));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<mlp::Mlp> models;
  models.reserve(leaves);
  for (auto& m : trained) models.push_back(std::move(*m));
  return NeuroEngine(workload.spec, std::move(built.index), std::move(models), std::move(meta));
}

std::vector<double> knn_point_refine(const NeuroEngine& engine, const Dataset& dataset,
                                     QueryView q) {
  require(engine.spec().kind == QueryKind::KnnPoint, "refinement needs a k-NN point engine");
  require(dataset.d() == engine.spec().data_dim, "dataset dimension does not match the engine");
  const auto raw = engine.answer(q);
  return oracle::exact_knn_point(dataset, 1, raw);
}

}  // namespace neurodb::engine
