#include "neurodb/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace neurodb::mlp {

namespace {

const char kMagic[9] = "NDBMLP\0\0";

std::size_t max_width(const std::vector<std::size_t>& widths) {
  return *std::max_element(widths.begin(), widths.end());
}

}  // namespace

std::vector<std::size_t> Architecture::widths() const {
  validate();
  std::vector<std::size_t> w{input_dim, first_width};
  for (std::size_t i = 0; i + 2 < n_layers; ++i) w.push_back(rest_width);
  w.push_back(output_dim);
  return w;
}

void Architecture::validate() const {
  require(n_layers >= 2, "architecture needs at least two layers");
  require(input_dim >= 1 && output_dim >= 1, "architecture dims must be positive");
  require(first_width >= 1 && rest_width >= 1, "layer widths must be positive");
}

std::size_t parameter_count(std::span<const std::size_t> widths) {
  std::size_t total = 0;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    total += widths[l] * widths[l - 1] + widths[l];
  }
  return total;
}

std::size_t mac_count(std::span<const std::size_t> widths) {
  std::size_t total = 0;
  for (std::size_t l = 1; l < widths.size(); ++l) total += widths[l] * widths[l - 1];
  return total;
}

Normalization Normalization::identity(std::size_t input_dim, std::size_t output_dim) {
  Normalization n;
  n.input_scale.assign(input_dim, 1.0);
  n.input_shift.assign(input_dim, 0.0);
  n.label_mean.assign(output_dim, 0.0);
  n.label_std.assign(output_dim, 1.0);
  return n;
}

Normalization Normalization::fit(const std::vector<QueryInstance>& inputs,
                                 const std::vector<std::vector<double>>& labels) {
  require(!inputs.empty() && inputs.size() == labels.size(),
          "normalization needs matching, non-empty inputs and labels");
  const std::size_t p = inputs.front().size();
  const std::size_t o = labels.front().size();
  Normalization n = identity(p, o);
  for (std::size_t j = 0; j < p; ++j) {
    double lo = inputs.front()[j];
    double hi = lo;
    for (const auto& x : inputs) {
      lo = std::min(lo, x[j]);
      hi = std::max(hi, x[j]);
    }
    if (hi > lo) {
      n.input_scale[j] = 1.0 / (hi - lo);
      n.input_shift[j] = -lo / (hi - lo);
    } else {
      n.input_scale[j] = 0.0;
      n.input_shift[j] = 0.5;
    }
  }
  const auto count = static_cast<double>(labels.size());
  for (std::size_t j = 0; j < o; ++j) {
    double sum = 0.0;
    for (const auto& y : labels) sum += y[j];
    const double mean = sum / count;
    double sq = 0.0;
    for (const auto& y : labels) sq += (y[j] - mean) * (y[j] - mean);
    const double sd = std::sqrt(sq / count);
    n.label_mean[j] = mean;
    n.label_std[j] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
  }
  return n;
}

Mlp::Mlp(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  require(widths_.size() >= 2, "network needs an input and an output width");
  for (auto w : widths_) require(w >= 1, "layer widths must be positive");
  for (std::size_t l = 1; l < widths_.size(); ++l) {
    layers_.push_back({Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(widths_[l]),
                                             static_cast<Eigen::Index>(widths_[l - 1])),
                       Eigen::VectorXd::Zero(static_cast<Eigen::Index>(widths_[l]))});
  }
  norm_ = Normalization::identity(widths_.front(), widths_.back());
}

Mlp Mlp::initialized(std::vector<std::size_t> widths, std::uint64_t seed) {
  Mlp model(std::move(widths));
  std::mt19937_64 rng(seed);
  for (auto& layer : model.layers_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
    }
  }
  return model;
}

std::vector<double> Mlp::forward(QueryView x) const {
  std::vector<double> out(output_dim());
  forward_into(x, out);
  return out;
}

void Mlp::forward_into(QueryView x, std::span<double> out) const {
  require(x.size() == input_dim(), "input length does not match the network");
  require(out.size() == output_dim(), "output buffer has the wrong length");
  thread_local std::vector<double> buf_a;
  thread_local std::vector<double> buf_b;
  const std::size_t width = max_width(widths_);
  if (buf_a.size() < width) {
    buf_a.resize(width);
    buf_b.resize(width);
  }
  double* cur = buf_a.data();
  double* next = buf_b.data();
  for (std::size_t j = 0; j < x.size(); ++j) cur[j] = norm_.normalize_input(j, x[j]);
  const std::size_t last = layers_.size() - 1;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    Eigen::Map<const Eigen::VectorXd> in(cur, layer.weight.cols());
    Eigen::Map<Eigen::VectorXd> z(next, layer.weight.rows());
    z.noalias() = layer.weight * in;
    z += layer.bias;
    if (l != last) z = z.cwiseMax(0.0);
    std::swap(cur, next);
  }
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = norm_.denormalize_label(j, cur[j]);
}

std::vector<double> Mlp::forward_counted(QueryView x, OpCounter& counter) const {
  require(x.size() == input_dim(), "input length does not match the network");
  std::vector<double> cur(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) cur[j] = norm_.normalize_input(j, x[j]);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    std::vector<double> next(static_cast<std::size_t>(layer.weight.rows()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      double acc = layer.bias(r);
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        acc += layer.weight(r, c) * cur[static_cast<std::size_t>(c)];
        ++counter.macs;
      }
      next[static_cast<std::size_t>(r)] = (l + 1 < layers_.size()) ? std::max(acc, 0.0) : acc;
    }
    cur = std::move(next);
  }
  for (std::size_t j = 0; j < cur.size(); ++j) cur[j] = norm_.denormalize_label(j, cur[j]);
  return cur;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    a = (l + 1 < layers_.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

bool Mlp::operator==(const Mlp& other) const {
  if (widths_ != other.widths_) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weight != other.layers_[l].weight) return false;
    if (layers_[l].bias != other.layers_[l].bias) return false;
  }
  return norm_.input_scale == other.norm_.input_scale &&
         norm_.input_shift == other.norm_.input_shift &&
         norm_.label_mean == other.norm_.label_mean &&
         norm_.label_std == other.norm_.label_std;
}

void Mlp::serialize(binary::Writer& out) const {
  out.u32(static_cast<std::uint32_t>(widths_.size()));
  for (auto w : widths_) out.u32(static_cast<std::uint32_t>(w));
  for (double v : norm_.input_scale) out.f64(v);
  for (double v : norm_.input_shift) out.f64(v);
  for (double v : norm_.label_mean) out.f64(v);
  for (double v : norm_.label_std) out.f64(v);
  for (const auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) out.f64(layer.weight(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out.f64(layer.bias(r));
  }
}

Mlp Mlp::deserialize(binary::Reader& in) {
  const auto count = in.u32();
  if (count < 2 || count > 1024) {
    throw LoadError(LoadError::Kind::Malformed, "implausible layer count in model block");
  }
  std::vector<std::size_t> widths(count);
  for (auto& w : widths) {
    w = in.u32();
    if (w == 0 || w > (1u << 20)) {
      throw LoadError(LoadError::Kind::Malformed, "implausible layer width in model block");
    }
  }
  const std::size_t params = mlp::parameter_count(widths) + 2 * (widths.front() + widths.back());
  if (in.remaining() / sizeof(double) < params) {
    throw LoadError(LoadError::Kind::Truncated, "model block is truncated");
  }
  Mlp model(widths);
  auto& n = model.norm_;
  for (auto& v : n.input_scale) v = in.f64();
  for (auto& v : n.input_shift) v = in.f64();
  for (auto& v : n.label_mean) v = in.f64();
  for (auto& v : n.label_std) v = in.f64();
  for (auto& layer : model.layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = in.f64();
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = in.f64();
  }
  return model;
}

void Mlp::save(const std::string& path) const {
  binary::Writer w;
  serialize(w);
  binary::write_file(path, binary::seal(kMagic, kFormatVersion, w.bytes()));
}

Mlp Mlp::load(const std::string& path) {
  const auto file = binary::read_file(path);
  binary::Reader r(binary::unseal(kMagic, kFormatVersion, file));
  Mlp model = deserialize(r);
  if (r.remaining() != 0) {
    throw LoadError(LoadError::Kind::Malformed, "trailing bytes in model block");
  }
  return model;
}

Gradients Gradients::zeros_like(const Mlp& model) {
  Gradients g;
  for (const auto& layer : model.layers()) {
    g.layers.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                        Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return g;
}

double loss_and_grad(const Mlp& model, const Eigen::MatrixXd& inputs,
                     const Eigen::MatrixXd& targets, Gradients& grads) {
  const auto& layers = model.layers();
  const Eigen::Index batch = inputs.cols();
  require(batch >= 1, "loss needs a non-empty batch");
  require(inputs.rows() == static_cast<Eigen::Index>(model.input_dim()) &&
              targets.rows() == static_cast<Eigen::Index>(model.output_dim()) &&
              targets.cols() == batch,
          "batch shape does not match the network");
  if (grads.layers.size() != layers.size()) grads = Gradients::zeros_like(model);

  // activations[l] feeds layer l; pre[l] is layer l's pre-activation
  std::vector<Eigen::MatrixXd> activations(layers.size());
  std::vector<Eigen::MatrixXd> pre(layers.size());
  activations[0] = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    pre[l].noalias() = layers[l].weight * activations[l];
    pre[l].colwise() += layers[l].bias;
    if (l + 1 < layers.size()) activations[l + 1] = pre[l].cwiseMax(0.0);
  }

  const double inv_batch = 1.0 / static_cast<double>(batch);
  Eigen::MatrixXd delta = pre.back() - targets;
  const double loss = delta.squaredNorm() * inv_batch;
  delta *= 2.0 * inv_batch;

  for (std::size_t l = layers.size(); l-- > 0;) {
    grads.layers[l].weight.noalias() = delta * activations[l].transpose();
    grads.layers[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = layers[l].weight.transpose() * delta;
    delta = (pre[l - 1].array() > 0.0).select(back, 0.0);
  }
  return loss;
}

AdamState::AdamState(const Mlp& model, AdamConfig config) : config_(config) {
  m_ = Gradients::zeros_like(model).layers;
  v_ = m_;
}

void AdamState::step(Mlp& model, const Gradients& grads) {
  auto& layers = model.layers();
  require(grads.layers.size() == layers.size() && m_.size() == layers.size(),
          "gradient shape does not match the network");
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correct1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correct2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / correct1) /
                     ((v.array() / correct2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, grads.layers[l].weight, m_[l].weight, v_[l].weight);
    update(layers[l].bias, grads.layers[l].bias, m_[l].bias, v_[l].bias);
  }
}

TrainResult train(const Architecture& arch, const TrainConfig& config,
                  const std::vector<QueryInstance>& inputs,
                  const std::vector<std::vector<double>>& labels) {
  require(!inputs.empty(), "training needs at least one sample");
  require(inputs.size() == labels.size(), "every training input needs a label");
  require(config.epochs >= 1 && config.batch_size >= 1, "epochs and batch size must be positive");
  const auto widths = arch.widths();
  for (const auto& x : inputs) require(x.size() == arch.input_dim, "input width mismatch");
  for (const auto& y : labels) require(y.size() == arch.output_dim, "label width mismatch");

  TrainResult result{Mlp::initialized(widths, config.seed), {}};
  Mlp& model = result.model;
  model.normalization() = Normalization::fit(inputs, labels);
  const auto& norm = model.normalization();

  const auto n = static_cast<Eigen::Index>(inputs.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(arch.input_dim), n);
  Eigen::MatrixXd y(static_cast<Eigen::Index>(arch.output_dim), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& xi = inputs[static_cast<std::size_t>(i)];
    const auto& yi = labels[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < xi.size(); ++j) x(static_cast<Eigen::Index>(j), i) = norm.normalize_input(j, xi[j]);
    for (std::size_t j = 0; j < yi.size(); ++j) y(static_cast<Eigen::Index>(j), i) = norm.normalize_label(j, yi[j]);
  }

  AdamState adam(model, {config.learning_rate, 0.9, 0.999, 1e-8});
  Gradients grads = Gradients::zeros_like(model);
  // distinct stream from the weight initializer
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const std::size_t batch = std::min<std::size_t>(config.batch_size, order.size());
  Eigen::MatrixXd xb;
  Eigen::MatrixXd yb;

  result.epoch_loss.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      const auto idx = std::span(order).subspan(start, len);
      xb = x(Eigen::all, idx);
      yb = y(Eigen::all, idx);
      weighted += loss_and_grad(model, xb, yb, grads) * static_cast<double>(len);
      adam.step(model, grads);
    }
    result.epoch_loss.push_back(weighted / static_cast<double>(order.size()));
  }
  return result;
}

}  // namespace neurodb::mlp
