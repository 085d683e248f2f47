#pragma once

// Dense ReLU network with squared-error loss, backpropagation and Adam.
// One of these answers the queries falling into each partition.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "neurodb/binary.hpp"
#include "neurodb/core.hpp"

namespace neurodb::mlp {

/// n_layers counts the first hidden layer, the rest-width hidden layers and
/// the linear output layer: widths are
/// [input, first, rest x (n_layers - 2), output].
struct Architecture {
  std::size_t input_dim = 1;
  std::size_t n_layers = 5;
  std::size_t first_width = 60;
  std::size_t rest_width = 30;
  std::size_t output_dim = 1;

  std::vector<std::size_t> widths() const;
  void validate() const;
};

/// Weights plus biases for a chain of dense layers.
std::size_t parameter_count(std::span<const std::size_t> widths);
/// Multiply-accumulates in one forward pass.
std::size_t mac_count(std::span<const std::size_t> widths);

/// Affine maps between raw units and the network's working units:
/// input x' = x * scale + shift, label y = y' * std + mean.
struct Normalization {
  std::vector<double> input_scale;
  std::vector<double> input_shift;
  std::vector<double> label_mean;
  std::vector<double> label_std;

  static Normalization identity(std::size_t input_dim, std::size_t output_dim);
  /// Min-max inputs onto [0, 1] (constant dimensions map to 0.5); z-score
  /// labels (constant labels keep std 1).
  static Normalization fit(const std::vector<QueryInstance>& inputs,
                           const std::vector<std::vector<double>>& labels);

  double normalize_input(std::size_t j, double x) const {
    return x * input_scale[j] + input_shift[j];
  }
  double normalize_label(std::size_t j, double y) const {
    return (y - label_mean[j]) / label_std[j];
  }
  double denormalize_label(std::size_t j, double y) const {
    return y * label_std[j] + label_mean[j];
  }
};

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Running count of work done by an instrumented forward pass.
struct OpCounter {
  std::size_t macs = 0;
  std::size_t comparisons = 0;
};

class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialized network with identity normalization. `widths` lists
  /// the input width, each hidden width, then the output width.
  explicit Mlp(std::vector<std::size_t> widths);
  /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  static Mlp initialized(std::vector<std::size_t> widths, std::uint64_t seed);

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t input_dim() const { return widths_.front(); }
  std::size_t output_dim() const { return widths_.back(); }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  Normalization& normalization() { return norm_; }
  const Normalization& normalization() const { return norm_; }
  std::size_t parameter_count() const { return mlp::parameter_count(widths_); }
  std::size_t mac_count() const { return mlp::mac_count(widths_); }

  /// Raw-unit prediction: normalize x, run the network, denormalize.
  std::vector<double> forward(QueryView x) const;
  /// Allocation-free variant; `out` has output_dim entries.
  void forward_into(QueryView x, std::span<double> out) const;
  /// Scalar reference implementation that tallies every multiply-accumulate.
  std::vector<double> forward_counted(QueryView x, OpCounter& counter) const;

  /// Network-space batch forward; columns are samples.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

  bool operator==(const Mlp& other) const;

  void serialize(binary::Writer& out) const;
  static Mlp deserialize(binary::Reader& in);
  /// Standalone model file: sealed block with its own magic and version.
  void save(const std::string& path) const;
  static Mlp load(const std::string& path);

  static constexpr std::uint32_t kFormatVersion = 1;

 private:
  std::vector<std::size_t> widths_;
  std::vector<Layer> layers_;
  Normalization norm_;
};

/// Parameter-shaped gradient buffers.
struct Gradients {
  std::vector<Layer> layers;
  static Gradients zeros_like(const Mlp& model);
};

/// Mean over the batch of the squared error summed over output dimensions,
/// in network units (columns of `inputs`/`targets` are samples). Fills
/// `grads` by backpropagation; the ReLU derivative at exactly 0 is 0.
double loss_and_grad(const Mlp& model, const Eigen::MatrixXd& inputs,
                     const Eigen::MatrixXd& targets, Gradients& grads);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState(const Mlp& model, AdamConfig config);
  /// One bias-corrected Adam update of `model` in place.
  void step(Mlp& model, const Gradients& grads);
  std::uint64_t steps() const { return t_; }
  const std::vector<Layer>& first_moment() const { return m_; }
  const std::vector<Layer>& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<Layer> m_;
  std::vector<Layer> v_;
  std::uint64_t t_ = 0;
};

struct TrainConfig {
  std::size_t epochs = 1000;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Mlp model;
  std::vector<double> epoch_loss;  // mean training loss, network units
};

TrainResult train(const Architecture& arch, const TrainConfig& config,
                  const std::vector<QueryInstance>& inputs,
                  const std::vector<std::vector<double>>& labels);

}  // namespace neurodb::mlp
