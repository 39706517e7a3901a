#pragma once

// Minimal dense-network engine with exact MAC accounting.
//
// Layer weights are stored in x out, so a forward pass computes
// Y = act(X * W + b) for a row-major batch X. Every pass reports the number of
// multiply-accumulates it performed; backward passes report a configurable
// multiple of the forward MACs of the layers they differentiate.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tierfl/rng.hpp"

namespace tierfl::nn {

using Label = int;

/// Thrown when tensor or layer shapes do not chain. `layer_index` is the
/// offending layer, or -1 when the mismatch is not tied to a layer.
class DimensionError : public std::invalid_argument {
 public:
  DimensionError(int layer_index, const std::string& what);
  int layer_index() const noexcept { return layer_index_; }

 private:
  int layer_index_;
};

class Tensor2D {
 public:
  Tensor2D() = default;
  Tensor2D(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  /// Copies the given rows, in order, into a new tensor.
  Tensor2D select_rows(std::span<const std::size_t> indices) const;

  bool all_finite() const;

  friend bool operator==(const Tensor2D&, const Tensor2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Activation { kReLU, kIdentity };

struct DenseLayer {
  Tensor2D weights;  // in x out
  std::vector<double> bias;
  Activation activation = Activation::kIdentity;

  std::size_t in_dim() const noexcept { return weights.rows(); }
  std::size_t out_dim() const noexcept { return weights.cols(); }
  std::size_t param_count() const noexcept { return weights.size() + bias.size(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Uniform init in [-1/sqrt(in), +1/sqrt(in)] for weights and bias.
DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, Rng& rng);

struct Network {
  std::vector<DenseLayer> layers;

  bool empty() const noexcept { return layers.empty(); }
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t param_count() const;

  /// Throws DimensionError if adjacent layers do not chain or a layer's bias
  /// length differs from its output width.
  void validate() const;

  friend bool operator==(const Network&, const Network&) = default;
};

/// Layers of `front` followed by layers of `back`.
Network concat(const Network& front, const Network& back);

/// Inputs and pre-activations recorded per layer during a forward pass.
struct ForwardCache {
  std::vector<Tensor2D> inputs;
  std::vector<Tensor2D> pre_activations;

  ForwardCache select_rows(std::span<const std::size_t> indices) const;
};

struct ForwardResult {
  Tensor2D logits;
  ForwardCache cache;
  std::uint64_t macs = 0;
};

/// MACs of one forward pass over `batch` rows: sum of batch * in * out.
std::uint64_t forward_macs(const Network& net, std::size_t batch);

ForwardResult forward(const Network& net, const Tensor2D& x);

struct LayerGradient {
  Tensor2D weights;
  std::vector<double> bias;
};

struct GradientSet {
  std::vector<LayerGradient> layers;
};

/// Per-sample softmax cross-entropy. Throws std::out_of_range for labels
/// outside [0, logits.cols()).
std::vector<double> softmax_cross_entropy(const Tensor2D& logits,
                                          std::span<const Label> labels);

struct BackwardResult {
  std::vector<double> losses;
  /// Gradient of the batch-mean loss.
  GradientSet grads;
  /// ||d loss_i / d W_last||_2 for each sample i (not divided by batch size).
  std::vector<double> last_layer_norms;
  std::uint64_t macs = 0;
};

/// Backpropagates softmax cross-entropy through every layer of `net`, using
/// the cache from a forward pass of the same rows. Reported MACs are
/// `mac_multiplier` times the forward MACs of `net` over those rows.
BackwardResult backward(const Network& net, const Tensor2D& logits,
                        const ForwardCache& cache, std::span<const Label> labels,
                        double mac_multiplier = 2.0);

struct LossAndGrad {
  std::vector<double> losses;
  GradientSet grads;
  std::vector<double> last_layer_norms;
  std::uint64_t forward_macs = 0;
  std::uint64_t backward_macs = 0;

  std::uint64_t macs() const noexcept { return forward_macs + backward_macs; }
};

LossAndGrad loss_and_grad(const Network& net, const Tensor2D& x,
                          std::span<const Label> labels,
                          double mac_multiplier = 2.0);

/// w <- w - lr * g for every weight and bias. Throws DimensionError when the
/// gradient set is not shape-congruent with the network.
Network sgd_step(Network net, const GradientSet& grads, double lr);
void apply_sgd(Network& net, const GradientSet& grads, double lr);

/// L2 norm of the last layer's weight gradient.
double last_layer_grad_norm(const GradientSet& grads);

std::vector<Label> predict(const Network& net, const Tensor2D& x);
double accuracy(const Network& net, const Tensor2D& x, std::span<const Label> labels);

}  // namespace tierfl::nn
