#include "tierfl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tierfl::nn {

DimensionError::DimensionError(int layer_index, const std::string& what)
    : std::invalid_argument(layer_index >= 0
                                ? "layer " + std::to_string(layer_index) + ": " + what
                                : what),
      layer_index_(layer_index) {}

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError(-1, "tensor data length " + std::to_string(data_.size()) +
                                 " != " + std::to_string(rows_) + "x" +
                                 std::to_string(cols_));
  }
}

Tensor2D Tensor2D::select_rows(std::span<const std::size_t> indices) const {
  Tensor2D out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw std::out_of_range("row index out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

bool Tensor2D::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseLayer layer{Tensor2D(in, out), std::vector<double>(out), act};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& w : layer.weights.values()) w = (2.0 * uniform01(rng) - 1.0) * bound;
  for (double& b : layer.bias) b = (2.0 * uniform01(rng) - 1.0) * bound;
  return layer;
}

std::size_t Network::input_dim() const {
  return layers.empty() ? 0 : layers.front().in_dim();
}

std::size_t Network::output_dim() const {
  return layers.empty() ? 0 : layers.back().out_dim();
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

void Network::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.size() != l.out_dim()) {
      throw DimensionError(static_cast<int>(i), "bias length " +
                                                    std::to_string(l.bias.size()) +
                                                    " != output width " +
                                                    std::to_string(l.out_dim()));
    }
    if (i > 0 && layers[i - 1].out_dim() != l.in_dim()) {
      throw DimensionError(static_cast<int>(i),
                           "input width " + std::to_string(l.in_dim()) +
                               " != previous output width " +
                               std::to_string(layers[i - 1].out_dim()));
    }
  }
}

Network concat(const Network& front, const Network& back) {
  Network out{front.layers};
  out.layers.insert(out.layers.end(), back.layers.begin(), back.layers.end());
  out.validate();
  return out;
}

ForwardCache ForwardCache::select_rows(std::span<const std::size_t> indices) const {
  ForwardCache out;
  out.inputs.reserve(inputs.size());
  out.pre_activations.reserve(pre_activations.size());
  for (const auto& t : inputs) out.inputs.push_back(t.select_rows(indices));
  for (const auto& t : pre_activations) out.pre_activations.push_back(t.select_rows(indices));
  return out;
}

std::uint64_t forward_macs(const Network& net, std::size_t batch) {
  std::uint64_t macs = 0;
  for (const auto& l : net.layers) {
    macs += static_cast<std::uint64_t>(batch) * l.in_dim() * l.out_dim();
  }
  return macs;
}

namespace {

// y = x * W + b, no activation.
Tensor2D affine(const Tensor2D& x, const DenseLayer& layer) {
  const std::size_t n = x.rows();
  const std::size_t in = layer.in_dim();
  const std::size_t out = layer.out_dim();
  Tensor2D y(n, out);
  for (std::size_t r = 0; r < n; ++r) {
    auto yr = y.row(r);
    std::copy(layer.bias.begin(), layer.bias.end(), yr.begin());
    auto xr = x.row(r);
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      auto wi = layer.weights.row(i);
      for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wi[o];
    }
  }
  return y;
}

Tensor2D activate(const Tensor2D& pre, Activation act) {
  if (act == Activation::kIdentity) return pre;
  Tensor2D out = pre;
  for (double& v : out.values()) v = std::max(0.0, v);
  return out;
}

void check_labels(std::span<const Label> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw DimensionError(-1, "label count " + std::to_string(labels.size()) +
                                 " != batch rows " + std::to_string(rows));
  }
  for (Label y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::out_of_range("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
  }
}

// Row-wise softmax probabilities.
Tensor2D softmax(const Tensor2D& logits) {
  Tensor2D p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    auto pr = p.row(r);
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      pr[c] = std::exp(z[c] - m);
      s += pr[c];
    }
    for (double& v : pr) v /= s;
  }
  return p;
}

}  // namespace

ForwardResult forward(const Network& net, const Tensor2D& x) {
  net.validate();
  if (net.empty()) return {x, {}, 0};
  if (x.cols() != net.input_dim()) {
    throw DimensionError(0, "input has " + std::to_string(x.cols()) +
                                " columns, layer expects " +
                                std::to_string(net.input_dim()));
  }
  ForwardResult res;
  res.cache.inputs.reserve(net.layers.size());
  res.cache.pre_activations.reserve(net.layers.size());
  Tensor2D h = x;
  for (const auto& layer : net.layers) {
    Tensor2D pre = affine(h, layer);
    Tensor2D next = activate(pre, layer.activation);
    res.cache.inputs.push_back(std::move(h));
    res.cache.pre_activations.push_back(std::move(pre));
    h = std::move(next);
  }
  res.logits = std::move(h);
  res.macs = forward_macs(net, x.rows());
  return res;
}

std::vector<double> softmax_cross_entropy(const Tensor2D& logits,
                                          std::span<const Label> labels) {
  check_labels(labels, logits.rows(), logits.cols());
  std::vector<double> losses(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    losses[r] = std::max(0.0, m + std::log(s) - z[static_cast<std::size_t>(labels[r])]);
  }
  return losses;
}

BackwardResult backward(const Network& net, const Tensor2D& logits,
                        const ForwardCache& cache, std::span<const Label> labels,
                        double mac_multiplier) {
  if (net.empty()) throw DimensionError(-1, "backward through an empty network");
  if (cache.inputs.size() != net.layers.size() ||
      cache.pre_activations.size() != net.layers.size()) {
    throw DimensionError(-1, "forward cache does not match network depth");
  }
  const std::size_t n = logits.rows();
  BackwardResult res;
  res.losses = softmax_cross_entropy(logits, labels);
  res.last_layer_norms.assign(n, 0.0);
  res.grads.layers.resize(net.layers.size());

  // d(mean loss)/d logits = (softmax - onehot) / n
  Tensor2D delta = softmax(logits);
  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    delta(r, static_cast<std::size_t>(labels[r])) -= 1.0;
    for (double& v : delta.row(r)) v *= inv_n;
  }

  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const DenseLayer& layer = net.layers[li];
    const Tensor2D& input = cache.inputs[li];
    const Tensor2D& pre = cache.pre_activations[li];
    if (input.rows() != n || pre.cols() != layer.out_dim() || input.cols() != layer.in_dim()) {
      throw DimensionError(static_cast<int>(li), "forward cache shape mismatch");
    }
    if (layer.activation == Activation::kReLU) {
      for (std::size_t k = 0; k < delta.size(); ++k) {
        if (pre.values()[k] <= 0.0) delta.values()[k] = 0.0;
      }
    }

    LayerGradient& g = res.grads.layers[li];
    g.weights = Tensor2D(layer.in_dim(), layer.out_dim());
    g.bias.assign(layer.out_dim(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      auto dr = delta.row(r);
      auto xr = input.row(r);
      for (std::size_t i = 0; i < layer.in_dim(); ++i) {
        auto gi = g.weights.row(i);
        const double xi = xr[i];
        for (std::size_t o = 0; o < layer.out_dim(); ++o) gi[o] += xi * dr[o];
      }
      for (std::size_t o = 0; o < layer.out_dim(); ++o) g.bias[o] += dr[o];
    }

    if (li + 1 == net.layers.size()) {
      // Per-sample gradient is the outer product x_r^T d_r, whose Frobenius
      // norm factors into ||x_r|| * ||d_r||.
      for (std::size_t r = 0; r < n; ++r) {
        double xs = 0.0;
        double ds = 0.0;
        for (double v : input.row(r)) xs += v * v;
        for (double v : delta.row(r)) ds += v * v;
        res.last_layer_norms[r] = std::sqrt(xs) * std::sqrt(ds) * static_cast<double>(n);
      }
    }

    if (li > 0) {
      Tensor2D prev(n, layer.in_dim());
      for (std::size_t r = 0; r < n; ++r) {
        auto dr = delta.row(r);
        auto pr = prev.row(r);
        for (std::size_t i = 0; i < layer.in_dim(); ++i) {
          auto wi = layer.weights.row(i);
          double s = 0.0;
          for (std::size_t o = 0; o < layer.out_dim(); ++o) s += wi[o] * dr[o];
          pr[i] = s;
        }
      }
      delta = std::move(prev);
    }
  }

  res.macs = static_cast<std::uint64_t>(
      std::llround(mac_multiplier * static_cast<double>(forward_macs(net, n))));
  return res;
}

LossAndGrad loss_and_grad(const Network& net, const Tensor2D& x,
                          std::span<const Label> labels, double mac_multiplier) {
  ForwardResult fwd = forward(net, x);
  BackwardResult bwd = backward(net, fwd.logits, fwd.cache, labels, mac_multiplier);
  return {std::move(bwd.losses), std::move(bwd.grads), std::move(bwd.last_layer_norms),
          fwd.macs, bwd.macs};
}

void apply_sgd(Network& net, const GradientSet& grads, double lr) {
  if (grads.layers.size() != net.layers.size()) {
    throw DimensionError(-1, "gradient set has " + std::to_string(grads.layers.size()) +
                                 " layers, network has " +
                                 std::to_string(net.layers.size()));
  }
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    DenseLayer& layer = net.layers[li];
    const LayerGradient& g = grads.layers[li];
    if (g.weights.rows() != layer.in_dim() || g.weights.cols() != layer.out_dim() ||
        g.bias.size() != layer.bias.size()) {
      throw DimensionError(static_cast<int>(li), "gradient shape mismatch");
    }
    auto w = layer.weights.values();
    auto gw = g.weights.values();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * gw[k];
    for (std::size_t k = 0; k < layer.bias.size(); ++k) layer.bias[k] -= lr * g.bias[k];
  }
}

Network sgd_step(Network net, const GradientSet& grads, double lr) {
  apply_sgd(net, grads, lr);
  return net;
}

double last_layer_grad_norm(const GradientSet& grads) {
  if (grads.layers.empty()) return 0.0;
  double s = 0.0;
  for (double v : grads.layers.back().weights.values()) s += v * v;
  return std::sqrt(s);
}

std::vector<Label> predict(const Network& net, const Tensor2D& x) {
  const Tensor2D logits = forward(net, x).logits;
  std::vector<Label> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    out[r] = static_cast<Label>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  return out;
}

double accuracy(const Network& net, const Tensor2D& x, std::span<const Label> labels) {
  if (labels.empty()) return 0.0;
  const auto pred = predict(net, x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace tierfl::nn
