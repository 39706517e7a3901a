#pragma once

// On-device data selection.
//
// Each sample's loss is ranked against a sliding window of recent losses. With
// q = CDF(loss), the sample is discarded with probability 1 - q^alpha; if kept
// it is sent to the access point with probability q^beta, otherwise it trains
// the on-device classifier. Samples that trained the classifier are ranked
// again by their last-layer gradient norm and copied to the access point set
// with probability CDF(norm)^gamma.

#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "tierfl/rng.hpp"

namespace tierfl {

/// Empirical CDF over a fixed-capacity FIFO; the oldest value is evicted first.
class SlidingCdf {
 public:
  explicit SlidingCdf(std::size_t capacity);

  void push(double value);
  void push(std::span<const double> values);

  /// Fraction of queued values <= v, or nullopt on an empty queue.
  std::optional<double> eval(double v) const;

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const std::deque<double>& values() const noexcept { return values_; }

 private:
  std::size_t capacity_;
  std::deque<double> values_;
};

struct SelectionParams {
  double alpha = 5.0;
  double beta = 3.0;
  double gamma = 0.0;
  std::size_t queue_capacity = 150;
  std::size_t warmup_min = 32;

  /// Throws std::invalid_argument for negative or non-finite exponents, a
  /// zero capacity, or warmup_min > queue_capacity.
  void validate() const;

  friend bool operator==(const SelectionParams&, const SelectionParams&) = default;
};

inline double discard_probability(double cdf, double alpha) {
  return 1.0 - std::pow(cdf, alpha);
}

inline double loss_transmit_probability(double cdf, double beta) {
  return std::pow(cdf, beta);
}

inline double grad_transmit_probability(double cdf, double gamma) {
  return std::pow(cdf, gamma);
}

/// Indices into one batch. `transmit` holds loss-selected samples first,
/// then gradient-selected ones (which also appear in `classifier`).
struct RoutedBatch {
  std::vector<std::size_t> discard;
  std::vector<std::size_t> classifier;
  std::vector<std::size_t> transmit;
};

struct SelectionState {
  SlidingCdf loss_cdf;
  SlidingCdf grad_cdf;

  explicit SelectionState(std::size_t capacity) : loss_cdf(capacity), grad_cdf(capacity) {}
};

/// Routes every sample of a batch by its loss, then enqueues all losses.
/// While the queue holds fewer than warmup_min values every sample goes to
/// the classifier set and no random draws are made.
RoutedBatch route_by_loss(std::span<const double> losses, SlidingCdf& cdf,
                          const SelectionParams& params, Rng& rng);

/// `norms[i]` is the gradient norm of batch sample `classifier_idx[i]`.
/// Returns the batch indices copied into the transmit set, then enqueues all
/// norms. Returns nothing while the gradient queue is warming up.
std::vector<std::size_t> route_by_grad(std::span<const double> norms,
                                       std::span<const std::size_t> classifier_idx,
                                       SlidingCdf& cdf, const SelectionParams& params,
                                       Rng& rng);

}  // namespace tierfl

