#include "tierfl/selector.hpp"

#include <stdexcept>
#include <string>

namespace tierfl {

SlidingCdf::SlidingCdf(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("CDF queue capacity must be positive");
}

void SlidingCdf::push(double value) {
  if (values_.size() == capacity_) values_.pop_front();
  values_.push_back(value);
}

void SlidingCdf::push(std::span<const double> values) {
  for (double v : values) push(v);
}

std::optional<double> SlidingCdf::eval(double v) const {
  if (values_.empty()) return std::nullopt;
  std::size_t below = 0;
  for (double q : values_) below += q <= v ? 1 : 0;
  return static_cast<double>(below) / static_cast<double>(values_.size());
}

void SelectionParams::validate() const {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument(std::string(name) + " must be a finite value >= 0");
    }
  };
  check(alpha, "alpha");
  check(beta, "beta");
  check(gamma, "gamma");
  if (queue_capacity == 0) throw std::invalid_argument("queue_capacity must be positive");
  if (warmup_min > queue_capacity) {
    throw std::invalid_argument("warmup_min cannot exceed queue_capacity");
  }
}

namespace {

bool warming_up(const SlidingCdf& cdf, const SelectionParams& params) {
  return cdf.size() == 0 || cdf.size() < params.warmup_min;
}

}  // namespace

RoutedBatch route_by_loss(std::span<const double> losses, SlidingCdf& cdf,
                          const SelectionParams& params, Rng& rng) {
  RoutedBatch out;
  if (warming_up(cdf, params)) {
    out.classifier.reserve(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) out.classifier.push_back(i);
  } else {
    for (std::size_t i = 0; i < losses.size(); ++i) {
      const double q = *cdf.eval(losses[i]);
      if (uniform01(rng) < discard_probability(q, params.alpha)) {
        out.discard.push_back(i);
      } else if (uniform01(rng) < loss_transmit_probability(q, params.beta)) {
        out.transmit.push_back(i);
      } else {
        out.classifier.push_back(i);
      }
    }
  }
  cdf.push(losses);
  return out;
}

std::vector<std::size_t> route_by_grad(std::span<const double> norms,
                                       std::span<const std::size_t> classifier_idx,
                                       SlidingCdf& cdf, const SelectionParams& params,
                                       Rng& rng) {
  if (norms.size() != classifier_idx.size()) {
    throw std::invalid_argument("gradient norms and classifier indices differ in length");
  }
  std::vector<std::size_t> added;
  if (!warming_up(cdf, params)) {
    for (std::size_t i = 0; i < norms.size(); ++i) {
      const double q = *cdf.eval(norms[i]);
      if (uniform01(rng) < grad_transmit_probability(q, params.gamma)) {
        added.push_back(classifier_idx[i]);
      }
    }
  }
  cdf.push(norms);
  return added;
}

}  // namespace tierfl
