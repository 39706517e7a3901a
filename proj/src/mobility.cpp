#include "tierfl/mobility.hpp"

#include <cmath>
#include <stdexcept>

namespace tierfl {

Eoam::Eoam(std::size_t slots, std::size_t locations, std::vector<std::uint8_t> matrix)
    : slots_(slots), locations_(locations), matrix_(std::move(matrix)) {
  if (slots_ == 0 || locations_ == 0) {
    throw std::invalid_argument("eOAM needs at least one slot and one location");
  }
  if (matrix_.size() != slots_ * locations_) {
    throw std::invalid_argument("eOAM matrix size does not match slots x locations");
  }
  for (std::size_t t = 0; t < slots_; ++t) {
    std::size_t ones = 0;
    for (std::size_t s = 0; s < locations_; ++s) {
      const auto v = at(t, s);
      if (v > 1) throw std::invalid_argument("eOAM entries must be 0 or 1");
      ones += v;
    }
    if (ones != 1) {
      throw std::invalid_argument("eOAM row " + std::to_string(t) + " is not one-hot");
    }
  }
}

Eoam Eoam::generate(std::size_t slots, std::size_t locations, Rng& rng) {
  if (slots == 0 || locations == 0) {
    throw std::invalid_argument("eOAM needs at least one slot and one location");
  }
  std::vector<std::uint8_t> m(slots * locations, 0);
  for (std::size_t t = 0; t < slots; ++t) m[t * locations + uniform_index(rng, locations)] = 1;
  return Eoam(slots, locations, std::move(m));
}

std::size_t Eoam::location(std::size_t slot) const {
  if (slot >= slots_) throw std::out_of_range("eOAM slot out of range");
  for (std::size_t s = 0; s < locations_; ++s) {
    if (at(slot, s) == 1) return s;
  }
  throw std::logic_error("eOAM row without a location");
}

void ConnectivityVector::validate() const {
  if (lambda.empty()) throw std::invalid_argument("connectivity vector is empty");
  for (double l : lambda) {
    if (!(l >= 0.0 && l <= 1.0)) {
      throw std::invalid_argument("connectivity probabilities must lie in [0, 1]");
    }
  }
}

std::string to_string(LambdaBucket bucket) {
  switch (bucket) {
    case LambdaBucket::kLow: return "low";
    case LambdaBucket::kMid: return "mid";
    case LambdaBucket::kHigh: return "high";
  }
  return "?";
}

LambdaBucket parse_lambda_bucket(const std::string& text) {
  if (text == "low") return LambdaBucket::kLow;
  if (text == "mid") return LambdaBucket::kMid;
  if (text == "high") return LambdaBucket::kHigh;
  throw std::invalid_argument("unknown lambda bucket '" + text + "' (expected low|mid|high)");
}

std::pair<double, double> bucket_range(LambdaBucket bucket) {
  switch (bucket) {
    case LambdaBucket::kLow: return {0.1, 0.4};
    case LambdaBucket::kMid: return {0.4, 0.7};
    case LambdaBucket::kHigh: return {0.7, 1.0};
  }
  return {0.0, 1.0};
}

LambdaBucket bucket_of(double lambda) {
  if (lambda <= 0.4) return LambdaBucket::kLow;
  if (lambda <= 0.7) return LambdaBucket::kMid;
  return LambdaBucket::kHigh;
}

ConnectivityVector sample_lambda(std::size_t locations, double lo, double hi, Rng& rng) {
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) {
    throw std::invalid_argument("lambda range must satisfy 0 <= lo <= hi <= 1");
  }
  ConnectivityVector v;
  v.lambda.reserve(locations);
  for (std::size_t s = 0; s < locations; ++s) v.lambda.push_back(lo + (hi - lo) * uniform01(rng));
  return v;
}

bool sample_online(const Eoam& eoam, const ConnectivityVector& lambda, std::size_t slot,
                   Rng& rng) {
  if (lambda.lambda.size() != eoam.locations()) {
    throw std::invalid_argument("connectivity vector length != eOAM locations");
  }
  return uniform01(rng) < lambda.lambda[eoam.location(slot)];
}

void ConnectivityTrace::record(bool online) {
  history_.push_back(online);
  if (!online) ++offline_units_;
}

std::size_t ConnectivityTrace::take_offline_units() {
  return std::exchange(offline_units_, 0);
}

ExtraEpochs offline_to_epochs(std::size_t units, std::size_t extra_shard_size,
                              double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("extra-shard fraction must lie in [0, 1]");
  }
  if (units == 0) return {};
  const double exact = fraction * static_cast<double>(extra_shard_size);
  // Guard against representation error pushing an integral product up a step.
  const double nearest = std::round(exact);
  const double n = std::abs(exact - nearest) < 1e-9 ? nearest : std::ceil(exact);
  return {units, static_cast<std::size_t>(n)};
}

}  // namespace tierfl
