#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tierfl/rng.hpp"

namespace tierfl {

/// Exclusive online association matrix: slots x locations, one-hot rows.
class Eoam {
 public:
  /// Validates that `matrix` is slots x locations with exactly one 1 per row.
  Eoam(std::size_t slots, std::size_t locations, std::vector<std::uint8_t> matrix);

  /// Uniformly random location per slot. slots, locations >= 1.
  static Eoam generate(std::size_t slots, std::size_t locations, Rng& rng);

  std::size_t slots() const noexcept { return slots_; }
  std::size_t locations() const noexcept { return locations_; }
  std::uint8_t at(std::size_t slot, std::size_t location) const {
    return matrix_[slot * locations_ + location];
  }
  /// Column holding the 1 in row `slot`.
  std::size_t location(std::size_t slot) const;

 private:
  std::size_t slots_;
  std::size_t locations_;
  std::vector<std::uint8_t> matrix_;
};

/// Per-location connectivity probabilities, each in [0, 1].
struct ConnectivityVector {
  std::vector<double> lambda;

  void validate() const;
};

enum class LambdaBucket { kLow, kMid, kHigh };

std::string to_string(LambdaBucket bucket);
LambdaBucket parse_lambda_bucket(const std::string& text);
/// [0.1, 0.4], [0.4, 0.7], [0.7, 1.0].
std::pair<double, double> bucket_range(LambdaBucket bucket);
/// Bucket containing `lambda`; shared edges go to the lower bucket.
LambdaBucket bucket_of(double lambda);

/// One draw per location, uniform in [lo, hi].
ConnectivityVector sample_lambda(std::size_t locations, double lo, double hi, Rng& rng);

/// Bernoulli(lambda[location(slot)]).
bool sample_online(const Eoam& eoam, const ConnectivityVector& lambda, std::size_t slot,
                   Rng& rng);

/// Online/offline history of one client with offline-time bookkeeping. Each
/// offline round accrues one unit; units are spent all at once.
class ConnectivityTrace {
 public:
  void record(bool online);
  std::size_t offline_units() const noexcept { return offline_units_; }
  /// Returns the accrued units and resets them to zero.
  std::size_t take_offline_units();
  const std::vector<bool>& history() const noexcept { return history_; }

 private:
  std::vector<bool> history_;
  std::size_t offline_units_ = 0;
};

struct ExtraEpochs {
  std::size_t epochs = 0;
  std::size_t samples_per_epoch = 0;

  friend bool operator==(const ExtraEpochs&, const ExtraEpochs&) = default;
};

/// One extra epoch per offline unit, each over ceil(fraction * extra_shard_size)
/// samples of the extra shard.
ExtraEpochs offline_to_epochs(std::size_t units, std::size_t extra_shard_size,
                              double fraction = 0.2);

}  // namespace tierfl
