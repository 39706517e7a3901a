#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "tierfl/mobility.hpp"

using namespace tierfl;

TEST_CASE("generated eOAMs have one-hot rows") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const std::size_t slots = 1 + uniform_index(rng, 8);
    const std::size_t locs = 1 + uniform_index(rng, 5);
    const auto m = Eoam::generate(slots, locs, rng);
    for (std::size_t t = 0; t < slots; ++t) {
      std::size_t ones = 0;
      for (std::size_t s = 0; s < locs; ++s) ones += m.at(t, s);
      CHECK(ones == 1);
      CHECK(m.at(t, m.location(t)) == 1);
    }
  }
}

TEST_CASE("a single location is always occupied") {
  Rng rng(2);
  const auto m = Eoam::generate(5, 1, rng);
  for (std::size_t t = 0; t < 5; ++t) CHECK(m.location(t) == 0);
}

TEST_CASE("malformed eOAMs are rejected") {
  CHECK_THROWS_AS(Eoam(2, 2, {1, 0, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(Eoam(2, 2, {1, 0, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(Eoam(2, 2, {1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(Eoam(1, 2, {2, 0}), std::invalid_argument);
  Rng rng(1);
  CHECK_THROWS_AS(Eoam::generate(0, 3, rng), std::invalid_argument);
  CHECK_NOTHROW(Eoam(2, 3, {0, 1, 0, 0, 0, 1}));
}

TEST_CASE("extreme connectivity vectors") {
  Rng rng(3);
  const auto m = Eoam::generate(5, 3, rng);
  const ConnectivityVector on{{1.0, 1.0, 1.0}};
  const ConnectivityVector off{{0.0, 0.0, 0.0}};
  for (int i = 0; i < 100; ++i) {
    CHECK(sample_online(m, on, i % 5, rng));
    CHECK_FALSE(sample_online(m, off, i % 5, rng));
  }
  CHECK_THROWS_AS(sample_online(m, ConnectivityVector{{1.0}}, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS((ConnectivityVector{{1.5}}.validate()), std::invalid_argument);
}

TEST_CASE("online frequency follows lambda of the occupied location") {
  const Eoam m(1, 2, {0, 1});
  const ConnectivityVector lambda{{0.9, 0.3}};
  Rng rng(4);
  int online = 0;
  for (int i = 0; i < 20000; ++i) online += sample_online(m, lambda, 0, rng) ? 1 : 0;
  CHECK(std::abs(online / 20000.0 - 0.3) < 0.02);
}

TEST_CASE("offline units accrue once per offline round and reset when taken") {
  ConnectivityTrace trace;
  for (bool b : {false, true, false, false}) trace.record(b);
  CHECK(trace.offline_units() == 3);
  CHECK(trace.history().size() == 4);
  CHECK(trace.take_offline_units() == 3);
  CHECK(trace.offline_units() == 0);
  trace.record(false);
  CHECK(trace.offline_units() == 1);
}

TEST_CASE("offline_to_epochs examples") {
  CHECK(offline_to_epochs(0, 50) == ExtraEpochs{0, 0});
  CHECK(offline_to_epochs(3, 50) == ExtraEpochs{3, 10});
  CHECK(offline_to_epochs(1, 51) == ExtraEpochs{1, 11});
  CHECK(offline_to_epochs(2, 5, 0.2) == ExtraEpochs{2, 1});
  CHECK_THROWS_AS(offline_to_epochs(1, 10, 1.5), std::invalid_argument);
}

TEST_CASE("lambda buckets") {
  CHECK(bucket_range(LambdaBucket::kLow) == std::pair{0.1, 0.4});
  CHECK(bucket_range(LambdaBucket::kMid) == std::pair{0.4, 0.7});
  CHECK(bucket_range(LambdaBucket::kHigh) == std::pair{0.7, 1.0});
  CHECK(bucket_of(0.4) == LambdaBucket::kLow);
  CHECK(bucket_of(0.41) == LambdaBucket::kMid);
  CHECK(bucket_of(0.95) == LambdaBucket::kHigh);
  for (auto b : {LambdaBucket::kLow, LambdaBucket::kMid, LambdaBucket::kHigh}) {
    CHECK(parse_lambda_bucket(to_string(b)) == b);
  }
  CHECK_THROWS_AS(parse_lambda_bucket("none"), std::invalid_argument);

  Rng rng(5);
  const auto v = sample_lambda(50, 0.4, 0.7, rng);
  CHECK(v.lambda.size() == 50);
  for (double l : v.lambda) {
    CHECK(l >= 0.4);
    CHECK(l <= 0.7);
  }
  CHECK_THROWS_AS(sample_lambda(3, 0.8, 0.2, rng), std::invalid_argument);
}
