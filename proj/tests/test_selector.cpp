#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tierfl/selector.hpp"

using namespace tierfl;

namespace {

// Brute-force count of queued values not above v.
double scan_cdf(const std::vector<double>& window, double v) {
  std::size_t n = 0;
  for (double q : window) {
    if (q <= v) ++n;
  }
  return static_cast<double>(n) / static_cast<double>(window.size());
}

SlidingCdf filled(std::size_t capacity, std::size_t count, Rng& rng) {
  SlidingCdf cdf(capacity);
  for (std::size_t i = 0; i < count; ++i) cdf.push(uniform01(rng));
  return cdf;
}

}  // namespace

TEST_CASE("cdf examples") {
  SlidingCdf cdf(10);
  CHECK_FALSE(cdf.eval(1.0).has_value());
  for (double v : {1.0, 2.0, 3.0, 4.0}) cdf.push(v);
  CHECK(*cdf.eval(2.0) == 0.5);
  CHECK(*cdf.eval(0.5) == 0.0);
  CHECK(*cdf.eval(4.0) == 1.0);
  CHECK(*cdf.eval(9.0) == 1.0);
}

TEST_CASE("cdf matches a linear scan over the retained window") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cap = 1 + uniform_index(rng, 40);
    SlidingCdf cdf(cap);
    std::vector<double> all;
    const std::size_t pushes = uniform_index(rng, 120) + 1;
    for (std::size_t i = 0; i < pushes; ++i) {
      // Coarse values so ties are common.
      const double v = static_cast<double>(uniform_index(rng, 10));
      all.push_back(v);
      cdf.push(v);
    }
    const std::size_t keep = std::min(cap, all.size());
    const std::vector<double> window(all.end() - static_cast<std::ptrdiff_t>(keep), all.end());
    CHECK(cdf.size() == keep);
    CHECK(std::equal(window.begin(), window.end(), cdf.values().begin()));
    for (double v = -1.0; v <= 10.0; v += 0.5) CHECK(*cdf.eval(v) == scan_cdf(window, v));
  }
}

TEST_CASE("queue evicts the oldest value first") {
  SlidingCdf cdf(3);
  for (double v : {5.0, 1.0, 2.0, 3.0}) cdf.push(v);
  CHECK(cdf.size() == 3);
  CHECK(cdf.values().front() == 1.0);
  CHECK(*cdf.eval(4.0) == 1.0);
  CHECK_THROWS_AS(SlidingCdf(0), std::invalid_argument);
}

TEST_CASE("probability laws at fixed points") {
  CHECK(discard_probability(1.0, 5.0) == 0.0);
  CHECK(loss_transmit_probability(1.0, 3.0) == 1.0);
  CHECK(discard_probability(0.5, 5.0) == doctest::Approx(0.96875).epsilon(1e-15));
  CHECK(grad_transmit_probability(0.3, 0.0) == 1.0);
  CHECK(grad_transmit_probability(0.5, 200.0) < 1e-50);
}

TEST_CASE("default exponents are 5, 3, 0") {
  const SelectionParams p;
  CHECK(p.alpha == 5.0);
  CHECK(p.beta == 3.0);
  CHECK(p.gamma == 0.0);
}

TEST_CASE("parameter validation") {
  SelectionParams p;
  CHECK_NOTHROW(p.validate());
  p.alpha = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.beta = std::nan("");
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.warmup_min = p.queue_capacity + 1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("warmup routes everything to the classifier and still enqueues") {
  SelectionParams p;
  p.warmup_min = 8;
  SlidingCdf cdf(p.queue_capacity);
  Rng rng(2);
  const Rng before = rng;
  const std::vector<double> losses{0.1, 5.0, 2.0, 0.3, 7.0};
  const auto routed = route_by_loss(losses, cdf, p, rng);
  CHECK(routed.classifier == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(routed.discard.empty());
  CHECK(routed.transmit.empty());
  CHECK(cdf.size() == 5);
  const bool untouched = rng == before;
  CHECK(untouched);

  SlidingCdf gcdf(p.queue_capacity);
  const std::vector<std::size_t> idx{0, 1};
  CHECK(route_by_grad(std::vector<double>{1.0, 2.0}, idx, gcdf, p, rng).empty());
  CHECK(gcdf.size() == 2);
}

TEST_CASE("routing partitions the batch") {
  Rng rng(3);
  SelectionParams p;
  auto cdf = filled(p.queue_capacity, p.queue_capacity, rng);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> losses(1 + uniform_index(rng, 64));
    for (double& l : losses) l = uniform01(rng);
    const auto r = route_by_loss(losses, cdf, p, rng);
    std::vector<std::size_t> all = r.discard;
    all.insert(all.end(), r.classifier.begin(), r.classifier.end());
    all.insert(all.end(), r.transmit.begin(), r.transmit.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(losses.size());
    for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = i;
    CHECK(all == expect);
  }
}

TEST_CASE("gamma zero copies the whole classifier set") {
  Rng rng(4);
  SelectionParams p;
  auto cdf = filled(p.queue_capacity, p.queue_capacity, rng);
  std::vector<double> norms(20);
  std::vector<std::size_t> idx(20);
  for (std::size_t i = 0; i < 20; ++i) {
    norms[i] = uniform01(rng);
    idx[i] = 3 * i;
  }
  CHECK(route_by_grad(norms, idx, cdf, p, rng) == idx);
  CHECK_THROWS_AS(route_by_grad(norms, std::vector<std::size_t>{1}, cdf, p, rng),
                  std::invalid_argument);
}

TEST_CASE("monte carlo routing frequencies follow the analytic laws") {
  struct Case {
    double alpha, beta, gamma;
  };
  for (const Case c : {Case{5, 3, 0}, Case{1, 1, 1}, Case{3, 5, 2}}) {
    SelectionParams p;
    p.alpha = c.alpha;
    p.beta = c.beta;
    p.gamma = c.gamma;
    p.queue_capacity = 100;
    p.warmup_min = 1;
    Rng rng(5);
    for (double q : {0.25, 0.6, 0.9}) {
      // Queue 0.01..1.00 so a probe of q sits at CDF exactly q.
      const std::size_t n = 10000;
      std::size_t discard = 0;
      std::size_t transmit = 0;
      std::size_t grad = 0;
      for (std::size_t i = 0; i < n; ++i) {
        SlidingCdf cdf(100);
        SlidingCdf gcdf(100);
        for (int k = 1; k <= 100; ++k) {
          cdf.push(k / 100.0);
          gcdf.push(k / 100.0);
        }
        const double probe = q;
        const auto r = route_by_loss(std::vector<double>{probe}, cdf, p, rng);
        discard += r.discard.size();
        transmit += r.transmit.size();
        const std::vector<std::size_t> one{0};
        grad += route_by_grad(std::vector<double>{probe}, one, gcdf, p, rng).size();
      }
      const double pn = 1.0 - std::pow(q, c.alpha);
      const double pm = (1.0 - pn) * std::pow(q, c.beta);
      const double pg = std::pow(q, c.gamma);
      CHECK(std::abs(discard / double(n) - pn) <= 0.02);
      CHECK(std::abs(transmit / double(n) - pm) <= 0.02);
      CHECK(std::abs(grad / double(n) - pg) <= 0.02);
    }
  }
}

TEST_CASE("higher loss never raises discard or lowers transmit probability") {
  Rng rng(6);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto cdf = filled(1 + uniform_index(rng, 200), 1 + uniform_index(rng, 300), rng);
    double a = uniform01(rng) * 1.2 - 0.1;
    double b = uniform01(rng) * 1.2 - 0.1;
    if (a > b) std::swap(a, b);
    const double qa = *cdf.eval(a);
    const double qb = *cdf.eval(b);
    if (discard_probability(qb, 5.0) > discard_probability(qa, 5.0)) ++violations;
    if (loss_transmit_probability(qb, 3.0) < loss_transmit_probability(qa, 3.0)) ++violations;
  }
  CHECK(violations == 0);
}
