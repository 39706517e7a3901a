#include <doctest.h>

#include <algorithm>
#include <stdexcept>

#include "tierfl/partitioner.hpp"

using namespace tierfl;

namespace {

// Counts every weight and bias entry one by one.
std::size_t enumerate_params(const nn::Network& net) {
  std::size_t n = 0;
  for (const auto& layer : net.layers) {
    for (std::size_t r = 0; r < layer.weights.rows(); ++r) {
      for (std::size_t c = 0; c < layer.weights.cols(); ++c) ++n;
    }
    for (std::size_t b = 0; b < layer.bias.size(); ++b) ++n;
  }
  return n;
}

// Dense chain in -> hidden... -> z, counted as in*out + out per layer.
std::size_t chain_params(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t z) {
  std::size_t total = 0;
  std::size_t prev = in;
  for (std::size_t h : hidden) {
    total += prev * h + h;
    prev = h;
  }
  return total + prev * z + z;
}

}  // namespace

TEST_CASE("count_params examples") {
  Rng rng(1);
  nn::Network one{{nn::make_dense(8, 4, nn::Activation::kIdentity, rng)}};
  CHECK(count_params(one) == 36);
  CHECK(count_params(nn::Network{}) == 0);
}

TEST_CASE("count_params matches entry enumeration on random networks") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    ClassifierCandidate c{"c", {}, 2 + uniform_index(rng, 9)};
    const std::size_t depth = uniform_index(rng, 3);
    for (std::size_t d = 0; d < depth; ++d) c.hidden_widths.push_back(1 + uniform_index(rng, 20));
    const std::size_t in = 1 + uniform_index(rng, 30);
    const auto net = build_classifier(c, in, rng);
    CHECK(count_params(net) == enumerate_params(net));
    CHECK(candidate_params(c, in) == count_params(net));
  }
}

TEST_CASE("standard family parameter counts for ten classes over 64 features") {
  const auto family = standard_classifier_family(10);
  REQUIRE(family.size() == 3);
  for (const auto& c : family) {
    CHECK(candidate_params(c, 64) == chain_params(64, c.hidden_widths, 10));
  }
  CHECK(candidate_params(family[0], 64) == 650);
  CHECK(candidate_params(family[1], 64) == 4810);
  CHECK(candidate_params(family[2], 64) == 9610);
}

TEST_CASE("select_classifier examples") {
  // Widths chosen so the single-layer parameter counts are 100, 500, 2000.
  const std::vector<ClassifierCandidate> cands{
      {"a", {}, 10}, {"b", {}, 50}, {"c", {}, 200}};
  const MemoryBudget budget{2100, 4};
  REQUIRE(candidate_params(cands[0], 9) == 100);
  REQUIRE(candidate_params(cands[1], 9) == 500);
  REQUIRE(candidate_params(cands[2], 9) == 2000);
  CHECK(select_classifier(cands, 9, budget, SelectionPolicy::kSmallestFeasible).name == "a");
  CHECK(select_classifier(cands, 9, budget, SelectionPolicy::kLargestFeasible).name == "b");
  CHECK_THROWS_AS(select_classifier(cands, 9, {1, 4}, SelectionPolicy::kSmallestFeasible),
                  BudgetInfeasible);
  CHECK_THROWS_AS(select_classifier({}, 9, budget, SelectionPolicy::kSmallestFeasible),
                  std::invalid_argument);
}

TEST_CASE("the budget inequality is strict") {
  const std::vector<ClassifierCandidate> cands{{"a", {}, 10}};  // 100 params over 9 inputs
  CHECK_THROWS_AS(select_classifier(cands, 9, {400, 4}, SelectionPolicy::kLargestFeasible),
                  BudgetInfeasible);
  CHECK(select_classifier(cands, 9, {401, 4}, SelectionPolicy::kLargestFeasible).name == "a");
  CHECK_FALSE(fits(100, {400, 4}));
  CHECK(fits(100, {401, 4}));
}

TEST_CASE("budgets below the smallest candidate always fail") {
  Rng rng(3);
  const auto family = standard_classifier_family(10);
  const std::size_t smallest = candidate_params(family[0], 16) * 4;
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t bytes = uniform_index(rng, smallest + 1);
    CHECK_THROWS_AS(
        select_classifier(family, 16, {bytes, 4}, SelectionPolicy::kLargestFeasible),
        BudgetInfeasible);
  }
}

TEST_CASE("policy names round-trip") {
  for (auto p : {SelectionPolicy::kSmallestFeasible, SelectionPolicy::kLargestFeasible}) {
    CHECK(parse_selection_policy(to_string(p)) == p);
  }
  CHECK_THROWS(parse_selection_policy("median"));
}

TEST_CASE("build_partition is deterministic and composes") {
  const EncoderSpec spec{12, {16, 8}};
  const ClassifierCandidate chosen{"m", {6}, 3};
  const MemoryBudget budget{4096, 4};
  const auto a = build_partition(spec, chosen, budget, 42);
  const auto b = build_partition(spec, chosen, budget, 42);
  CHECK(a == b);
  CHECK(a.encoder_frozen_on_ucd);
  CHECK(a.encoder.output_dim() == a.classifier.input_dim());
  CHECK(count_params(a.classifier) * budget.bytes_per_param < budget.available_bytes);

  Rng rng(4);
  nn::Tensor2D x(5, 12);
  for (double& v : x.values()) v = uniform01(rng);
  const auto split_logits = nn::forward(a.classifier, nn::forward(a.encoder, x).logits).logits;
  CHECK(nn::forward(a.full(), x).logits == split_logits);

  CHECK(split_partition(a.full(), a.encoder.layers.size()).encoder == a.encoder);
  CHECK(split_partition(a.full(), a.encoder.layers.size()).classifier == a.classifier);
}

TEST_CASE("build_partition rejects an over-budget classifier") {
  const EncoderSpec spec{12, {16}};
  const ClassifierCandidate big{"big", {64}, 3};
  CHECK_THROWS_AS(build_partition(spec, big, {64, 4}, 1), BudgetInfeasible);
}

TEST_CASE("pretraining changes the encoder and keeps its shape") {
  const EncoderSpec spec{4, {6}};
  Rng rng(5);
  const auto enc = build_encoder(spec, rng);
  nn::Tensor2D x(20, 4);
  std::vector<nn::Label> y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    y[i] = static_cast<nn::Label>(i % 2);
    for (std::size_t j = 0; j < 4; ++j) x(i, j) = uniform01(rng) + (y[i] ? 1.0 : -1.0);
  }
  Rng train_rng(6);
  const auto trained = pretrain_encoder(enc, x, y, 2, {3, 8, 0.1}, train_rng);
  CHECK(trained.layers.size() == enc.layers.size());
  CHECK(trained.output_dim() == enc.output_dim());
  CHECK_FALSE(trained == enc);

  Rng idle_rng(6);
  CHECK(pretrain_encoder(enc, x, y, 2, {0, 8, 0.1}, idle_rng) == enc);
}
