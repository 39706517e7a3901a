#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "tierfl/config.hpp"

using namespace tierfl;
using nlohmann::json;

namespace {

std::string error_field(const json& j) {
  try {
    config_from_json(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("default config round-trips through JSON") {
  const ExperimentConfig def;
  CHECK_NOTHROW(def.validate());
  const json j = to_json(def);
  CHECK(config_from_json(j) == def);
  CHECK(to_json(config_from_json(j)) == j);
}

TEST_CASE("customized config round-trips through JSON") {
  ExperimentConfig cfg;
  cfg.selection.alpha = 1.5;
  cfg.training.weighted_aggregation = true;
  cfg.model.classifier_candidates = {{"tiny", {}, 10}, {"wide", {32, 8}, 10}};
  cfg.model.policy = SelectionPolicy::kSmallestFeasible;
  cfg.mobility.enabled = true;
  cfg.run.strategies = {StrategyKind::kApOnly};
  cfg.run.seeds = {3, 4};
  cfg.devices.ucd.cpu_freq_mhz = 50;
  CHECK(config_from_json(to_json(cfg)) == cfg);
}

TEST_CASE("partial JSON fills in defaults") {
  const auto cfg = config_from_json(json{{"selection", {{"alpha", 2.0}}}});
  CHECK(cfg.selection.alpha == 2.0);
  CHECK(cfg.selection.beta == 3.0);
  CHECK(cfg.training.rounds == 40);
}

TEST_CASE("schema violations name the field") {
  CHECK(error_field(json{{"selection", {{"alhpa", 1.0}}}}) == "selection.alhpa");
  CHECK(error_field(json{{"bogus", 1}}) == "bogus");
  CHECK(error_field(json{{"training", {{"rounds", "many"}}}}) == "training.rounds");
  CHECK(error_field(json{{"training", {{"participation", 0.0}}}}) == "training.participation");
  CHECK(error_field(json{{"selection", {{"alpha", -1.0}}}}).rfind("selection", 0) == 0);
  CHECK(error_field(json{{"run", {{"strategies", {"centaur", "nope"}}}}}).rfind("run.strategies", 0) ==
        0);
  CHECK(error_field(json{{"partition", {{"lda_alpha", 0.0}}}}) == "partition.lda_alpha");
}

TEST_CASE("strategy names") {
  for (auto s : {StrategyKind::kCentaur, StrategyKind::kUcdOnly, StrategyKind::kApOnly}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
  CHECK(to_string(StrategyKind::kUcdOnly) == "ucd_only");
  CHECK_THROWS(parse_strategy("fedprox"));
}

TEST_CASE("overrides by alias and dotted path") {
  const ExperimentConfig def;
  CHECK(with_override(def, "alpha", "1").selection.alpha == 1.0);
  CHECK(with_override(def, "selection.beta", "5").selection.beta == 5.0);
  CHECK(with_override(def, "rounds", "10").training.rounds == 10);
  CHECK(with_override(def, "mobility", "true").mobility.enabled);
  CHECK(with_override(def, "policy", "smallest-feasible").model.policy ==
        SelectionPolicy::kSmallestFeasible);
  CHECK(with_override(def, "lda_alpha", "0.1").partition.lda_alpha == 0.1);
  CHECK_THROWS_AS(with_override(def, "nonexistent", "1"), ConfigError);
  CHECK_THROWS_AS(with_override(def, "alpha", "abc"), ConfigError);
  CHECK_THROWS_AS(with_override(def, "participation", "0"), ConfigError);
}

TEST_CASE("hashes") {
  const ExperimentConfig def;
  CHECK(config_hash(def).size() == 16);
  CHECK(config_hash(def) == config_hash(ExperimentConfig{}));
  ExperimentConfig other = def;
  other.run.outdir = "elsewhere";
  other.training.workers = 4;
  CHECK(config_hash(other) == config_hash(def));
  other.selection.alpha = 1.0;
  CHECK(config_hash(other) != config_hash(def));
  CHECK(dataset_hash(other) == dataset_hash(def));
  other.partition.lda_alpha = 0.5;
  CHECK(dataset_hash(other) != dataset_hash(def));
}

TEST_CASE("loading from a file") {
  const auto path = std::filesystem::temp_directory_path() / "tierfl_test_config.json";
  {
    std::ofstream out(path);
    out << R"({"training": {"rounds": 12}, "run": {"seeds": [7]}})";
  }
  const auto cfg = load_config(path);
  CHECK(cfg.training.rounds == 12);
  CHECK(cfg.run.seeds == std::vector<std::uint64_t>{7});
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_config(path), ConfigError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_config(path), ConfigError);
}
