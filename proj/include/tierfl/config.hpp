#pragma once

// Experiment configuration and its JSON form.
//
// Every section and key is optional; omitted keys keep the defaults below.
// Unknown keys are rejected with the full dotted path of the offending field.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tierfl/cost.hpp"
#include "tierfl/partitioner.hpp"
#include "tierfl/selector.hpp"

#include <json.hpp>

namespace tierfl {

enum class StrategyKind { kCentaur, kApOnly, kUcdOnly };

std::string to_string(StrategyKind kind);
StrategyKind parse_strategy(const std::string& text);

/// Thrown for schema violations; `field` is the dotted path of the bad key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct DatasetConfig {
  std::size_t classes = 10;
  std::size_t per_class = 200;
  std::size_t dim = 32;
  double spread = 1.0;
  /// Held-out IID test samples per class, generated alongside the training set.
  std::size_t test_per_class = 100;
  /// Samples per class reserved for central encoder pretraining.
  std::size_t pretrain_per_class = 30;
  /// When set, features and labels come from this CSV instead of blobs.
  std::string csv_path;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct PartitionConfig {
  std::size_t num_clients = 20;
  double lda_alpha = 1000.0;
  double online_fraction = 0.5;

  friend bool operator==(const PartitionConfig&, const PartitionConfig&) = default;
};

struct TrainingConfig {
  /// Communication rounds R.
  std::size_t rounds = 40;
  double participation = 0.5;
  std::size_t epochs = 3;
  std::size_t batch_size = 64;
  double lr = 0.2;
  double backward_mac_multiplier = 2.0;
  /// Weight client models by trained-sample count instead of 1/K.
  bool weighted_aggregation = false;
  std::uint64_t bytes_per_sample = 30000;
  std::size_t workers = 1;

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

struct PretrainConfig {
  std::size_t epochs = 5;
  double lr = 0.05;
  /// Fraction of pretraining labels replaced by a random permutation of
  /// themselves; 1.0 pretrains on fully scrambled labels.
  double label_permute_fraction = 1.0;

  friend bool operator==(const PretrainConfig&, const PretrainConfig&) = default;
};

struct ModelConfig {
  std::vector<std::size_t> encoder_widths{64, 16};
  std::vector<ClassifierCandidate> classifier_candidates;  // empty: standard family
  std::uint64_t memory_budget_bytes = 8192;
  std::uint64_t bytes_per_param = 4;
  SelectionPolicy policy = SelectionPolicy::kLargestFeasible;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct DevicesConfig {
  DeviceTable ucd = DeviceTable::ucd_default();
  DeviceTable ap = DeviceTable::ap_default();

  friend bool operator==(const DevicesConfig&, const DevicesConfig&) = default;
};

struct MobilityConfig {
  bool enabled = false;
  std::size_t slots = 5;
  std::size_t locations = 3;
  double lambda_min = 0.1;
  double lambda_max = 1.0;
  double extra_fraction = 0.2;

  friend bool operator==(const MobilityConfig&, const MobilityConfig&) = default;
};

struct RunConfig {
  std::vector<StrategyKind> strategies{StrategyKind::kCentaur, StrategyKind::kUcdOnly,
                                       StrategyKind::kApOnly};
  std::vector<std::uint64_t> seeds{1};
  std::string outdir = "out";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  PartitionConfig partition;
  TrainingConfig training;
  PretrainConfig pretrain;
  ModelConfig model;
  SelectionParams selection;
  DevicesConfig devices;
  MobilityConfig mobility;
  RunConfig run;

  /// Candidates to search, falling back to the standard family.
  std::vector<ClassifierCandidate> candidates() const;
  MemoryBudget budget() const { return {model.memory_budget_bytes, model.bytes_per_param}; }

  /// Cross-field checks; throws ConfigError naming the field.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Parses and validates. Throws ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets one numeric or string field by dotted path ("selection.alpha") or by a
/// short alias (alpha, beta, gamma, lr, lda_alpha, ...). Re-validates.
ExperimentConfig with_override(const ExperimentConfig& config, const std::string& key,
                               const std::string& value);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);
/// Hash of the data-defining sections only, so runs with different strategies
/// or seeds over the same data compare as compatible.
std::string dataset_hash(const ExperimentConfig& config);

}  // namespace tierfl
