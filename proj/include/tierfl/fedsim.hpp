#pragma once

// Round engine for partitioned federated training.
//
// A Centaur iteration spans two communication rounds: on-device classifier
// training with data selection followed by classifier averaging, then
// full-model training on the access points over the transmitted samples
// followed by full averaging. The baselines spend one communication round per
// iteration: AP-only uploads everything and trains the full model on the AP;
// UCD-only trains the classifier on-device and never uploads samples.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tierfl/config.hpp"
#include "tierfl/cost.hpp"
#include "tierfl/datagen.hpp"
#include "tierfl/mobility.hpp"
#include "tierfl/nn.hpp"
#include "tierfl/partitioner.hpp"
#include "tierfl/selector.hpp"

namespace tierfl {

/// Per-client simulation state. Mutated only by that client's own phase.
struct ClientState {
  std::size_t client_id = 0;
  ClientShards shards;
  SelectionState selection;
  ConnectivityTrace connectivity;
  std::optional<Eoam> eoam;
  /// Transmit-set samples (training-set indices) not yet uploaded, in
  /// selection order without duplicates.
  std::vector<std::size_t> pending_transmit;
  /// Samples dropped because the pending buffer hit the storage limit.
  std::size_t dropped_for_storage = 0;
  Rng rng;

  ClientState(std::size_t id, ClientShards shards, std::size_t queue_capacity, Rng rng)
      : client_id(id),
        shards(std::move(shards)),
        selection(queue_capacity),
        rng(std::move(rng)) {}
};

/// Everything a phase needs besides the client itself.
struct PhaseContext {
  const Dataset& train;
  const ExperimentConfig& config;
  DeviceProfile ucd;
  DeviceProfile ap;
  /// Offline units the client spends in this phase.
  std::size_t offline_units = 0;
};

struct UcdPhaseResult {
  nn::Network classifier;
  /// Training-set indices newly added to the transmit set.
  std::vector<std::size_t> transmit_additions;
  std::vector<CostRecord> records;
  /// Samples that reached the classifier-update path.
  std::size_t trained_samples = 0;
  std::size_t discarded_samples = 0;
  /// Largest per-phase storage footprint in bytes (classifier set + queues).
  std::uint64_t peak_storage_bytes = 0;
  /// True when no classifier update happened.
  bool no_op = true;
};

/// On-device phase: for every epoch and batch, frozen-encoder forward pass,
/// loss-based routing, classifier backward over the classifier set (whose
/// last-layer norms also drive gradient-based routing), and one SGD step on
/// the classifier. With `use_selection` false every sample trains the
/// classifier and nothing is transmitted.
UcdPhaseResult ucd_phase(ClientState& client, const ModelPartition& global,
                         const PhaseContext& ctx, bool use_selection);

struct ApPhaseResult {
  ModelPartition model;
  std::vector<CostRecord> records;
  std::size_t uploaded_samples = 0;
  std::size_t trained_samples = 0;
  bool no_op = true;
};

/// Access-point phase: uploads `samples` from the UCD (metered as UCD uplink)
/// and runs full-model SGD over them for the configured number of epochs,
/// plus `extra_epochs` passes over `extra_samples` (also uploaded).
ApPhaseResult ap_phase(ClientState& client, const ModelPartition& global,
                       std::span<const std::size_t> samples, const PhaseContext& ctx,
                       std::span<const std::vector<std::size_t>> extra_epochs = {});

/// K = round(A * fraction) distinct ids, uniformly without replacement,
/// returned in ascending order.
std::vector<std::size_t> sample_clients(std::size_t all, double fraction, Rng& rng);

/// Elementwise mean; `weights`, when given, must be non-negative with a
/// positive sum and replaces the uniform 1/K. Throws nn::DimensionError on
/// shape mismatch and std::invalid_argument on an empty list.
nn::Network classifier_fedavg(std::span<const nn::Network> classifiers,
                              std::span<const double> weights = {});
ModelPartition full_fedavg(std::span<const ModelPartition> models,
                           std::span<const double> weights = {});

struct RoundMetrics {
  std::size_t round = 0;
  double accuracy = 0.0;
  std::size_t participants = 0;
  std::size_t uploaded_samples = 0;
};

struct RunResult {
  StrategyKind strategy = StrategyKind::kCentaur;
  std::uint64_t seed = 0;
  std::vector<RoundMetrics> rounds;
  ModelPartition final_model;
  CostLedger ledger;
  ClassifierCandidate classifier;
  std::size_t storage_warnings = 0;
  std::size_t empty_clients = 0;
  /// Mean of the global connectivity vector when mobility is on.
  std::optional<double> mean_lambda;

  double final_accuracy() const { return rounds.empty() ? 0.0 : rounds.back().accuracy; }
  double best_accuracy() const;
};

/// Everything derived from (config, seed) before round one: data splits,
/// client shards, the chosen classifier, and the pretrained initial model.
struct SimulationSetup {
  Dataset train;
  Dataset test;
  std::vector<std::vector<std::size_t>> client_indices;
  std::vector<ClientShards> shards;
  ClassifierCandidate classifier;
  ModelPartition initial;
};

/// Throws BudgetInfeasible when no classifier fits, ConfigError on an
/// inconsistent configuration.
SimulationSetup prepare(const ExperimentConfig& config, std::uint64_t seed);

RunResult run(StrategyKind strategy, const ExperimentConfig& config, std::uint64_t seed);

}  // namespace tierfl
