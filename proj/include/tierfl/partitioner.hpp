#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tierfl/nn.hpp"

namespace tierfl {

/// A fully-connected classifier head: ReLU hidden layers then a linear
/// output layer of width `output_classes`.
struct ClassifierCandidate {
  std::string name;
  std::vector<std::size_t> hidden_widths;
  std::size_t output_classes = 0;

  friend bool operator==(const ClassifierCandidate&, const ClassifierCandidate&) = default;
};

struct MemoryBudget {
  std::uint64_t available_bytes = 0;
  std::uint64_t bytes_per_param = 4;
};

enum class SelectionPolicy { kSmallestFeasible, kLargestFeasible };

std::string to_string(SelectionPolicy policy);
SelectionPolicy parse_selection_policy(const std::string& text);

class BudgetInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t count_params(const nn::Network& net);

/// Parameter count of `candidate` when fed features of width `input_dim`.
std::size_t candidate_params(const ClassifierCandidate& candidate, std::size_t input_dim);

/// True when params * bytes_per_param < available_bytes (strict).
bool fits(std::size_t params, const MemoryBudget& budget);

/// Picks among candidates whose parameter memory strictly fits the budget:
/// the fewest parameters under kSmallestFeasible, the most under
/// kLargestFeasible. Ties go to the earlier candidate. Throws BudgetInfeasible
/// when nothing fits and std::invalid_argument on an empty list.
ClassifierCandidate select_classifier(std::span<const ClassifierCandidate> candidates,
                                      std::size_t input_dim, const MemoryBudget& budget,
                                      SelectionPolicy policy);

/// small = {} , medium = {64}, large = {128} hidden units over z outputs.
std::vector<ClassifierCandidate> standard_classifier_family(std::size_t classes);

/// Encoder as a stack of ReLU dense layers.
struct EncoderSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> widths;

  std::size_t output_dim() const { return widths.empty() ? input_dim : widths.back(); }
};

struct ModelPartition {
  nn::Network encoder;
  nn::Network classifier;
  bool encoder_frozen_on_ucd = true;

  nn::Network full() const { return nn::concat(encoder, classifier); }

  friend bool operator==(const ModelPartition&, const ModelPartition&) = default;
};

nn::Network build_encoder(const EncoderSpec& spec, Rng& rng);
nn::Network build_classifier(const ClassifierCandidate& candidate, std::size_t input_dim,
                             Rng& rng);

/// Builds encoder and classifier from one seed and checks the partition
/// invariants: encoder output feeds the classifier and the classifier's
/// parameter memory fits the budget.
ModelPartition build_partition(const EncoderSpec& encoder, const ClassifierCandidate& chosen,
                               const MemoryBudget& budget, std::uint64_t seed);

/// Splits `full` back into an encoder of `encoder_layers` layers and the rest.
ModelPartition split_partition(const nn::Network& full, std::size_t encoder_layers);

struct PretrainOptions {
  std::size_t epochs = 0;
  std::size_t batch_size = 64;
  double lr = 0.01;
};

/// Trains `encoder` centrally under a throwaway linear head and returns the
/// trained encoder. Labels are used as given; callers that want an
/// imperfect encoder pass a corrupted label vector.
nn::Network pretrain_encoder(nn::Network encoder, const nn::Tensor2D& features,
                             std::span<const nn::Label> labels, std::size_t classes,
                             const PretrainOptions& options, Rng& rng);

}  // namespace tierfl
