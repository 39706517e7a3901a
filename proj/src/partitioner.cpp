#include "tierfl/partitioner.hpp"

#include <numeric>

namespace tierfl {

std::string to_string(SelectionPolicy policy) {
  return policy == SelectionPolicy::kSmallestFeasible ? "smallest-feasible"
                                                      : "largest-feasible";
}

SelectionPolicy parse_selection_policy(const std::string& text) {
  if (text == "smallest-feasible") return SelectionPolicy::kSmallestFeasible;
  if (text == "largest-feasible") return SelectionPolicy::kLargestFeasible;
  throw std::invalid_argument("unknown selection policy '" + text +
                              "' (expected smallest-feasible or largest-feasible)");
}

std::size_t count_params(const nn::Network& net) { return net.param_count(); }

std::size_t candidate_params(const ClassifierCandidate& candidate, std::size_t input_dim) {
  std::size_t params = 0;
  std::size_t in = input_dim;
  for (std::size_t w : candidate.hidden_widths) {
    params += in * w + w;
    in = w;
  }
  return params + in * candidate.output_classes + candidate.output_classes;
}

bool fits(std::size_t params, const MemoryBudget& budget) {
  return static_cast<std::uint64_t>(params) * budget.bytes_per_param < budget.available_bytes;
}

ClassifierCandidate select_classifier(std::span<const ClassifierCandidate> candidates,
                                      std::size_t input_dim, const MemoryBudget& budget,
                                      SelectionPolicy policy) {
  if (candidates.empty()) throw std::invalid_argument("no classifier candidates");
  if (budget.available_bytes == 0 || budget.bytes_per_param == 0) {
    throw std::invalid_argument("memory budget and bytes per parameter must be positive");
  }
  const ClassifierCandidate* best = nullptr;
  std::size_t best_params = 0;
  for (const auto& c : candidates) {
    const std::size_t p = candidate_params(c, input_dim);
    if (!fits(p, budget)) continue;
    const bool better = best == nullptr ||
                        (policy == SelectionPolicy::kSmallestFeasible ? p < best_params
                                                                      : p > best_params);
    if (better) {
      best = &c;
      best_params = p;
    }
  }
  if (best == nullptr) {
    throw BudgetInfeasible("budget infeasible: no classifier fits in " +
                           std::to_string(budget.available_bytes) + " bytes at " +
                           std::to_string(budget.bytes_per_param) + " bytes/param");
  }
  return *best;
}

std::vector<ClassifierCandidate> standard_classifier_family(std::size_t classes) {
  return {{"small", {}, classes}, {"medium", {64}, classes}, {"large", {128}, classes}};
}

nn::Network build_encoder(const EncoderSpec& spec, Rng& rng) {
  nn::Network net;
  std::size_t in = spec.input_dim;
  for (std::size_t w : spec.widths) {
    net.layers.push_back(nn::make_dense(in, w, nn::Activation::kReLU, rng));
    in = w;
  }
  return net;
}

nn::Network build_classifier(const ClassifierCandidate& candidate, std::size_t input_dim,
                             Rng& rng) {
  if (candidate.output_classes == 0) throw std::invalid_argument("classifier needs classes");
  nn::Network net;
  std::size_t in = input_dim;
  for (std::size_t w : candidate.hidden_widths) {
    if (w == 0) throw std::invalid_argument("classifier hidden width must be positive");
    net.layers.push_back(nn::make_dense(in, w, nn::Activation::kReLU, rng));
    in = w;
  }
  net.layers.push_back(
      nn::make_dense(in, candidate.output_classes, nn::Activation::kIdentity, rng));
  return net;
}

ModelPartition build_partition(const EncoderSpec& encoder, const ClassifierCandidate& chosen,
                               const MemoryBudget& budget, std::uint64_t seed) {
  Rng rng(seed);
  ModelPartition part;
  part.encoder = build_encoder(encoder, rng);
  part.classifier = build_classifier(chosen, encoder.output_dim(), rng);
  part.encoder.validate();
  part.classifier.validate();
  if (!part.encoder.empty() && part.encoder.output_dim() != part.classifier.input_dim()) {
    throw nn::DimensionError(static_cast<int>(part.encoder.layers.size()),
                             "encoder output does not match classifier input");
  }
  if (!fits(count_params(part.classifier), budget)) {
    throw BudgetInfeasible("classifier '" + chosen.name + "' exceeds the memory budget");
  }
  return part;
}

ModelPartition split_partition(const nn::Network& full, std::size_t encoder_layers) {
  if (encoder_layers > full.layers.size()) {
    throw nn::DimensionError(-1, "encoder depth exceeds network depth");
  }
  ModelPartition part;
  const auto cut = full.layers.begin() + static_cast<std::ptrdiff_t>(encoder_layers);
  part.encoder.layers.assign(full.layers.begin(), cut);
  part.classifier.layers.assign(cut, full.layers.end());
  return part;
}

nn::Network pretrain_encoder(nn::Network encoder, const nn::Tensor2D& features,
                             std::span<const nn::Label> labels, std::size_t classes,
                             const PretrainOptions& options, Rng& rng) {
  if (options.epochs == 0 || features.rows() == 0 || encoder.empty()) return encoder;
  nn::Network head;
  head.layers.push_back(
      nn::make_dense(encoder.output_dim(), classes, nn::Activation::kIdentity, rng));
  nn::Network full = nn::concat(encoder, head);
  std::vector<std::size_t> order(features.rows());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  for (std::size_t e = 0; e < options.epochs; ++e) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<nn::Label> y;
      y.reserve(idx.size());
      for (std::size_t i : idx) y.push_back(labels[i]);
      auto lg = nn::loss_and_grad(full, features.select_rows(idx), y);
      nn::apply_sgd(full, lg.grads, options.lr);
    }
  }
  return split_partition(full, encoder.layers.size()).encoder;
}

}  // namespace tierfl
