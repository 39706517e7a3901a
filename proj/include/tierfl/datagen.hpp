#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tierfl/nn.hpp"
#include "tierfl/rng.hpp"

namespace tierfl {

struct Dataset {
  nn::Tensor2D features;
  std::vector<nn::Label> labels;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Throws std::invalid_argument if rows and labels disagree or a label is
  /// outside [0, classes).
  void validate() const;
};

/// One isotropic Gaussian cluster per class. Centers are drawn from N(0, I)
/// in `dim` dimensions and points scatter around them with standard
/// deviation `spread`. Rows are ordered class by class.
Dataset make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double spread,
                   std::uint64_t seed);

/// Reads a CSV with a header row. The column named "label" holds integer class
/// ids; every other column is a feature. Classes = max label + 1.
Dataset load_csv(const std::filesystem::path& path);

/// Class-wise Dirichlet allocation. For each class, client proportions are
/// drawn from Dirichlet(lda_alpha) and that class's shuffled samples are cut
/// at the cumulative proportions, so every sample lands with exactly one
/// client. Clients may end up empty at small alpha.
std::vector<std::vector<std::size_t>> dirichlet_partition(const Dataset& data,
                                                          std::size_t num_clients,
                                                          double lda_alpha, std::uint64_t seed);

struct ClientShards {
  std::vector<std::size_t> online;
  std::vector<std::size_t> extra;
};

/// Random disjoint split; the online shard gets round(fraction * n) samples.
ClientShards split_online_extra(std::span<const std::size_t> client_indices, double fraction,
                                Rng& rng);

/// Per-class sample counts over `indices`.
std::vector<std::size_t> class_histogram(const Dataset& data,
                                         std::span<const std::size_t> indices);

/// Largest class share among `indices`; 0 for an empty set.
double max_class_share(const Dataset& data, std::span<const std::size_t> indices);

/// Shannon entropy (nats) of the class histogram over `indices`.
double class_entropy(const Dataset& data, std::span<const std::size_t> indices);

}  // namespace tierfl
