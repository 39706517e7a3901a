#include "tierfl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tierfl {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.select_rows(indices);
  out.classes = classes;
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  return out;
}

void Dataset::validate() const {
  if (features.rows() != labels.size()) {
    throw std::invalid_argument("dataset has " + std::to_string(features.rows()) +
                                " rows but " + std::to_string(labels.size()) + " labels");
  }
  for (nn::Label y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(classes) + ")");
    }
  }
}

Dataset make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double spread,
                   std::uint64_t seed) {
  if (classes == 0 || per_class == 0 || dim == 0 || spread < 0.0) {
    throw std::invalid_argument("make_blobs needs positive sizes and spread >= 0");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  nn::Tensor2D centers(classes, dim);
  for (double& c : centers.values()) c = normal(rng);

  Dataset d;
  d.classes = classes;
  d.features = nn::Tensor2D(classes * per_class, dim);
  d.labels.resize(classes * per_class);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      const std::size_t r = c * per_class + k;
      d.labels[r] = static_cast<nn::Label>(c);
      auto row = d.features.row(r);
      for (std::size_t j = 0; j < dim; ++j) row[j] = centers(c, j) + spread * normal(rng);
    }
  }
  return d;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset " + path.string() + " is empty");
  const auto header = split(line);
  const auto label_it = std::find(header.begin(), header.end(), "label");
  if (label_it == header.end()) {
    throw std::runtime_error("dataset " + path.string() + " has no 'label' column");
  }
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t dim = header.size() - 1;

  std::vector<double> values;
  std::vector<nn::Label> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(header.size()) + " columns");
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      try {
        if (j == label_col) {
          labels.push_back(std::stoi(cells[j]));
        } else {
          values.push_back(std::stod(cells[j]));
        }
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": bad value '" + cells[j] + "'");
      }
    }
  }
  Dataset d;
  d.features = nn::Tensor2D(labels.size(), dim, std::move(values));
  d.labels = std::move(labels);
  const auto max_label =
      d.labels.empty() ? -1 : *std::max_element(d.labels.begin(), d.labels.end());
  d.classes = static_cast<std::size_t>(max_label + 1);
  d.validate();
  return d;
}

namespace {

// Dirichlet draw computed in log space: for alpha < 1,
// Gamma(alpha) = Gamma(alpha + 1) * U^(1/alpha), which keeps tiny-alpha draws
// from underflowing to an all-zero vector.
std::vector<double> sample_dirichlet(std::size_t k, double alpha, Rng& rng) {
  const bool boost = alpha < 1.0;
  std::gamma_distribution<double> gamma(boost ? alpha + 1.0 : alpha, 1.0);
  std::vector<double> logs(k);
  for (double& l : logs) {
    double g = gamma(rng);
    l = std::log(std::max(g, std::numeric_limits<double>::min()));
    if (boost) {
      const double u = std::max(uniform01(rng), std::numeric_limits<double>::min());
      l += std::log(u) / alpha;
    }
  }
  const double m = *std::max_element(logs.begin(), logs.end());
  double s = 0.0;
  for (double& l : logs) {
    l = std::exp(l - m);
    s += l;
  }
  for (double& l : logs) l /= s;
  return logs;
}

}  // namespace

std::vector<std::vector<std::size_t>> dirichlet_partition(const Dataset& data,
                                                          std::size_t num_clients,
                                                          double lda_alpha, std::uint64_t seed) {
  if (num_clients == 0) throw std::invalid_argument("num_clients must be >= 1");
  if (!(lda_alpha > 0.0) || !std::isfinite(lda_alpha)) {
    throw std::invalid_argument("lda_alpha must be positive");
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> by_class(data.classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
  }
  std::vector<std::vector<std::size_t>> clients(num_clients);
  for (auto& members : by_class) {
    shuffle(members, rng);
    const auto p = sample_dirichlet(num_clients, lda_alpha, rng);
    const std::size_t n = members.size();
    double cum = 0.0;
    std::size_t start = 0;
    for (std::size_t c = 0; c < num_clients; ++c) {
      cum += p[c];
      std::size_t end = c + 1 == num_clients
                            ? n
                            : std::min(n, static_cast<std::size_t>(std::floor(cum * static_cast<double>(n))));
      end = std::max(end, start);
      clients[c].insert(clients[c].end(), members.begin() + static_cast<std::ptrdiff_t>(start),
                        members.begin() + static_cast<std::ptrdiff_t>(end));
      start = end;
    }
  }
  for (auto& c : clients) std::sort(c.begin(), c.end());
  return clients;
}

ClientShards split_online_extra(std::span<const std::size_t> client_indices, double fraction,
                                Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("online fraction must lie strictly between 0 and 1");
  }
  std::vector<std::size_t> order(client_indices.begin(), client_indices.end());
  shuffle(order, rng);
  const auto n_online =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(order.size())));
  ClientShards s;
  s.online.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_online));
  s.extra.assign(order.begin() + static_cast<std::ptrdiff_t>(n_online), order.end());
  return s;
}

std::vector<std::size_t> class_histogram(const Dataset& data,
                                         std::span<const std::size_t> indices) {
  std::vector<std::size_t> h(data.classes, 0);
  for (std::size_t i : indices) ++h[static_cast<std::size_t>(data.labels.at(i))];
  return h;
}

double max_class_share(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) return 0.0;
  const auto h = class_histogram(data, indices);
  return static_cast<double>(*std::max_element(h.begin(), h.end())) /
         static_cast<double>(indices.size());
}

double class_entropy(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) return 0.0;
  const auto h = class_histogram(data, indices);
  double e = 0.0;
  for (std::size_t c : h) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(indices.size());
    e -= p * std::log(p);
  }
  return e;
}

}  // namespace tierfl
