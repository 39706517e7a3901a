#include "tierfl/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>
#include <unordered_set>

namespace tierfl {

namespace {

// Runs fn(i) for i in [0, count) on up to `workers` threads. Results must be
// written to per-index slots; any exception is rethrown for the lowest index.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<nn::Label> gather_labels(const Dataset& data, std::span<const std::size_t> idx) {
  std::vector<nn::Label> y;
  y.reserve(idx.size());
  for (std::size_t i : idx) y.push_back(data.labels[i]);
  return y;
}

// Random slice of the extra shard for each offline unit.
std::vector<std::vector<std::size_t>> extra_epoch_slices(ClientState& client,
                                                         std::size_t units, double fraction) {
  const ExtraEpochs plan = offline_to_epochs(units, client.shards.extra.size(), fraction);
  std::vector<std::vector<std::size_t>> out;
  if (plan.samples_per_epoch == 0) return out;
  out.reserve(plan.epochs);
  for (std::size_t e = 0; e < plan.epochs; ++e) {
    std::vector<std::size_t> pool = client.shards.extra;
    shuffle(pool, client.rng);
    pool.resize(std::min(pool.size(), plan.samples_per_epoch));
    out.push_back(std::move(pool));
  }
  return out;
}

std::uint64_t model_bytes(const nn::Network& net, std::uint64_t bytes_per_param) {
  return static_cast<std::uint64_t>(net.param_count()) * bytes_per_param;
}

}  // namespace

double RunResult::best_accuracy() const {
  double best = 0.0;
  for (const auto& r : rounds) best = std::max(best, r.accuracy);
  return best;
}

UcdPhaseResult ucd_phase(ClientState& client, const ModelPartition& global,
                         const PhaseContext& ctx, bool use_selection) {
  const auto& cfg = ctx.config;
  const double mult = cfg.training.backward_mac_multiplier;
  UcdPhaseResult res;
  res.classifier = global.classifier;

  // Offline-time epochs come first: they cover data gathered before this round.
  std::vector<std::vector<std::size_t>> epochs =
      extra_epoch_slices(client, ctx.offline_units, cfg.mobility.extra_fraction);
  for (std::size_t e = 0; e < cfg.training.epochs; ++e) epochs.push_back(client.shards.online);

  std::uint64_t selection_macs = 0;
  std::uint64_t train_macs = 0;
  std::unordered_set<std::size_t> transmitted;
  const std::size_t batch = std::max<std::size_t>(1, cfg.training.batch_size);

  for (auto& order : epochs) {
    shuffle(order, client.rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::span<const std::size_t> idx(order.data() + start,
                                       std::min(batch, order.size() - start));
      const auto y = gather_labels(ctx.train, idx);
      const auto enc = nn::forward(global.encoder, ctx.train.features.select_rows(idx));
      const auto cls = nn::forward(res.classifier, enc.logits);
      const std::uint64_t fwd_macs = enc.macs + cls.macs;

      RoutedBatch routed;
      if (use_selection) {
        selection_macs += fwd_macs;
        const auto losses = nn::softmax_cross_entropy(cls.logits, y);
        routed = route_by_loss(losses, client.selection.loss_cdf, cfg.selection, client.rng);
      } else {
        train_macs += fwd_macs;
        routed.classifier.resize(idx.size());
        std::iota(routed.classifier.begin(), routed.classifier.end(), 0);
      }
      res.discarded_samples += routed.discard.size();

      for (std::size_t b : routed.transmit) {
        if (transmitted.insert(idx[b]).second) res.transmit_additions.push_back(idx[b]);
      }
      if (routed.classifier.empty()) continue;

      const auto sub_cache = cls.cache.select_rows(routed.classifier);
      const auto sub_logits = cls.logits.select_rows(routed.classifier);
      std::vector<nn::Label> sub_y;
      sub_y.reserve(routed.classifier.size());
      for (std::size_t b : routed.classifier) sub_y.push_back(y[b]);
      const auto bwd = nn::backward(res.classifier, sub_logits, sub_cache, sub_y, mult);
      train_macs += bwd.macs;

      if (use_selection) {
        const auto added = route_by_grad(bwd.last_layer_norms, routed.classifier,
                                         client.selection.grad_cdf, cfg.selection, client.rng);
        for (std::size_t b : added) {
          if (transmitted.insert(idx[b]).second) res.transmit_additions.push_back(idx[b]);
        }
      }

      nn::apply_sgd(res.classifier, bwd.grads, cfg.training.lr);
      res.trained_samples += routed.classifier.size();
      res.no_op = false;

      const std::uint64_t footprint =
          routed.classifier.size() * cfg.training.bytes_per_sample +
          (client.selection.loss_cdf.size() + client.selection.grad_cdf.size()) *
              cfg.model.bytes_per_param;
      res.peak_storage_bytes = std::max(res.peak_storage_bytes, footprint);
    }
  }

  if (selection_macs > 0) {
    res.records.push_back({Tier::kUcd, Category::kSelectionCompute, selection_macs, 0});
  }
  if (train_macs > 0) res.records.push_back({Tier::kUcd, Category::kTrainCompute, train_macs, 0});
  return res;
}

ApPhaseResult ap_phase(ClientState& client, const ModelPartition& global,
                       std::span<const std::size_t> samples, const PhaseContext& ctx,
                       std::span<const std::vector<std::size_t>> extra_epochs) {
  const auto& cfg = ctx.config;
  ApPhaseResult res;
  res.model = global;

  std::vector<std::size_t> uploaded(samples.begin(), samples.end());
  for (const auto& e : extra_epochs) uploaded.insert(uploaded.end(), e.begin(), e.end());
  std::sort(uploaded.begin(), uploaded.end());
  uploaded.erase(std::unique(uploaded.begin(), uploaded.end()), uploaded.end());
  if (uploaded.empty()) return res;

  res.uploaded_samples = uploaded.size();
  res.records.push_back(
      {Tier::kUcd, Category::kCommUp, 0, uploaded.size() * cfg.training.bytes_per_sample});

  std::vector<std::vector<std::size_t>> epochs(extra_epochs.begin(), extra_epochs.end());
  for (std::size_t e = 0; e < cfg.training.epochs; ++e) {
    epochs.emplace_back(samples.begin(), samples.end());
  }

  nn::Network full = global.full();
  std::uint64_t macs = 0;
  const std::size_t batch = std::max<std::size_t>(1, cfg.training.batch_size);
  for (auto& order : epochs) {
    shuffle(order, client.rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::span<const std::size_t> idx(order.data() + start,
                                       std::min(batch, order.size() - start));
      const auto lg = nn::loss_and_grad(full, ctx.train.features.select_rows(idx),
                                        gather_labels(ctx.train, idx),
                                        cfg.training.backward_mac_multiplier);
      macs += lg.macs();
      nn::apply_sgd(full, lg.grads, cfg.training.lr);
      res.trained_samples += idx.size();
    }
  }
  if (macs > 0) res.records.push_back({Tier::kAp, Category::kTrainCompute, macs, 0});
  res.model = split_partition(full, global.encoder.layers.size());
  res.no_op = res.trained_samples == 0;
  return res;
}

std::vector<std::size_t> sample_clients(std::size_t all, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("participation fraction must lie in (0, 1]");
  }
  const auto k = std::min<std::size_t>(
      all, static_cast<std::size_t>(std::llround(static_cast<double>(all) * fraction)));
  std::vector<std::size_t> ids(all);
  std::iota(ids.begin(), ids.end(), 0);
  // Partial Fisher-Yates: the first k slots are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(ids[i], ids[i + uniform_index(rng, all - i)]);
  }
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace {

std::vector<double> normalized_weights(std::size_t n, std::span<const double> weights) {
  if (weights.empty()) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  if (weights.size() != n) throw std::invalid_argument("one weight per model required");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("aggregation weights must be >= 0");
    sum += w;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("aggregation weights sum to zero");
  std::vector<double> out(weights.begin(), weights.end());
  for (double& w : out) w /= sum;
  return out;
}

}  // namespace

nn::Network classifier_fedavg(std::span<const nn::Network> classifiers,
                              std::span<const double> weights) {
  if (classifiers.empty()) throw std::invalid_argument("nothing to aggregate");
  const auto w = normalized_weights(classifiers.size(), weights);
  const nn::Network& ref = classifiers.front();
  for (std::size_t k = 1; k < classifiers.size(); ++k) {
    const auto& net = classifiers[k];
    if (net.layers.size() != ref.layers.size()) {
      throw nn::DimensionError(-1, "models differ in depth");
    }
    for (std::size_t li = 0; li < ref.layers.size(); ++li) {
      if (net.layers[li].weights.rows() != ref.layers[li].weights.rows() ||
          net.layers[li].weights.cols() != ref.layers[li].weights.cols() ||
          net.layers[li].bias.size() != ref.layers[li].bias.size()) {
        throw nn::DimensionError(static_cast<int>(li), "models differ in shape");
      }
    }
  }
  nn::Network out = ref;
  for (std::size_t li = 0; li < out.layers.size(); ++li) {
    auto ow = out.layers[li].weights.values();
    auto& ob = out.layers[li].bias;
    std::fill(ow.begin(), ow.end(), 0.0);
    std::fill(ob.begin(), ob.end(), 0.0);
    // Ascending model order keeps the floating-point sum reproducible.
    for (std::size_t k = 0; k < classifiers.size(); ++k) {
      auto kw = classifiers[k].layers[li].weights.values();
      for (std::size_t j = 0; j < ow.size(); ++j) ow[j] += w[k] * kw[j];
      const auto& kb = classifiers[k].layers[li].bias;
      for (std::size_t j = 0; j < ob.size(); ++j) ob[j] += w[k] * kb[j];
    }
  }
  // With uniform weights K identical models must average back to themselves;
  // w * x summed K times can drift by an ulp, so snap exact agreement.
  for (std::size_t li = 0; li < out.layers.size(); ++li) {
    auto ow = out.layers[li].weights.values();
    for (std::size_t j = 0; j < ow.size(); ++j) {
      const double first = classifiers[0].layers[li].weights.values()[j];
      bool same = true;
      for (std::size_t k = 1; k < classifiers.size() && same; ++k) {
        same = classifiers[k].layers[li].weights.values()[j] == first;
      }
      if (same) ow[j] = first;
    }
    auto& ob = out.layers[li].bias;
    for (std::size_t j = 0; j < ob.size(); ++j) {
      const double first = classifiers[0].layers[li].bias[j];
      bool same = true;
      for (std::size_t k = 1; k < classifiers.size() && same; ++k) {
        same = classifiers[k].layers[li].bias[j] == first;
      }
      if (same) ob[j] = first;
    }
  }
  return out;
}

ModelPartition full_fedavg(std::span<const ModelPartition> models,
                           std::span<const double> weights) {
  if (models.empty()) throw std::invalid_argument("nothing to aggregate");
  std::vector<nn::Network> encoders;
  std::vector<nn::Network> classifiers;
  encoders.reserve(models.size());
  classifiers.reserve(models.size());
  for (const auto& m : models) {
    encoders.push_back(m.encoder);
    classifiers.push_back(m.classifier);
  }
  ModelPartition out;
  out.encoder = models.front().encoder.empty() ? nn::Network{}
                                               : classifier_fedavg(encoders, weights);
  out.classifier = classifier_fedavg(classifiers, weights);
  return out;
}

namespace {

Dataset load_or_generate(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto& d = cfg.dataset;
  if (!d.csv_path.empty()) return load_csv(d.csv_path);
  return make_blobs(d.classes, d.per_class + d.test_per_class + d.pretrain_per_class, d.dim,
                    d.spread, derive_seed(seed, "data"));
}

}  // namespace

SimulationSetup prepare(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  SimulationSetup s;
  const Dataset all = load_or_generate(config, seed);

  // Stratified three-way split: test, pretrain, then the federated pool.
  Rng split_rng = make_rng(seed, "split");
  std::vector<std::vector<std::size_t>> by_class(all.classes);
  for (std::size_t i = 0; i < all.size(); ++i) {
    by_class[static_cast<std::size_t>(all.labels[i])].push_back(i);
  }
  std::vector<std::size_t> test_idx;
  std::vector<std::size_t> pretrain_idx;
  std::vector<std::size_t> train_idx;
  for (auto& members : by_class) {
    shuffle(members, split_rng);
    const std::size_t n_test = std::min(members.size(), config.dataset.test_per_class);
    const std::size_t n_pre =
        std::min(members.size() - n_test, config.dataset.pretrain_per_class);
    auto it = members.begin();
    test_idx.insert(test_idx.end(), it, it + static_cast<std::ptrdiff_t>(n_test));
    it += static_cast<std::ptrdiff_t>(n_test);
    pretrain_idx.insert(pretrain_idx.end(), it, it + static_cast<std::ptrdiff_t>(n_pre));
    it += static_cast<std::ptrdiff_t>(n_pre);
    train_idx.insert(train_idx.end(), it, members.end());
  }
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(pretrain_idx.begin(), pretrain_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  s.train = all.subset(train_idx);
  s.test = all.subset(test_idx);
  const Dataset pretrain = all.subset(pretrain_idx);

  s.client_indices = dirichlet_partition(s.train, config.partition.num_clients,
                                         config.partition.lda_alpha,
                                         derive_seed(seed, "partition"));
  for (std::size_t c = 0; c < s.client_indices.size(); ++c) {
    Rng r = make_rng(seed, "shards", c);
    s.shards.push_back(
        split_online_extra(s.client_indices[c], config.partition.online_fraction, r));
  }

  EncoderSpec enc{s.train.features.cols(), config.model.encoder_widths};
  const auto candidates = config.candidates();
  s.classifier = select_classifier(candidates, enc.output_dim(), config.budget(),
                                   config.model.policy);
  s.initial = build_partition(enc, s.classifier, config.budget(), derive_seed(seed, "init"));

  // Imperfect pretraining: scramble a fraction of the pretraining labels.
  std::vector<nn::Label> labels = pretrain.labels;
  Rng pre_rng = make_rng(seed, "pretrain");
  const auto n_perm = static_cast<std::size_t>(std::llround(
      config.pretrain.label_permute_fraction * static_cast<double>(labels.size())));
  std::vector<std::size_t> pos(labels.size());
  std::iota(pos.begin(), pos.end(), 0);
  shuffle(pos, pre_rng);
  pos.resize(n_perm);
  std::vector<nn::Label> moved;
  for (std::size_t p : pos) moved.push_back(labels[p]);
  shuffle(moved, pre_rng);
  for (std::size_t k = 0; k < pos.size(); ++k) labels[pos[k]] = moved[k];

  PretrainOptions opts{config.pretrain.epochs, config.training.batch_size, config.pretrain.lr};
  s.initial.encoder = pretrain_encoder(s.initial.encoder, pretrain.features, labels,
                                       s.train.classes, opts, pre_rng);
  return s;
}

RunResult run(StrategyKind strategy, const ExperimentConfig& config, std::uint64_t seed) {
  SimulationSetup setup = prepare(config, seed);
  const DeviceProfile ucd = DeviceProfile::from_table(config.devices.ucd);
  const DeviceProfile ap = DeviceProfile::from_table(config.devices.ap);
  const std::uint64_t bpp = config.model.bytes_per_param;
  const std::size_t workers = config.training.workers;

  RunResult result;
  result.strategy = strategy;
  result.seed = seed;
  result.classifier = setup.classifier;
  ModelPartition global = setup.initial;

  const std::size_t num_clients = setup.shards.size();
  std::vector<ClientState> clients;
  clients.reserve(num_clients);
  for (std::size_t c = 0; c < num_clients; ++c) {
    clients.emplace_back(c, setup.shards[c], config.selection.queue_capacity,
                         make_rng(seed, "client", c));
    if (setup.client_indices[c].empty()) ++result.empty_clients;
  }

  // Connectivity and sampling draw from their own streams so every strategy
  // sees the same client population behaviour for a given seed.
  std::vector<Rng> online_rngs;
  for (std::size_t c = 0; c < num_clients; ++c) online_rngs.push_back(make_rng(seed, "online", c));
  Rng sampling_rng = make_rng(seed, "sampling");
  std::optional<ConnectivityVector> lambda;
  if (config.mobility.enabled) {
    Rng lrng = make_rng(seed, "lambda");
    lambda = sample_lambda(config.mobility.locations, config.mobility.lambda_min,
                           config.mobility.lambda_max, lrng);
    result.mean_lambda = std::accumulate(lambda->lambda.begin(), lambda->lambda.end(), 0.0) /
                         static_cast<double>(lambda->lambda.size());
    for (auto& client : clients) {
      Rng erng = make_rng(seed, "eoam", client.client_id);
      client.eoam = Eoam::generate(config.mobility.slots, config.mobility.locations, erng);
    }
  }

  const std::size_t total_rounds = config.training.rounds;
  const std::size_t rounds_per_step = strategy == StrategyKind::kCentaur ? 2 : 1;
  const std::size_t steps = (total_rounds + rounds_per_step - 1) / rounds_per_step;
  const std::uint64_t storage_limit = static_cast<std::uint64_t>(ucd.storage_bytes);
  const std::size_t pending_cap =
      config.training.bytes_per_sample > 0
          ? static_cast<std::size_t>(storage_limit / config.training.bytes_per_sample)
          : std::numeric_limits<std::size_t>::max();

  std::size_t comm_round = 0;
  auto evaluate = [&](std::size_t participants, std::size_t uploaded) {
    result.rounds.push_back({comm_round, nn::accuracy(global.full(), setup.test.features,
                                                      setup.test.labels),
                             participants, uploaded});
  };

  for (std::size_t step = 0; step < steps; ++step) {
    std::vector<bool> online(num_clients);
    for (std::size_t c = 0; c < num_clients; ++c) {
      if (lambda) {
        const std::size_t slot = step % clients[c].eoam->slots();
        online[c] = sample_online(*clients[c].eoam, *lambda, slot, online_rngs[c]);
      } else {
        online[c] = uniform01(online_rngs[c]) >= ucd.disconnect_prob;
      }
      clients[c].connectivity.record(online[c]);
    }
    std::vector<std::size_t> participants;
    for (std::size_t c : sample_clients(num_clients, config.training.participation, sampling_rng)) {
      if (online[c]) participants.push_back(c);
    }
    std::vector<std::size_t> units(participants.size());
    for (std::size_t p = 0; p < participants.size(); ++p) {
      units[p] = clients[participants[p]].connectivity.take_offline_units();
    }
    auto context = [&](std::size_t p) {
      return PhaseContext{setup.train, config, ucd, ap, units[p]};
    };
    const std::size_t n = participants.size();

    if (strategy == StrategyKind::kCentaur || strategy == StrategyKind::kUcdOnly) {
      const bool centaur = strategy == StrategyKind::kCentaur;
      ++comm_round;
      std::vector<UcdPhaseResult> results(n);
      parallel_for(n, workers, [&](std::size_t p) {
        results[p] = ucd_phase(clients[participants[p]], global, context(p), centaur);
      });
      const std::uint64_t down_bytes =
          centaur ? model_bytes(global.encoder, bpp) + model_bytes(global.classifier, bpp)
                  : model_bytes(global.classifier, bpp);
      std::vector<nn::Network> classifiers;
      std::vector<double> weights;
      for (std::size_t p = 0; p < n; ++p) {
        ClientState& client = clients[participants[p]];
        auto& r = results[p];
        result.ledger.record(comm_round, Tier::kUcd, Category::kCommDown, 0, down_bytes, ucd);
        for (const auto& rec : r.records) result.ledger.record(comm_round, rec, ucd);
        result.ledger.record(comm_round, Tier::kUcd, Category::kCommUp, 0,
                             model_bytes(r.classifier, bpp), ucd);
        for (std::size_t idx : r.transmit_additions) {
          if (std::find(client.pending_transmit.begin(), client.pending_transmit.end(), idx) !=
              client.pending_transmit.end()) {
            continue;
          }
          if (client.pending_transmit.size() >= pending_cap) {
            ++client.dropped_for_storage;
            continue;
          }
          client.pending_transmit.push_back(idx);
        }
        const std::uint64_t footprint =
            r.peak_storage_bytes + client.pending_transmit.size() * config.training.bytes_per_sample;
        if (footprint > storage_limit) ++result.storage_warnings;
        classifiers.push_back(std::move(r.classifier));
        weights.push_back(static_cast<double>(r.trained_samples));
      }
      if (!classifiers.empty()) {
        const bool weighted = config.training.weighted_aggregation &&
                              std::accumulate(weights.begin(), weights.end(), 0.0) > 0.0;
        global.classifier = classifier_fedavg(classifiers, weighted ? std::span<const double>(weights)
                                                                    : std::span<const double>());
      }
      evaluate(n, 0);
      if (!centaur || comm_round >= total_rounds) continue;

      ++comm_round;
      std::vector<ApPhaseResult> ap_results(n);
      parallel_for(n, workers, [&](std::size_t p) {
        ClientState& client = clients[participants[p]];
        ap_results[p] = ap_phase(client, global, client.pending_transmit, context(p));
      });
      std::vector<ModelPartition> models;
      std::vector<double> ap_weights;
      std::size_t uploaded = 0;
      const std::uint64_t full_bytes =
          model_bytes(global.encoder, bpp) + model_bytes(global.classifier, bpp);
      for (std::size_t p = 0; p < n; ++p) {
        ClientState& client = clients[participants[p]];
        auto& r = ap_results[p];
        result.ledger.record(comm_round, Tier::kAp, Category::kCommDown, 0, full_bytes, ap);
        for (const auto& rec : r.records) {
          result.ledger.record(comm_round, rec, rec.tier == Tier::kUcd ? ucd : ap);
        }
        if (!r.no_op) result.ledger.record(comm_round, Tier::kAp, Category::kCommUp, 0, full_bytes, ap);
        uploaded += r.uploaded_samples;
        client.pending_transmit.clear();
        models.push_back(std::move(r.model));
        ap_weights.push_back(static_cast<double>(r.trained_samples));
      }
      if (!models.empty()) {
        const bool weighted = config.training.weighted_aggregation &&
                              std::accumulate(ap_weights.begin(), ap_weights.end(), 0.0) > 0.0;
        global = full_fedavg(models, weighted ? std::span<const double>(ap_weights)
                                              : std::span<const double>());
      }
      evaluate(n, uploaded);
    } else {
      ++comm_round;
      std::vector<ApPhaseResult> ap_results(n);
      parallel_for(n, workers, [&](std::size_t p) {
        ClientState& client = clients[participants[p]];
        const auto extra =
            extra_epoch_slices(client, units[p], config.mobility.extra_fraction);
        ap_results[p] = ap_phase(client, global, client.shards.online, context(p), extra);
      });
      std::vector<ModelPartition> models;
      std::vector<double> ap_weights;
      std::size_t uploaded = 0;
      const std::uint64_t full_bytes =
          model_bytes(global.encoder, bpp) + model_bytes(global.classifier, bpp);
      for (std::size_t p = 0; p < n; ++p) {
        auto& r = ap_results[p];
        result.ledger.record(comm_round, Tier::kAp, Category::kCommDown, 0, full_bytes, ap);
        for (const auto& rec : r.records) {
          result.ledger.record(comm_round, rec, rec.tier == Tier::kUcd ? ucd : ap);
        }
        if (!r.no_op) result.ledger.record(comm_round, Tier::kAp, Category::kCommUp, 0, full_bytes, ap);
        uploaded += r.uploaded_samples;
        models.push_back(std::move(r.model));
        ap_weights.push_back(static_cast<double>(r.trained_samples));
      }
      if (!models.empty()) {
        const bool weighted = config.training.weighted_aggregation &&
                              std::accumulate(ap_weights.begin(), ap_weights.end(), 0.0) > 0.0;
        global = full_fedavg(models, weighted ? std::span<const double>(ap_weights)
                                              : std::span<const double>());
      }
      evaluate(n, uploaded);
    }
  }
  result.final_model = std::move(global);
  return result;
}

}  // namespace tierfl
