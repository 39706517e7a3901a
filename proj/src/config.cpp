#include "tierfl/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace tierfl {

using nlohmann::json;

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kCentaur:
      return "centaur";
    case StrategyKind::kApOnly:
      return "ap_only";
    case StrategyKind::kUcdOnly:
      return "ucd_only";
  }
  return "unknown";
}

StrategyKind parse_strategy(const std::string& text) {
  if (text == "centaur") return StrategyKind::kCentaur;
  if (text == "ap_only") return StrategyKind::kApOnly;
  if (text == "ucd_only") return StrategyKind::kUcdOnly;
  throw ConfigError("run.strategies",
                    "unknown strategy '" + text + "' (expected centaur, ap_only, ucd_only)");
}

ConfigError::ConfigError(std::string field, const std::string& message)
    : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

std::vector<ClassifierCandidate> ExperimentConfig::candidates() const {
  if (model.classifier_candidates.empty()) return standard_classifier_family(dataset.classes);
  return model.classifier_candidates;
}

namespace {

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

bool unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

json device_json(const DeviceTable& d) {
  return {{"cpu_freq_mhz", d.cpu_freq_mhz},     {"storage_mb", d.storage_mb},
          {"power_mw_per_mhz", d.power_mw_per_mhz}, {"uplink_mbps", d.uplink_mbps},
          {"downlink_mbps", d.downlink_mbps},   {"comm_power_w", d.comm_power_w},
          {"disconnect_prob", d.disconnect_prob}, {"instr_per_mac", d.instr_per_mac}};
}

json candidate_json(const ClassifierCandidate& c) {
  return {{"name", c.name}, {"hidden_widths", c.hidden_widths},
          {"output_classes", c.output_classes}};
}

// Every key of `input` must exist in `schema`; arrays of objects are checked
// element-wise against the candidate schema.
void check_keys(const json& input, const json& schema, const std::string& path) {
  if (!input.is_object()) {
    throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  }
  static const json kCandidateSchema = candidate_json({});
  for (const auto& [key, value] : input.items()) {
    const std::string field = path.empty() ? key : path + "." + key;
    if (!schema.contains(key)) throw ConfigError(field, "unknown key");
    const json& sub = schema.at(key);
    if (sub.is_object()) {
      check_keys(value, sub, field);
    } else if (field == "model.classifier_candidates") {
      require(value.is_array(), field, "expected an array");
      for (std::size_t i = 0; i < value.size(); ++i) {
        check_keys(value[i], kCandidateSchema, field + "[" + std::to_string(i) + "]");
      }
    }
  }
}

// Typed field access against the merged document; `path` names the field in
// error messages.
class Reader {
 public:
  Reader(const json& root, std::string path) : root_(root), path_(std::move(path)) {}

  Reader section(const std::string& key) const { return {root_.at(key), join(key)}; }

  std::uint64_t u64(const std::string& key) const {
    const json& v = root_.at(key);
    require(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0),
            join(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::size_t size(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }
  double number(const std::string& key) const {
    const json& v = root_.at(key);
    require(v.is_number(), join(key), "expected a number");
    return v.get<double>();
  }
  bool boolean(const std::string& key) const {
    const json& v = root_.at(key);
    require(v.is_boolean(), join(key), "expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& key) const {
    const json& v = root_.at(key);
    require(v.is_string(), join(key), "expected a string");
    return v.get<std::string>();
  }
  std::vector<std::size_t> sizes(const std::string& key) const {
    const json& v = root_.at(key);
    require(v.is_array(), join(key), "expected an array of non-negative integers");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
      require(e.is_number_unsigned() || (e.is_number_integer() && e.get<std::int64_t>() >= 0),
              join(key), "expected an array of non-negative integers");
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }
  const json& raw(const std::string& key) const { return root_.at(key); }
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& root_;
  std::string path_;
};

DeviceTable read_device(const Reader& r) {
  DeviceTable d;
  d.cpu_freq_mhz = r.number("cpu_freq_mhz");
  d.storage_mb = r.number("storage_mb");
  d.power_mw_per_mhz = r.number("power_mw_per_mhz");
  d.uplink_mbps = r.number("uplink_mbps");
  d.downlink_mbps = r.number("downlink_mbps");
  d.comm_power_w = r.number("comm_power_w");
  d.disconnect_prob = r.number("disconnect_prob");
  d.instr_per_mac = r.number("instr_per_mac");
  return d;
}

// Fields that change neither data nor results.
json hashable(const ExperimentConfig& config) {
  json j = to_json(config);
  j["run"].erase("outdir");
  j["training"].erase("workers");
  return j;
}

std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.csv_path.empty()) {
    require(dataset.classes >= 2, "dataset.classes", "must be >= 2");
    require(dataset.per_class >= 1, "dataset.per_class", "must be >= 1");
    require(dataset.dim >= 1, "dataset.dim", "must be >= 1");
    require(dataset.spread >= 0.0 && std::isfinite(dataset.spread), "dataset.spread",
            "must be finite and >= 0");
  }
  require(dataset.test_per_class >= 1, "dataset.test_per_class", "must be >= 1");

  require(partition.num_clients >= 1, "partition.num_clients", "must be >= 1");
  require(partition.lda_alpha > 0.0 && std::isfinite(partition.lda_alpha),
          "partition.lda_alpha", "must be finite and > 0");
  require(partition.online_fraction > 0.0 && partition.online_fraction < 1.0,
          "partition.online_fraction", "must lie strictly between 0 and 1");

  require(training.rounds >= 1, "training.rounds", "must be >= 1");
  require(training.participation > 0.0 && training.participation <= 1.0,
          "training.participation", "must lie in (0, 1]");
  require(training.epochs >= 1, "training.epochs", "must be >= 1");
  require(training.batch_size >= 1, "training.batch_size", "must be >= 1");
  require(training.lr > 0.0 && std::isfinite(training.lr), "training.lr",
          "must be finite and > 0");
  require(training.backward_mac_multiplier >= 0.0, "training.backward_mac_multiplier",
          "must be >= 0");
  require(training.bytes_per_sample >= 1, "training.bytes_per_sample", "must be >= 1");
  require(training.workers >= 1, "training.workers", "must be >= 1");

  require(pretrain.lr > 0.0 && std::isfinite(pretrain.lr), "pretrain.lr",
          "must be finite and > 0");
  require(unit_interval(pretrain.label_permute_fraction), "pretrain.label_permute_fraction",
          "must lie in [0, 1]");

  require(model.bytes_per_param >= 1, "model.bytes_per_param", "must be >= 1");
  for (std::size_t w : model.encoder_widths) {
    require(w >= 1, "model.encoder_widths", "widths must be >= 1");
  }
  for (std::size_t i = 0; i < model.classifier_candidates.size(); ++i) {
    const auto& c = model.classifier_candidates[i];
    const std::string field = "model.classifier_candidates[" + std::to_string(i) + "]";
    require(!c.name.empty(), field + ".name", "must not be empty");
    require(dataset.csv_path.empty() ? c.output_classes == dataset.classes
                                     : c.output_classes >= 2,
            field + ".output_classes", "must match the number of classes");
    for (std::size_t w : c.hidden_widths) {
      require(w >= 1, field + ".hidden_widths", "widths must be >= 1");
    }
  }

  try {
    selection.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("selection", e.what());
  }
  try {
    DeviceProfile::from_table(devices.ucd).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("devices.ucd", e.what());
  }
  try {
    DeviceProfile::from_table(devices.ap).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("devices.ap", e.what());
  }

  require(mobility.slots >= 1, "mobility.slots", "must be >= 1");
  require(mobility.locations >= 1, "mobility.locations", "must be >= 1");
  require(unit_interval(mobility.lambda_min) && unit_interval(mobility.lambda_max) &&
              mobility.lambda_min <= mobility.lambda_max,
          "mobility.lambda_min", "need 0 <= lambda_min <= lambda_max <= 1");
  require(mobility.extra_fraction > 0.0 && mobility.extra_fraction <= 1.0,
          "mobility.extra_fraction", "must lie in (0, 1]");

  require(!run.strategies.empty(), "run.strategies", "must not be empty");
  require(!run.seeds.empty(), "run.seeds", "must not be empty");
}

json to_json(const ExperimentConfig& c) {
  json candidates = json::array();
  for (const auto& cand : c.model.classifier_candidates) candidates.push_back(candidate_json(cand));
  json strategies = json::array();
  for (auto s : c.run.strategies) strategies.push_back(to_string(s));
  return {
      {"dataset",
       {{"classes", c.dataset.classes},
        {"per_class", c.dataset.per_class},
        {"dim", c.dataset.dim},
        {"spread", c.dataset.spread},
        {"test_per_class", c.dataset.test_per_class},
        {"pretrain_per_class", c.dataset.pretrain_per_class},
        {"csv_path", c.dataset.csv_path}}},
      {"partition",
       {{"num_clients", c.partition.num_clients},
        {"lda_alpha", c.partition.lda_alpha},
        {"online_fraction", c.partition.online_fraction}}},
      {"training",
       {{"rounds", c.training.rounds},
        {"participation", c.training.participation},
        {"epochs", c.training.epochs},
        {"batch_size", c.training.batch_size},
        {"lr", c.training.lr},
        {"backward_mac_multiplier", c.training.backward_mac_multiplier},
        {"weighted_aggregation", c.training.weighted_aggregation},
        {"bytes_per_sample", c.training.bytes_per_sample},
        {"workers", c.training.workers}}},
      {"pretrain",
       {{"epochs", c.pretrain.epochs},
        {"lr", c.pretrain.lr},
        {"label_permute_fraction", c.pretrain.label_permute_fraction}}},
      {"model",
       {{"encoder_widths", c.model.encoder_widths},
        {"classifier_candidates", candidates},
        {"memory_budget_bytes", c.model.memory_budget_bytes},
        {"bytes_per_param", c.model.bytes_per_param},
        {"policy", to_string(c.model.policy)}}},
      {"selection",
       {{"alpha", c.selection.alpha},
        {"beta", c.selection.beta},
        {"gamma", c.selection.gamma},
        {"queue_capacity", c.selection.queue_capacity},
        {"warmup_min", c.selection.warmup_min}}},
      {"devices", {{"ucd", device_json(c.devices.ucd)}, {"ap", device_json(c.devices.ap)}}},
      {"mobility",
       {{"enabled", c.mobility.enabled},
        {"slots", c.mobility.slots},
        {"locations", c.mobility.locations},
        {"lambda_min", c.mobility.lambda_min},
        {"lambda_max", c.mobility.lambda_max},
        {"extra_fraction", c.mobility.extra_fraction}}},
      {"run", {{"strategies", strategies}, {"seeds", c.run.seeds}, {"outdir", c.run.outdir}}},
  };
}

ExperimentConfig config_from_json(const json& input) {
  const json defaults = to_json(ExperimentConfig{});
  check_keys(input, defaults, "");
  json merged = defaults;
  merged.merge_patch(input);

  const Reader root(merged, "");
  ExperimentConfig c;
  try {
    const Reader d = root.section("dataset");
    c.dataset.classes = d.size("classes");
    c.dataset.per_class = d.size("per_class");
    c.dataset.dim = d.size("dim");
    c.dataset.spread = d.number("spread");
    c.dataset.test_per_class = d.size("test_per_class");
    c.dataset.pretrain_per_class = d.size("pretrain_per_class");
    c.dataset.csv_path = d.string("csv_path");

    const Reader p = root.section("partition");
    c.partition.num_clients = p.size("num_clients");
    c.partition.lda_alpha = p.number("lda_alpha");
    c.partition.online_fraction = p.number("online_fraction");

    const Reader t = root.section("training");
    c.training.rounds = t.size("rounds");
    c.training.participation = t.number("participation");
    c.training.epochs = t.size("epochs");
    c.training.batch_size = t.size("batch_size");
    c.training.lr = t.number("lr");
    c.training.backward_mac_multiplier = t.number("backward_mac_multiplier");
    c.training.weighted_aggregation = t.boolean("weighted_aggregation");
    c.training.bytes_per_sample = t.u64("bytes_per_sample");
    c.training.workers = t.size("workers");

    const Reader pre = root.section("pretrain");
    c.pretrain.epochs = pre.size("epochs");
    c.pretrain.lr = pre.number("lr");
    c.pretrain.label_permute_fraction = pre.number("label_permute_fraction");

    const Reader m = root.section("model");
    c.model.encoder_widths = m.sizes("encoder_widths");
    const json& cands = m.raw("classifier_candidates");
    require(cands.is_array(), "model.classifier_candidates", "expected an array");
    const json cand_defaults = candidate_json({});
    for (std::size_t i = 0; i < cands.size(); ++i) {
      json cj = cand_defaults;
      cj.merge_patch(cands[i]);
      const Reader cr(cj, "model.classifier_candidates[" + std::to_string(i) + "]");
      c.model.classifier_candidates.push_back(
          {cr.string("name"), cr.sizes("hidden_widths"), cr.size("output_classes")});
    }
    c.model.memory_budget_bytes = m.u64("memory_budget_bytes");
    c.model.bytes_per_param = m.u64("bytes_per_param");
    try {
      c.model.policy = parse_selection_policy(m.string("policy"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("model.policy", e.what());
    }

    const Reader s = root.section("selection");
    c.selection.alpha = s.number("alpha");
    c.selection.beta = s.number("beta");
    c.selection.gamma = s.number("gamma");
    c.selection.queue_capacity = s.size("queue_capacity");
    c.selection.warmup_min = s.size("warmup_min");

    const Reader dev = root.section("devices");
    c.devices.ucd = read_device(dev.section("ucd"));
    c.devices.ap = read_device(dev.section("ap"));

    const Reader mob = root.section("mobility");
    c.mobility.enabled = mob.boolean("enabled");
    c.mobility.slots = mob.size("slots");
    c.mobility.locations = mob.size("locations");
    c.mobility.lambda_min = mob.number("lambda_min");
    c.mobility.lambda_max = mob.number("lambda_max");
    c.mobility.extra_fraction = mob.number("extra_fraction");

    const Reader r = root.section("run");
    const json& strategies = r.raw("strategies");
    require(strategies.is_array(), "run.strategies", "expected an array of strategy names");
    c.run.strategies.clear();
    for (const auto& sj : strategies) {
      require(sj.is_string(), "run.strategies", "expected an array of strategy names");
      c.run.strategies.push_back(parse_strategy(sj.get<std::string>()));
    }
    c.run.seeds.clear();
    for (std::size_t seed : r.sizes("seeds")) c.run.seeds.push_back(seed);
    c.run.outdir = r.string("outdir");
  } catch (const json::exception& e) {
    throw ConfigError("<root>", e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

namespace {

const std::map<std::string, std::string>& override_aliases() {
  static const std::map<std::string, std::string> aliases{
      {"alpha", "selection.alpha"},
      {"beta", "selection.beta"},
      {"gamma", "selection.gamma"},
      {"warmup_min", "selection.warmup_min"},
      {"queue_capacity", "selection.queue_capacity"},
      {"lr", "training.lr"},
      {"rounds", "training.rounds"},
      {"epochs", "training.epochs"},
      {"batch_size", "training.batch_size"},
      {"participation", "training.participation"},
      {"workers", "training.workers"},
      {"lda_alpha", "partition.lda_alpha"},
      {"num_clients", "partition.num_clients"},
      {"online_fraction", "partition.online_fraction"},
      {"memory_budget_bytes", "model.memory_budget_bytes"},
      {"policy", "model.policy"},
      {"spread", "dataset.spread"},
      {"lambda_min", "mobility.lambda_min"},
      {"lambda_max", "mobility.lambda_max"},
      {"mobility", "mobility.enabled"},
  };
  return aliases;
}

}  // namespace

ExperimentConfig with_override(const ExperimentConfig& config, const std::string& key,
                               const std::string& value) {
  const auto alias = override_aliases().find(key);
  const std::string path = alias != override_aliases().end() ? alias->second : key;

  json patch = json::object();
  json defaults = to_json(config);
  json* target = &defaults;
  json* out = &patch;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!target->is_object() || !target->contains(part)) {
      throw ConfigError(path, "unknown key");
    }
    target = &(*target)[part];
    if (dot == std::string::npos) {
      json parsed;
      try {
        if (target->is_string()) {
          parsed = value;
        } else if (target->is_boolean()) {
          if (value == "true" || value == "on" || value == "1") {
            parsed = true;
          } else if (value == "false" || value == "off" || value == "0") {
            parsed = false;
          } else {
            throw ConfigError(path, "expected true/false, got '" + value + "'");
          }
        } else if (target->is_number_unsigned()) {
          std::size_t used = 0;
          const unsigned long long v = std::stoull(value, &used);
          require(used == value.size() && value.find('-') == std::string::npos, path,
                  "expected a non-negative integer, got '" + value + "'");
          parsed = static_cast<std::uint64_t>(v);
        } else if (target->is_number()) {
          std::size_t used = 0;
          const double v = std::stod(value, &used);
          require(used == value.size(), path, "expected a number, got '" + value + "'");
          parsed = v;
        } else {
          parsed = json::parse(value);
        }
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw ConfigError(path, "cannot parse '" + value + "'");
      }
      (*out)[part] = parsed;
      break;
    }
    (*out)[part] = json::object();
    out = &(*out)[part];
    start = dot + 1;
  }
  json merged = to_json(config);
  merged.merge_patch(patch);
  return config_from_json(merged);
}

std::string config_hash(const ExperimentConfig& config) {
  return hex16(fnv1a64(hashable(config).dump()));
}

std::string dataset_hash(const ExperimentConfig& config) {
  const json j = to_json(config);
  const json data{{"dataset", j["dataset"]}, {"partition", j["partition"]}};
  return hex16(fnv1a64(data.dump()));
}

}  // namespace tierfl
