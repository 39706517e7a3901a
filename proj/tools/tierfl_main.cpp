// tierfl: run multitier federated-learning experiments and compare their results.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tierfl/config.hpp"
#include "tierfl/experiment.hpp"
#include "tierfl/mobility.hpp"

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cell;
  for (char ch : text) {
    if (ch == ',') {
      if (!cell.empty()) out.push_back(cell);
      cell.clear();
    } else {
      cell += ch;
    }
  }
  if (!cell.empty()) out.push_back(cell);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multitier federated-learning simulator"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run strategies x seeds, optionally over a sweep grid");
  std::string config_path;
  std::string strategies;
  std::string seeds;
  std::vector<std::string> sweeps;
  std::string outdir;
  std::string mobility;
  std::string bucket;
  std::size_t workers = 0;
  bool wall_clock = false;
  run_cmd->add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
  run_cmd->add_option("--strategy", strategies, "comma list of centaur, ucd_only, ap_only");
  run_cmd->add_option("--seeds", seeds, "comma list of master seeds");
  run_cmd->add_option("--sweep", sweeps, "KEY=V1,V2,... grid axis (repeatable)")
      ->allow_extra_args();
  run_cmd->add_option("--outdir", outdir, "output directory");
  run_cmd->add_option("--mobility", mobility, "on|off")->check(CLI::IsMember({"on", "off"}));
  run_cmd->add_option("--lambda-bucket", bucket, "low|mid|high; implies --mobility on")
      ->check(CLI::IsMember({"low", "mid", "high"}));
  run_cmd->add_option("--workers", workers, "client worker threads per round");
  run_cmd->add_flag("--wall-clock", wall_clock, "record timings in summary.json");

  auto* cmp_cmd = app.add_subcommand("compare", "compare summary.json files");
  std::vector<std::string> inputs;
  std::string baseline = "ucd_only";
  std::string csv_out;
  cmp_cmd->add_option("summaries", inputs, "summary.json files")->required();
  cmp_cmd->add_option("--baseline", baseline, "strategy the deltas are relative to");
  cmp_cmd->add_option("--csv", csv_out, "also write the table as CSV here");

  auto* def_cmd = app.add_subcommand("default-config", "print the default config as JSON");

  CLI11_PARSE(app, argc, argv);

  if (def_cmd->parsed()) {
    std::cout << tierfl::to_json(tierfl::ExperimentConfig{}).dump(2) << "\n";
    return tierfl::kExitOk;
  }

  if (cmp_cmd->parsed()) {
    try {
      std::vector<nlohmann::json> summaries;
      for (const auto& path : inputs) {
        std::ifstream in(path);
        if (!in) throw tierfl::CompareError("cannot open " + path);
        summaries.push_back(nlohmann::json::parse(in));
      }
      const auto rows = tierfl::compare(summaries, baseline);
      std::cout << tierfl::compare_table(rows, baseline);
      if (!csv_out.empty()) {
        std::ofstream out(csv_out);
        out << tierfl::compare_csv(rows);
      }
      return tierfl::kExitOk;
    } catch (const std::exception& e) {
      std::cerr << "compare: " << e.what() << "\n";
      return tierfl::kExitConfigError;
    }
  }

  tierfl::ExperimentRequest request;
  request.wall_clock = wall_clock;
  try {
    if (!config_path.empty()) request.config = tierfl::load_config(config_path);
    auto& cfg = request.config;
    if (!strategies.empty()) {
      cfg.run.strategies.clear();
      for (const auto& s : split_list(strategies)) cfg.run.strategies.push_back(tierfl::parse_strategy(s));
    }
    if (!seeds.empty()) {
      cfg.run.seeds.clear();
      for (const auto& s : split_list(seeds)) {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != s.size()) throw tierfl::ConfigError("--seeds", "bad seed '" + s + "'");
        cfg.run.seeds.push_back(v);
      }
    }
    if (!outdir.empty()) cfg.run.outdir = outdir;
    if (!mobility.empty()) cfg.mobility.enabled = mobility == "on";
    if (!bucket.empty()) {
      const auto [lo, hi] = tierfl::bucket_range(tierfl::parse_lambda_bucket(bucket));
      cfg.mobility.enabled = true;
      cfg.mobility.lambda_min = lo;
      cfg.mobility.lambda_max = hi;
    }
    if (workers > 0) cfg.training.workers = workers;
    cfg.validate();
    for (const auto& s : sweeps) request.sweep.push_back(tierfl::parse_sweep(s));
  } catch (const tierfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return tierfl::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return tierfl::kExitConfigError;
  }
  return tierfl::run_experiment(request, std::cout, std::cerr);
}
