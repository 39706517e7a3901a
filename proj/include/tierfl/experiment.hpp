#pragma once

// Experiment runner: strategy x seed runs, parameter sweeps, output files, and
// cross-run comparison.
//
// Output layout for one run set:
//   <outdir>/<strategy>_<seed>.csv          per-round metrics
//   <outdir>/ledger/<strategy>_<seed>.csv   long-form cost ledger
//   <outdir>/summary.json
// A sweep writes one such set per grid point under <outdir>/<point>/ plus
// <outdir>/sweep.csv.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tierfl/config.hpp"
#include "tierfl/fedsim.hpp"

#include <json.hpp>

namespace tierfl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitInfeasibleBudget = 3;

/// Header of the per-round metrics CSV.
std::string metrics_header();
/// round, accuracy, then macs/bytes/seconds/joules for ucd, ap, server.
std::string metrics_csv(const RunResult& result);

/// One sweep axis: a config key (dotted path or alias) and its values.
struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

/// Parses "key=v1,v2,...". Throws ConfigError.
SweepAxis parse_sweep(const std::string& text);

struct SweepPoint {
  /// Directory-safe label such as "alpha=1_beta=3".
  std::string label;
  std::vector<std::pair<std::string, std::string>> assignment;
  ExperimentConfig config;
};

/// Cartesian product of the axes, first axis slowest. No axes gives one
/// unlabeled point holding `base`.
std::vector<SweepPoint> sweep_grid(const ExperimentConfig& base,
                                   const std::vector<SweepAxis>& axes);

struct RunSetOutput {
  nlohmann::json summary;
  std::vector<RunResult> results;
};

/// Runs every strategy x seed of `config` into `outdir` and writes the CSVs and
/// summary.json. `wall_clock` adds timing fields, which breaks byte identity
/// of summary.json across reruns.
RunSetOutput run_set(const ExperimentConfig& config, const std::filesystem::path& outdir,
                     bool wall_clock = false, std::ostream* log = nullptr);

struct ExperimentRequest {
  ExperimentConfig config;
  std::vector<SweepAxis> sweep;
  bool wall_clock = false;
};

/// Runs a request (single set or sweep) into config.run.outdir. Returns an
/// exit code and reports errors on `err`.
int run_experiment(const ExperimentRequest& request, std::ostream& out, std::ostream& err);

/// Per-tier totals re-summed from a metrics CSV.
std::map<Tier, CostEntry> resum_metrics_csv(const std::filesystem::path& path);

class CompareError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CompareRow {
  std::string strategy;
  std::size_t runs = 0;
  /// Medians over seeds.
  double final_accuracy = 0.0;
  double best_accuracy = 0.0;
  double ucd_joules = 0.0;
  double ucd_seconds = 0.0;
  std::uint64_t total_bytes = 0;
  /// Relative to the baseline strategy; zero for the baseline itself.
  double delta_accuracy_pp = 0.0;
  double delta_energy_pct = 0.0;
};

/// Needs at least two run entries across `summaries`, all with one dataset
/// hash, and a baseline strategy present among them. Throws CompareError.
std::vector<CompareRow> compare(const std::vector<nlohmann::json>& summaries,
                                const std::string& baseline);

std::string compare_table(const std::vector<CompareRow>& rows, const std::string& baseline);
std::string compare_csv(const std::vector<CompareRow>& rows);

}  // namespace tierfl
