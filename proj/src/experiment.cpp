#include "tierfl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

namespace tierfl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(text);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string run_stem(const RunResult& r) {
  return to_string(r.strategy) + "_" + std::to_string(r.seed);
}

json entry_json(const CostEntry& e) {
  return {{"macs", e.macs}, {"bytes", e.bytes}, {"seconds", e.seconds}, {"joules", e.joules}};
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string metrics_header() {
  std::string h = "round,accuracy";
  for (Tier t : kAllTiers) {
    const std::string p = to_string(t);
    h += "," + p + "_macs," + p + "_bytes," + p + "_seconds," + p + "_joules";
  }
  return h;
}

std::string metrics_csv(const RunResult& result) {
  std::string out = metrics_header() + "\n";
  for (const auto& m : result.rounds) {
    out += std::to_string(m.round) + "," + format_double(m.accuracy);
    for (Tier t : kAllTiers) {
      const CostEntry e = result.ledger.round_total(m.round, t);
      out += "," + std::to_string(e.macs) + "," + std::to_string(e.bytes) + "," +
             format_double(e.seconds) + "," + format_double(e.joules);
    }
    out += "\n";
  }
  return out;
}

SweepAxis parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw ConfigError("--sweep", "expected KEY=V1,V2,... but got '" + text + "'");
  }
  SweepAxis axis{text.substr(0, eq), split(text.substr(eq + 1), ',')};
  for (const auto& v : axis.values) {
    if (v.empty()) throw ConfigError("--sweep", "empty value in '" + text + "'");
  }
  return axis;
}

std::vector<SweepPoint> sweep_grid(const ExperimentConfig& base,
                                   const std::vector<SweepAxis>& axes) {
  std::vector<SweepPoint> points{{"", {}, base}};
  for (const auto& axis : axes) {
    std::vector<SweepPoint> next;
    for (const auto& p : points) {
      for (const auto& v : axis.values) {
        SweepPoint q = p;
        q.assignment.emplace_back(axis.key, v);
        q.label += (q.label.empty() ? "" : "_") + axis.key + "=" + v;
        q.config = with_override(p.config, axis.key, v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

RunSetOutput run_set(const ExperimentConfig& config, const fs::path& outdir, bool wall_clock,
                     std::ostream* log) {
  fs::create_directories(outdir / "ledger");
  RunSetOutput out;
  json runs = json::array();
  json files = json::array();
  const auto set_start = std::chrono::steady_clock::now();
  for (StrategyKind strategy : config.run.strategies) {
    for (std::uint64_t seed : config.run.seeds) {
      const auto start = std::chrono::steady_clock::now();
      RunResult r = run(strategy, config, seed);
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      const std::string stem = run_stem(r);
      const std::string csv_name = stem + ".csv";
      const std::string ledger_name = "ledger/" + stem + ".csv";
      write_file(outdir / csv_name, metrics_csv(r));
      std::ostringstream ledger;
      r.ledger.write_csv(ledger);
      write_file(outdir / ledger_name, ledger.str());

      json totals = json::object();
      for (Tier t : kAllTiers) totals[to_string(t)] = entry_json(r.ledger.total(t));
      json entry{{"strategy", to_string(strategy)},
                 {"seed", seed},
                 {"final_accuracy", r.final_accuracy()},
                 {"best_accuracy", r.best_accuracy()},
                 {"rounds", r.rounds.size()},
                 {"classifier", r.classifier.name},
                 {"storage_warnings", r.storage_warnings},
                 {"empty_clients", r.empty_clients},
                 {"totals", totals},
                 {"csv", csv_name},
                 {"ledger", ledger_name}};
      if (r.mean_lambda) entry["mean_lambda"] = *r.mean_lambda;
      if (wall_clock) entry["wall_clock_seconds"] = elapsed;
      runs.push_back(std::move(entry));
      files.push_back(csv_name);
      files.push_back(ledger_name);
      if (log) {
        *log << stem << ": final accuracy " << format_double(r.final_accuracy())
             << ", UCD energy " << format_double(r.ledger.total(Tier::kUcd).joules) << " J\n";
      }
      out.results.push_back(std::move(r));
    }
  }
  out.summary = {{"config_hash", config_hash(config)},
                 {"dataset_hash", dataset_hash(config)},
                 {"config", to_json(config)},
                 {"runs", runs},
                 {"files", files}};
  if (wall_clock) {
    out.summary["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - set_start).count();
  }
  write_file(outdir / "summary.json", out.summary.dump(2) + "\n");
  return out;
}

int run_experiment(const ExperimentRequest& request, std::ostream& out, std::ostream& err) {
  try {
    const auto points = sweep_grid(request.config, request.sweep);
    // Check every budget before writing anything.
    for (const auto& p : points) {
      p.config.validate();
      select_classifier(p.config.candidates(),
                        p.config.model.encoder_widths.empty() ? p.config.dataset.dim
                                                              : p.config.model.encoder_widths.back(),
                        p.config.budget(), p.config.model.policy);
    }
    const fs::path outdir = request.config.run.outdir;
    if (request.sweep.empty()) {
      run_set(request.config, outdir, request.wall_clock, &out);
      out << "wrote " << (outdir / "summary.json").string() << "\n";
      return kExitOk;
    }
    fs::create_directories(outdir);
    std::string sweep_csv;
    for (const auto& axis : request.sweep) sweep_csv += axis.key + ",";
    sweep_csv += "strategy,seed,final_accuracy,best_accuracy,ucd_joules,total_bytes,dir\n";
    for (const auto& p : points) {
      out << "[" << p.label << "]\n";
      const auto set = run_set(p.config, outdir / p.label, request.wall_clock, &out);
      for (const auto& r : set.results) {
        for (const auto& [key, value] : p.assignment) sweep_csv += value + ",";
        sweep_csv += to_string(r.strategy) + "," + std::to_string(r.seed) + "," +
                     format_double(r.final_accuracy()) + "," +
                     format_double(r.best_accuracy()) + "," +
                     format_double(r.ledger.total(Tier::kUcd).joules) + "," +
                     std::to_string(r.ledger.total().bytes) + "," + p.label + "\n";
      }
    }
    write_file(outdir / "sweep.csv", sweep_csv);
    out << "wrote " << (outdir / "sweep.csv").string() << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const BudgetInfeasible& e) {
    err << "infeasible budget: " << e.what() << "\n";
    return kExitInfeasibleBudget;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

std::map<Tier, CostEntry> resum_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != metrics_header()) throw std::runtime_error(path.string() + ": unexpected header");
  std::map<Tier, CostEntry> totals;
  for (Tier t : kAllTiers) totals[t] = {};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 2 + 4 * kAllTiers.size()) {
      throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    }
    for (std::size_t k = 0; k < kAllTiers.size(); ++k) {
      const std::size_t base = 2 + 4 * k;
      CostEntry e;
      e.macs = std::stoull(cells[base]);
      e.bytes = std::stoull(cells[base + 1]);
      e.seconds = std::stod(cells[base + 2]);
      e.joules = std::stod(cells[base + 3]);
      totals[kAllTiers[k]] += e;
    }
  }
  return totals;
}

std::vector<CompareRow> compare(const std::vector<json>& summaries, const std::string& baseline) {
  std::string hash;
  std::map<std::string, std::vector<const json*>> by_strategy;
  std::size_t entries = 0;
  for (const auto& s : summaries) {
    if (!s.contains("dataset_hash") || !s.contains("runs")) {
      throw CompareError("input is not a run summary");
    }
    const std::string h = s.at("dataset_hash").get<std::string>();
    if (hash.empty()) {
      hash = h;
    } else if (h != hash) {
      throw CompareError("dataset hash mismatch (" + hash + " vs " + h +
                         "): runs were made on different data");
    }
    for (const auto& r : s.at("runs")) {
      by_strategy[r.at("strategy").get<std::string>()].push_back(&r);
      ++entries;
    }
  }
  if (entries < 2) throw CompareError("need at least two runs to compare");
  if (!by_strategy.count(baseline)) {
    throw CompareError("baseline strategy '" + baseline + "' not among the inputs");
  }

  std::vector<CompareRow> rows;
  for (const auto& [strategy, runs] : by_strategy) {
    std::vector<double> fin, best, joules, seconds, bytes;
    for (const json* r : runs) {
      fin.push_back(r->at("final_accuracy").get<double>());
      best.push_back(r->at("best_accuracy").get<double>());
      const json& ucd = r->at("totals").at("ucd");
      joules.push_back(ucd.at("joules").get<double>());
      seconds.push_back(ucd.at("seconds").get<double>());
      std::uint64_t total = 0;
      for (const auto& [tier, e] : r->at("totals").items()) total += e.at("bytes").get<std::uint64_t>();
      bytes.push_back(static_cast<double>(total));
    }
    CompareRow row;
    row.strategy = strategy;
    row.runs = runs.size();
    row.final_accuracy = median(fin);
    row.best_accuracy = median(best);
    row.ucd_joules = median(joules);
    row.ucd_seconds = median(seconds);
    row.total_bytes = static_cast<std::uint64_t>(std::llround(median(bytes)));
    rows.push_back(row);
  }
  const auto base = std::find_if(rows.begin(), rows.end(),
                                 [&](const CompareRow& r) { return r.strategy == baseline; });
  const CompareRow ref = *base;
  for (auto& r : rows) {
    r.delta_accuracy_pp = 100.0 * (r.final_accuracy - ref.final_accuracy);
    r.delta_energy_pct =
        ref.ucd_joules > 0.0 ? 100.0 * (r.ucd_joules - ref.ucd_joules) / ref.ucd_joules : 0.0;
  }
  return rows;
}

std::string compare_table(const std::vector<CompareRow>& rows, const std::string& baseline) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "strategy" << std::right << std::setw(6) << "runs"
      << std::setw(10) << "final" << std::setw(10) << "best" << std::setw(14) << "ucd_J"
      << std::setw(12) << "ucd_s" << std::setw(14) << "bytes" << std::setw(10) << "dAcc_pp"
      << std::setw(10) << "dE_%" << "\n";
  out << std::fixed;
  for (const auto& r : rows) {
    out << std::left << std::setw(10) << r.strategy << std::right << std::setw(6) << r.runs
        << std::setprecision(4) << std::setw(10) << r.final_accuracy << std::setw(10)
        << r.best_accuracy << std::setprecision(6) << std::setw(14) << r.ucd_joules
        << std::setprecision(2) << std::setw(12) << r.ucd_seconds << std::setw(14)
        << r.total_bytes << std::setw(10) << r.delta_accuracy_pp << std::setw(10)
        << r.delta_energy_pct << "\n";
  }
  out << "deltas relative to " << baseline << " (medians over seeds)\n";
  return out.str();
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string out =
      "strategy,runs,final_accuracy,best_accuracy,ucd_joules,ucd_seconds,total_bytes,"
      "delta_accuracy_pp,delta_energy_pct\n";
  for (const auto& r : rows) {
    out += r.strategy + "," + std::to_string(r.runs) + "," + format_double(r.final_accuracy) +
           "," + format_double(r.best_accuracy) + "," + format_double(r.ucd_joules) + "," +
           format_double(r.ucd_seconds) + "," + std::to_string(r.total_bytes) + "," +
           format_double(r.delta_accuracy_pp) + "," + format_double(r.delta_energy_pct) + "\n";
  }
  return out;
}

}  // namespace tierfl
