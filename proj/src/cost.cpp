#include "tierfl/cost.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace tierfl {

DeviceTable DeviceTable::ucd_default() {
  return {.cpu_freq_mhz = 100,
          .storage_mb = 5,
          .power_mw_per_mhz = 0.05,
          .uplink_mbps = 2,
          .downlink_mbps = 2,
          .comm_power_w = 0.0001,
          .disconnect_prob = 0.5,
          .instr_per_mac = 2};
}

DeviceTable DeviceTable::ap_default() {
  return {.cpu_freq_mhz = 2000,
          .storage_mb = 4096,
          .power_mw_per_mhz = 1.5,
          .uplink_mbps = 10,
          .downlink_mbps = 100,
          .comm_power_w = 10,
          .disconnect_prob = 0,
          .instr_per_mac = 2};
}

DeviceProfile DeviceProfile::from_table(const DeviceTable& t) {
  return {.cpu_freq_hz = t.cpu_freq_mhz * 1e6,
          .storage_bytes = t.storage_mb * 1e6,
          // mW/MHz times MHz gives mW.
          .compute_power_w = t.power_mw_per_mhz * t.cpu_freq_mhz / 1000.0,
          .uplink_bps = t.uplink_mbps * 1e6,
          .downlink_bps = t.downlink_mbps * 1e6,
          .comm_power_w = t.comm_power_w,
          .disconnect_prob = t.disconnect_prob,
          .instr_per_mac = t.instr_per_mac};
}

void DeviceProfile::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(name) + " must be positive");
    }
  };
  positive(cpu_freq_hz, "cpu frequency");
  positive(storage_bytes, "storage");
  positive(compute_power_w, "compute power");
  positive(uplink_bps, "uplink rate");
  positive(downlink_bps, "downlink rate");
  positive(comm_power_w, "communication power");
  positive(instr_per_mac, "instructions per MAC");
  if (!(disconnect_prob >= 0.0 && disconnect_prob <= 1.0)) {
    throw std::invalid_argument("disconnect probability must lie in [0, 1]");
  }
}

std::string to_string(Tier tier) {
  switch (tier) {
    case Tier::kUcd: return "ucd";
    case Tier::kAp: return "ap";
    case Tier::kServer: return "server";
  }
  return "?";
}

std::string to_string(Category category) {
  switch (category) {
    case Category::kTrainCompute: return "train_compute";
    case Category::kSelectionCompute: return "selection_compute";
    case Category::kCommUp: return "comm_up";
    case Category::kCommDown: return "comm_down";
  }
  return "?";
}

bool is_compute(Category category) {
  return category == Category::kTrainCompute || category == Category::kSelectionCompute;
}

double compute_latency(std::uint64_t macs, const DeviceProfile& profile) {
  return profile.instr_per_mac * static_cast<double>(macs) / profile.cpu_freq_hz;
}

double compute_energy(double seconds, const DeviceProfile& profile, EnergyMode mode) {
  return mode == EnergyMode::kCompute ? seconds * profile.compute_power_w
                                      : seconds * profile.comm_power_w;
}

CommCost compute_comm(std::uint64_t bytes, Direction direction, const DeviceProfile& profile) {
  const double rate = direction == Direction::kUp ? profile.uplink_bps : profile.downlink_bps;
  CommCost c;
  c.seconds = 8.0 * static_cast<double>(bytes) / rate;
  c.joules = compute_energy(c.seconds, profile, EnergyMode::kComm);
  return c;
}

CostEntry& CostEntry::operator+=(const CostEntry& other) {
  macs += other.macs;
  bytes += other.bytes;
  seconds += other.seconds;
  joules += other.joules;
  return *this;
}

void CostLedger::record(std::size_t round, Tier tier, Category category, std::uint64_t macs,
                        std::uint64_t bytes, const DeviceProfile& profile) {
  CostEntry e;
  e.macs = macs;
  e.bytes = bytes;
  if (is_compute(category)) {
    if (bytes != 0) throw std::invalid_argument("compute records cannot carry bytes");
    e.seconds = compute_latency(macs, profile);
    e.joules = compute_energy(e.seconds, profile, EnergyMode::kCompute);
  } else {
    if (macs != 0) throw std::invalid_argument("communication records cannot carry MACs");
    const auto c = compute_comm(
        bytes, category == Category::kCommUp ? Direction::kUp : Direction::kDown, profile);
    e.seconds = c.seconds;
    e.joules = c.joules;
  }
  cells_[{round, tier, category}] += e;
}

CostEntry CostLedger::entry(std::size_t round, Tier tier, Category category) const {
  auto it = cells_.find({round, tier, category});
  return it == cells_.end() ? CostEntry{} : it->second;
}

CostEntry CostLedger::round_total(std::size_t round, Tier tier) const {
  CostEntry sum;
  for (Category c : kAllCategories) sum += entry(round, tier, c);
  return sum;
}

CostEntry CostLedger::total(Tier tier, Category category) const {
  CostEntry sum;
  for (const auto& [key, e] : cells_) {
    if (std::get<1>(key) == tier && std::get<2>(key) == category) sum += e;
  }
  return sum;
}

CostEntry CostLedger::total(Tier tier) const {
  CostEntry sum;
  for (const auto& [key, e] : cells_) {
    if (std::get<1>(key) == tier) sum += e;
  }
  return sum;
}

CostEntry CostLedger::total() const {
  CostEntry sum;
  for (const auto& [key, e] : cells_) sum += e;
  return sum;
}

std::size_t CostLedger::last_round() const {
  return cells_.empty() ? 0 : std::get<0>(cells_.rbegin()->first);
}

void CostLedger::write_csv(std::ostream& out) const {
  out << "round,tier,category,macs,bytes,seconds,joules\n";
  for (const auto& [key, e] : cells_) {
    out << std::get<0>(key) << ',' << to_string(std::get<1>(key)) << ','
        << to_string(std::get<2>(key)) << ',' << e.macs << ',' << e.bytes << ','
        << format_double(e.seconds) << ',' << format_double(e.joules) << '\n';
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("double formatting failed");
  return std::string(buf, end);
}

}  // namespace tierfl
