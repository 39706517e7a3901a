#pragma once

// Cost ledger. MACs become seconds via latency = c * MACs / f, transferred
// bytes become seconds via 8 * bytes / bitrate, and every second is charged at
// the power of the unit that spent it.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <tuple>

namespace tierfl {

/// Device parameters as tabulated (MHz, MB, mW/MHz, Mbit/s, W).
struct DeviceTable {
  double cpu_freq_mhz = 0.0;
  double storage_mb = 0.0;
  double power_mw_per_mhz = 0.0;
  double uplink_mbps = 0.0;
  double downlink_mbps = 0.0;
  double comm_power_w = 0.0;
  double disconnect_prob = 0.0;
  double instr_per_mac = 2.0;

  static DeviceTable ucd_default();
  static DeviceTable ap_default();

  friend bool operator==(const DeviceTable&, const DeviceTable&) = default;
};

/// The same parameters in SI units.
struct DeviceProfile {
  double cpu_freq_hz = 0.0;
  double storage_bytes = 0.0;
  /// Compute power at the nominal frequency.
  double compute_power_w = 0.0;
  double uplink_bps = 0.0;
  double downlink_bps = 0.0;
  double comm_power_w = 0.0;
  double disconnect_prob = 0.0;
  double instr_per_mac = 2.0;

  static DeviceProfile from_table(const DeviceTable& table);
  static DeviceProfile ucd_default() { return from_table(DeviceTable::ucd_default()); }
  static DeviceProfile ap_default() { return from_table(DeviceTable::ap_default()); }

  double compute_power_w_per_hz() const { return compute_power_w / cpu_freq_hz; }

  /// Throws std::invalid_argument unless every rate, power, and size is
  /// positive and disconnect_prob lies in [0, 1].
  void validate() const;
};

enum class Tier : std::uint8_t { kUcd, kAp, kServer };
enum class Category : std::uint8_t { kTrainCompute, kSelectionCompute, kCommUp, kCommDown };
enum class EnergyMode { kCompute, kComm };
enum class Direction { kUp, kDown };

inline constexpr std::array<Tier, 3> kAllTiers{Tier::kUcd, Tier::kAp, Tier::kServer};
inline constexpr std::array<Category, 4> kAllCategories{
    Category::kTrainCompute, Category::kSelectionCompute, Category::kCommUp,
    Category::kCommDown};

std::string to_string(Tier tier);
std::string to_string(Category category);
bool is_compute(Category category);

double compute_latency(std::uint64_t macs, const DeviceProfile& profile);
double compute_energy(double seconds, const DeviceProfile& profile, EnergyMode mode);

struct CommCost {
  double seconds = 0.0;
  double joules = 0.0;
};

CommCost compute_comm(std::uint64_t bytes, Direction direction, const DeviceProfile& profile);

struct CostEntry {
  std::uint64_t macs = 0;
  std::uint64_t bytes = 0;
  double seconds = 0.0;
  double joules = 0.0;

  CostEntry& operator+=(const CostEntry& other);
};

/// An un-priced cost event produced by a simulation phase.
struct CostRecord {
  Tier tier = Tier::kUcd;
  Category category = Category::kTrainCompute;
  std::uint64_t macs = 0;
  std::uint64_t bytes = 0;
};

/// Per round x tier x category accumulation. Entries only ever grow.
class CostLedger {
 public:
  /// Prices and accumulates one record. Compute categories carry MACs only and
  /// communication categories carry bytes only; anything else throws
  /// std::invalid_argument.
  void record(std::size_t round, Tier tier, Category category, std::uint64_t macs,
              std::uint64_t bytes, const DeviceProfile& profile);
  void record(std::size_t round, const CostRecord& rec, const DeviceProfile& profile) {
    record(round, rec.tier, rec.category, rec.macs, rec.bytes, profile);
  }

  CostEntry entry(std::size_t round, Tier tier, Category category) const;
  CostEntry round_total(std::size_t round, Tier tier) const;
  CostEntry total(Tier tier, Category category) const;
  CostEntry total(Tier tier) const;
  CostEntry total() const;

  /// Highest round with any record, or 0 when empty.
  std::size_t last_round() const;

  /// Long form: round,tier,category,macs,bytes,seconds,joules for every
  /// touched cell in (round, tier, category) order.
  void write_csv(std::ostream& out) const;

 private:
  using Key = std::tuple<std::size_t, Tier, Category>;
  std::map<Key, CostEntry> cells_;
};

/// Shortest round-trip decimal form of a double; used for every CSV/JSON
/// number so outputs are byte-stable.
std::string format_double(double v);

}  // namespace tierfl
