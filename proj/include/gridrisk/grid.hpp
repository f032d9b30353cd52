#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gridrisk {

enum class BusKind { PQ, PV, Slack };
enum class GenKind { Dispatchable, Wind, Slack };

const char* to_string(BusKind kind);
const char* to_string(GenKind kind);

/// A network node. `id` is the internal 0..n-1 index; `original_id` is the case-file number.
struct Bus {
  int id = 0;
  int original_id = 0;
  BusKind kind = BusKind::PQ;
  double base_load = 0.0;  // MW

  bool operator==(const Bus&) const = default;
};

/// Unrated branches carry an infinite flow_limit until a rating rule assigns one.
struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double reactance = 0.0;  // per-unit
  double flow_limit = std::numeric_limits<double>::infinity();  // MW
  bool in_service = true;

  bool rated() const noexcept { return flow_limit < std::numeric_limits<double>::infinity(); }
  bool operator==(const Branch&) const = default;
};

struct Generator {
  int bus = 0;
  double p_min = 0.0;  // MW
  double p_max = 0.0;  // MW
  double marginal_cost = 0.0;  // $/MWh
  GenKind kind = GenKind::Dispatchable;

  /// Slack generators are dispatched like any other unit; only wind is non-dispatchable.
  bool dispatchable() const noexcept { return kind != GenKind::Wind; }
  bool operator==(const Generator&) const = default;
};

/// Load buses and wind generators grouped by zone, with the fixed within-zone shares
/// used to split zonal aggregates back onto buses.
struct ZonePartition {
  int num_zones = 0;
  std::vector<int> zone_of_bus;  // bus id -> zone index 1..num_zones

  std::vector<std::vector<int>> load_buses;     // per zone (0-based slot), bus ids
  std::vector<std::vector<double>> load_shares;  // r_{i,j}
  std::vector<std::vector<int>> wind_gens;      // per zone, generator indices
  std::vector<std::vector<double>> wind_shares;  // q_{i,k}
  std::vector<double> base_load;      // MW per zone
  std::vector<double> wind_capacity;  // MW per zone

  /// Zones that cannot absorb a positive zonal load or wind sample.
  std::vector<int> zero_load_zones;
  std::vector<int> zero_wind_zones;

  bool operator==(const ZonePartition&) const = default;
};

struct Grid {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::optional<ZonePartition> zones;

  int num_buses() const noexcept { return static_cast<int>(buses.size()); }
  int num_branches() const noexcept { return static_cast<int>(branches.size()); }
  int num_generators() const noexcept { return static_cast<int>(generators.size()); }

  int slack_bus() const;
  std::vector<int> dispatchable_generators() const;
  std::vector<int> wind_generators() const;
  /// Buses hosting at least one dispatchable generator, ascending.
  std::vector<int> dispatchable_buses() const;
  std::vector<int> load_buses() const;
  int bus_by_original_id(int original_id) const;

  double total_base_load() const;

  bool operator==(const Grid&) const = default;
};

/// Throws ValidationError describing the first violated invariant.
void validate(const Grid& grid);

bool is_connected(const Grid& grid);

/// Relabels floor(fraction * |generators|) non-slack dispatchable units as wind
/// (zero cost, p_min = 0), chosen by a seeded draw.
Grid designate_wind(const Grid& grid, double fraction, std::uint64_t seed);

/// Full n x n nodal susceptance matrix in per-unit.
struct BMatrix {
  Eigen::MatrixXd full;
  int slack = 0;

  /// Drops the slack row and column.
  Eigen::MatrixXd reduced() const;
};

BMatrix build_susceptance(const Grid& grid);

ZonePartition partition_zones(const Grid& grid, const std::vector<int>& zone_of_bus);

/// Splits buses, ordered by original id, into `count` contiguous blocks of near-equal size.
std::vector<int> block_zone_assignment(const Grid& grid, int count);

/// Stable 64-bit FNV-1a digest of the canonical JSON form of the grid.
std::string grid_hash(const Grid& grid);

}  // namespace gridrisk
