#include "gridrisk/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <queue>
#include <random>

#include "gridrisk/case_io.hpp"
#include "gridrisk/errors.hpp"

namespace gridrisk {

const char* to_string(BusKind kind) {
  switch (kind) {
    case BusKind::PQ: return "PQ";
    case BusKind::PV: return "PV";
    case BusKind::Slack: return "slack";
  }
  return "?";
}

const char* to_string(GenKind kind) {
  switch (kind) {
    case GenKind::Dispatchable: return "dispatchable";
    case GenKind::Wind: return "wind";
    case GenKind::Slack: return "slack";
  }
  return "?";
}

int Grid::slack_bus() const {
  for (const auto& bus : buses) {
    if (bus.kind == BusKind::Slack) return bus.id;
  }
  throw ValidationError("grid has no slack bus");
}

std::vector<int> Grid::dispatchable_generators() const {
  std::vector<int> out;
  for (int g = 0; g < num_generators(); ++g) {
    if (generators[g].dispatchable()) out.push_back(g);
  }
  return out;
}

std::vector<int> Grid::wind_generators() const {
  std::vector<int> out;
  for (int g = 0; g < num_generators(); ++g) {
    if (generators[g].kind == GenKind::Wind) out.push_back(g);
  }
  return out;
}

std::vector<int> Grid::dispatchable_buses() const {
  std::vector<int> out;
  for (const auto& gen : generators) {
    if (gen.dispatchable()) out.push_back(gen.bus);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> Grid::load_buses() const {
  std::vector<int> out;
  for (const auto& bus : buses) {
    if (bus.base_load > 0.0) out.push_back(bus.id);
  }
  return out;
}

int Grid::bus_by_original_id(int original_id) const {
  for (const auto& bus : buses) {
    if (bus.original_id == original_id) return bus.id;
  }
  throw LookupError("no bus with original id " + std::to_string(original_id));
}

double Grid::total_base_load() const {
  double total = 0.0;
  for (const auto& bus : buses) total += bus.base_load;
  return total;
}

bool is_connected(const Grid& grid) {
  const int n = grid.num_buses();
  if (n == 0) return true;
  std::vector<std::vector<int>> adj(n);
  for (const auto& br : grid.branches) {
    if (!br.in_service) continue;
    adj[br.from_bus].push_back(br.to_bus);
    adj[br.to_bus].push_back(br.from_bus);
  }
  std::vector<char> seen(n, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int visited = 1;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++visited;
        frontier.push(v);
      }
    }
  }
  return visited == n;
}

void validate(const Grid& grid) {
  const int n = grid.num_buses();
  if (n == 0) throw ValidationError("grid has no buses");
  if (!(grid.base_mva > 0.0)) throw ValidationError("base_mva must be positive");

  int slack_count = 0;
  for (int i = 0; i < n; ++i) {
    const auto& bus = grid.buses[i];
    if (bus.id != i) throw ValidationError("bus ids must be contiguous 0..n-1");
    if (bus.kind == BusKind::Slack) ++slack_count;
    if (!std::isfinite(bus.base_load) || bus.base_load < 0.0) {
      throw ValidationError("bus " + std::to_string(bus.original_id) + " has negative or non-finite load");
    }
  }
  if (slack_count == 0) throw ValidationError("grid has no slack bus");
  if (slack_count > 1) throw ValidationError("grid has more than one slack bus");

  {
    std::vector<int> ids;
    for (const auto& bus : grid.buses) ids.push_back(bus.original_id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      throw ValidationError("duplicate original bus ids");
    }
  }

  for (int k = 0; k < grid.num_branches(); ++k) {
    const auto& br = grid.branches[k];
    const std::string tag = "branch " + std::to_string(k + 1);
    if (br.from_bus < 0 || br.from_bus >= n || br.to_bus < 0 || br.to_bus >= n) {
      throw ValidationError(tag + " references a nonexistent bus");
    }
    if (br.from_bus == br.to_bus) throw ValidationError(tag + " is a self-loop");
    if (!(br.reactance > 0.0)) throw ValidationError(tag + " has non-positive reactance");
    if (!(br.flow_limit > 0.0)) throw ValidationError(tag + " has non-positive flow limit");
  }

  for (int g = 0; g < grid.num_generators(); ++g) {
    const auto& gen = grid.generators[g];
    const std::string tag = "generator " + std::to_string(g + 1);
    if (gen.bus < 0 || gen.bus >= n) throw ValidationError(tag + " references a nonexistent bus");
    if (!(gen.p_min >= 0.0 && gen.p_min <= gen.p_max)) {
      throw ValidationError(tag + " violates 0 <= p_min <= p_max");
    }
    if (gen.kind == GenKind::Wind && gen.marginal_cost != 0.0) {
      throw ValidationError(tag + " is wind with nonzero marginal cost");
    }
  }

  if (!is_connected(grid)) throw ValidationError("network of in-service branches is disconnected");

  if (grid.zones) {
    const auto& z = *grid.zones;
    if (static_cast<int>(z.zone_of_bus.size()) != n) {
      throw ValidationError("zone partition does not cover every bus");
    }
  }
}

Grid designate_wind(const Grid& grid, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ValidationError("wind fraction must lie in [0, 1)");
  }
  const int count = static_cast<int>(std::floor(fraction * grid.num_generators()));
  Grid out = grid;
  if (count == 0) return out;

  std::vector<int> candidates;
  bool has_slack_unit = false;
  for (int g = 0; g < grid.num_generators(); ++g) {
    const auto& gen = grid.generators[g];
    if (gen.kind == GenKind::Dispatchable) candidates.push_back(g);
    if (gen.kind == GenKind::Slack) has_slack_unit = true;
  }
  const bool keeps_one = has_slack_unit || count < static_cast<int>(candidates.size());
  if (count > static_cast<int>(candidates.size()) || !keeps_one) {
    throw ValidationError("wind fraction would convert every dispatchable generator");
  }

  // Partial Fisher-Yates on the candidate list; the first `count` entries are chosen.
  std::mt19937_64 rng(seed);
  for (int i = 0; i < count; ++i) {
    const auto span = static_cast<std::uint64_t>(candidates.size() - i);
    const int j = i + static_cast<int>(rng() % span);
    std::swap(candidates[i], candidates[j]);
  }
  for (int i = 0; i < count; ++i) {
    auto& gen = out.generators[candidates[i]];
    gen.kind = GenKind::Wind;
    gen.marginal_cost = 0.0;
    gen.p_min = 0.0;
  }
  if (out.zones) out.zones = partition_zones(out, out.zones->zone_of_bus);
  return out;
}

Eigen::MatrixXd BMatrix::reduced() const {
  const int n = static_cast<int>(full.rows());
  Eigen::MatrixXd r(n - 1, n - 1);
  for (int i = 0, ri = 0; i < n; ++i) {
    if (i == slack) continue;
    for (int j = 0, rj = 0; j < n; ++j) {
      if (j == slack) continue;
      r(ri, rj++) = full(i, j);
    }
    ++ri;
  }
  return r;
}

BMatrix build_susceptance(const Grid& grid) {
  const int n = grid.num_buses();
  BMatrix b;
  b.full = Eigen::MatrixXd::Zero(n, n);
  b.slack = grid.slack_bus();
  for (const auto& br : grid.branches) {
    if (!br.in_service) continue;
    if (br.reactance == 0.0) throw ValidationError("branch with zero reactance");
    const double y = 1.0 / br.reactance;
    b.full(br.from_bus, br.to_bus) -= y;
    b.full(br.to_bus, br.from_bus) -= y;
    b.full(br.from_bus, br.from_bus) += y;
    b.full(br.to_bus, br.to_bus) += y;
  }
  return b;
}

ZonePartition partition_zones(const Grid& grid, const std::vector<int>& zone_of_bus) {
  const int n = grid.num_buses();
  if (static_cast<int>(zone_of_bus.size()) != n) {
    throw DimensionError("zone assignment must list every bus");
  }
  int s = 0;
  for (int z : zone_of_bus) {
    if (z < 1) throw ValidationError("zone indices start at 1");
    s = std::max(s, z);
  }
  ZonePartition p;
  p.num_zones = s;
  p.zone_of_bus = zone_of_bus;
  p.load_buses.assign(s, {});
  p.load_shares.assign(s, {});
  p.wind_gens.assign(s, {});
  p.wind_shares.assign(s, {});
  p.base_load.assign(s, 0.0);
  p.wind_capacity.assign(s, 0.0);

  for (const auto& bus : grid.buses) {
    if (bus.base_load > 0.0) {
      const int z = zone_of_bus[bus.id] - 1;
      p.load_buses[z].push_back(bus.id);
      p.base_load[z] += bus.base_load;
    }
  }
  for (int g = 0; g < grid.num_generators(); ++g) {
    const auto& gen = grid.generators[g];
    if (gen.kind != GenKind::Wind) continue;
    const int z = zone_of_bus[gen.bus] - 1;
    p.wind_gens[z].push_back(g);
    p.wind_capacity[z] += gen.p_max;
  }
  for (int z = 0; z < s; ++z) {
    for (int b : p.load_buses[z]) p.load_shares[z].push_back(grid.buses[b].base_load / p.base_load[z]);
    if (p.load_buses[z].empty()) p.zero_load_zones.push_back(z + 1);
    if (p.wind_capacity[z] > 0.0) {
      for (int g : p.wind_gens[z]) p.wind_shares[z].push_back(grid.generators[g].p_max / p.wind_capacity[z]);
    } else {
      // Zero-capacity wind units get equal shares so the zone still sums to one.
      for (std::size_t k = 0; k < p.wind_gens[z].size(); ++k) {
        p.wind_shares[z].push_back(1.0 / static_cast<double>(p.wind_gens[z].size()));
      }
      if (p.wind_gens[z].empty()) p.zero_wind_zones.push_back(z + 1);
    }
  }
  return p;
}

std::vector<int> block_zone_assignment(const Grid& grid, int count) {
  const int n = grid.num_buses();
  if (count < 1 || count > n) throw ValidationError("zone count must lie in [1, number of buses]");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return grid.buses[a].original_id < grid.buses[b].original_id;
  });
  std::vector<int> zone(n, 1);
  for (int rank = 0; rank < n; ++rank) {
    zone[order[rank]] = 1 + static_cast<int>((static_cast<long long>(rank) * count) / n);
  }
  return zone;
}

std::string grid_hash(const Grid& grid) {
  const std::string canonical = grid_to_json(grid).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gridrisk
