#include "gridrisk/dcopf.hpp"

#include <algorithm>
#include <cmath>

#include "gridrisk/errors.hpp"

namespace gridrisk {

const char* to_string(OpfStatus status) {
  switch (status) {
    case OpfStatus::Optimal: return "optimal";
    case OpfStatus::Shed: return "shed";
    case OpfStatus::Infeasible: return "infeasible";
  }
  return "?";
}

OpfStatus opf_status_from_string(const std::string& s) {
  if (s == "optimal") return OpfStatus::Optimal;
  if (s == "shed") return OpfStatus::Shed;
  if (s == "infeasible") return OpfStatus::Infeasible;
  throw ParseError("unknown OPF status '" + s + "'");
}

Scenario base_scenario(const Grid& grid) {
  Scenario s;
  for (const auto& bus : grid.buses) s.load.push_back(bus.base_load);
  s.wind.assign(grid.wind_generators().size(), 0.0);
  return s;
}

void check_scenario(const Grid& grid, const Scenario& scenario) {
  if (static_cast<int>(scenario.load.size()) != grid.num_buses()) {
    throw DimensionError("scenario load vector has " + std::to_string(scenario.load.size()) + " entries, grid has " +
                         std::to_string(grid.num_buses()) + " buses");
  }
  if (scenario.wind.size() != grid.wind_generators().size()) {
    throw DimensionError("scenario wind vector does not match the wind generator count");
  }
}

LinearProgram assemble_lp(const Grid& grid, const Scenario& scenario, const DcopfOptions& options,
                          DcopfLayout* layout_out) {
  check_scenario(grid, scenario);
  const int n = grid.num_buses();
  const double base = grid.base_mva;
  const int slack = grid.slack_bus();
  const auto disp = grid.dispatchable_generators();
  const auto wind = grid.wind_generators();

  DcopfLayout layout;
  LinearProgram lp;

  double max_cost = 0.0;
  for (int g : disp) max_cost = std::max(max_cost, grid.generators[g].marginal_cost);
  const double slack_cost = options.slack_cost_factor * std::max(max_cost, 1.0);

  for (int g : disp) {
    const auto& gen = grid.generators[g];
    layout.gen_var.push_back(lp.add_var(gen.marginal_cost * base, gen.p_min / base, gen.p_max / base,
                                        "pg" + std::to_string(g)));
  }
  layout.angle_var.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    if (i == slack) continue;
    layout.angle_var[i] = lp.add_var(0.0, -kInf, kInf, "theta" + std::to_string(i));
  }

  std::vector<double> net(n, 0.0);  // MW demand net of wind
  double total_net = 0.0, total_pmin = 0.0;
  for (int i = 0; i < n; ++i) net[i] = scenario.load[i];
  for (std::size_t k = 0; k < wind.size(); ++k) net[grid.generators[wind[k]].bus] -= scenario.wind[k];
  for (double v : net) total_net += v;
  for (int g : disp) total_pmin += grid.generators[g].p_min;

  // The slack injection covers shortfalls; its lower bound admits exactly the surplus
  // forced by minimum outputs, so a negative injection cannot be bought at a profit.
  const double forced_surplus = std::max(0.0, total_pmin - total_net);
  layout.slack_var = lp.add_var(slack_cost * base, -forced_surplus / base, kInf, "p_slack");

  std::vector<std::vector<std::pair<int, double>>> balance(n);
  for (const auto& br : grid.branches) {
    if (!br.in_service) continue;
    const double y = 1.0 / br.reactance;
    const int f = br.from_bus, t = br.to_bus;
    if (layout.angle_var[f] >= 0) {
      balance[f].emplace_back(layout.angle_var[f], y);
      balance[t].emplace_back(layout.angle_var[f], -y);
    }
    if (layout.angle_var[t] >= 0) {
      balance[t].emplace_back(layout.angle_var[t], y);
      balance[f].emplace_back(layout.angle_var[t], -y);
    }
  }
  for (std::size_t k = 0; k < disp.size(); ++k) {
    balance[grid.generators[disp[k]].bus].emplace_back(layout.gen_var[k], -1.0);
  }
  balance[slack].emplace_back(layout.slack_var, -1.0);

  layout.first_balance_row = lp.num_rows();
  for (int i = 0; i < n; ++i) lp.add_row(std::move(balance[i]), RowSense::Equal, -net[i] / base);

  layout.first_line_row = lp.num_rows();
  for (int k = 0; k < grid.num_branches(); ++k) {
    const auto& br = grid.branches[k];
    if (!br.in_service) continue;
    const double y = 1.0 / br.reactance;
    const double lim = br.flow_limit / base;
    std::vector<std::pair<int, double>> pos, neg;
    if (layout.angle_var[br.from_bus] >= 0) {
      pos.emplace_back(layout.angle_var[br.from_bus], y);
      neg.emplace_back(layout.angle_var[br.from_bus], -y);
    }
    if (layout.angle_var[br.to_bus] >= 0) {
      pos.emplace_back(layout.angle_var[br.to_bus], -y);
      neg.emplace_back(layout.angle_var[br.to_bus], y);
    }
    lp.add_row(std::move(pos), RowSense::LessEqual, lim);
    lp.add_row(std::move(neg), RowSense::LessEqual, lim);
    layout.line_branch.push_back(k);
  }

  if (layout_out) *layout_out = std::move(layout);
  return lp;
}

OpfSolution solve_dcopf(const Grid& grid, const Scenario& scenario, const DcopfOptions& options) {
  DcopfLayout layout;
  const LinearProgram lp = assemble_lp(grid, scenario, options, &layout);
  const LpResult res = solve_lp(lp, options.simplex);

  OpfSolution sol;
  sol.iterations = res.iterations;
  if (res.status != LpStatus::Optimal) {
    sol.status = OpfStatus::Infeasible;
    return sol;
  }
  const double base = grid.base_mva;
  for (int v : layout.gen_var) sol.dispatch.push_back(res.x[v] * base);
  sol.angles.assign(grid.num_buses(), 0.0);
  for (int i = 0; i < grid.num_buses(); ++i) {
    if (layout.angle_var[i] >= 0) sol.angles[i] = res.x[layout.angle_var[i]];
  }
  sol.flows.assign(grid.num_branches(), 0.0);
  for (int k = 0; k < grid.num_branches(); ++k) {
    const auto& br = grid.branches[k];
    if (!br.in_service) continue;
    sol.flows[k] = (sol.angles[br.from_bus] - sol.angles[br.to_bus]) / br.reactance * base;
  }
  sol.slack_injection = res.x[layout.slack_var] * base;
  sol.objective = res.objective;
  sol.status = sol.slack_injection > options.shed_threshold_mw ? OpfStatus::Shed : OpfStatus::Optimal;
  return sol;
}

SystemQoIs derive_qois(const OpfSolution& sol, const Grid& grid, const Scenario& scenario) {
  check_scenario(grid, scenario);
  SystemQoIs q;
  const auto disp = grid.dispatchable_generators();
  double capacity = 0.0;
  for (int g : disp) capacity += grid.generators[g].p_max;
  double load = 0.0, wind = 0.0;
  for (double v : scenario.load) load += v;
  for (double v : scenario.wind) wind += v;
  q.reserve = std::max(capacity - (load - wind), 0.0);
  q.shedding = sol.slack_injection > 0.0 ? sol.slack_injection : 0.0;
  if (sol.dispatch.size() == disp.size()) {
    for (std::size_t k = 0; k < disp.size(); ++k) q.total_cost += grid.generators[disp[k]].marginal_cost * sol.dispatch[k];
  }
  return q;
}

double zonal_reserve(const Grid& grid, const Scenario& scenario, int zone) {
  if (!grid.zones) throw ValidationError("grid has no zone partition");
  const auto& z = *grid.zones;
  if (zone < 1 || zone > z.num_zones) throw LookupError("unknown zone index " + std::to_string(zone));
  check_scenario(grid, scenario);
  double capacity = 0.0;
  for (const auto& gen : grid.generators) {
    if (gen.dispatchable() && z.zone_of_bus[gen.bus] == zone) capacity += gen.p_max;
  }
  double net = 0.0;
  for (int i = 0; i < grid.num_buses(); ++i) {
    if (z.zone_of_bus[i] == zone) net += scenario.load[i];
  }
  const auto wind = grid.wind_generators();
  for (std::size_t k = 0; k < wind.size(); ++k) {
    if (z.zone_of_bus[grid.generators[wind[k]].bus] == zone) net -= scenario.wind[k];
  }
  return std::max(capacity - net, 0.0);
}

std::vector<double> zonal_reserves(const Grid& grid, const Scenario& scenario) {
  std::vector<double> out;
  if (!grid.zones) return out;
  for (int z = 1; z <= grid.zones->num_zones; ++z) out.push_back(zonal_reserve(grid, scenario, z));
  return out;
}

double nodal_balance_residual(const Grid& grid, const Scenario& scenario, const OpfSolution& sol) {
  const int n = grid.num_buses();
  const double base = grid.base_mva;
  std::vector<double> mismatch(n, 0.0);  // (B theta) - (P_G - P_D), per-unit
  for (const auto& br : grid.branches) {
    if (!br.in_service) continue;
    const double f = (sol.angles[br.from_bus] - sol.angles[br.to_bus]) / br.reactance;
    mismatch[br.from_bus] += f;
    mismatch[br.to_bus] -= f;
  }
  const auto disp = grid.dispatchable_generators();
  for (std::size_t k = 0; k < disp.size(); ++k) mismatch[grid.generators[disp[k]].bus] -= sol.dispatch[k] / base;
  const auto wind = grid.wind_generators();
  for (std::size_t k = 0; k < wind.size(); ++k) mismatch[grid.generators[wind[k]].bus] -= scenario.wind[k] / base;
  for (int i = 0; i < n; ++i) mismatch[i] += scenario.load[i] / base;
  mismatch[grid.slack_bus()] -= sol.slack_injection / base;
  double worst = 0.0;
  for (double v : mismatch) worst = std::max(worst, std::abs(v));
  return worst;
}

Grid apply_rating_rule(const Grid& grid, const RatingRule& rule) {
  Grid out = grid;
  switch (rule.kind) {
    case RatingRule::Kind::Keep:
      break;
    case RatingRule::Kind::Fixed:
      if (!(rule.fixed_mw > 0.0)) throw ValidationError("fixed rating must be positive");
      for (auto& br : out.branches) {
        if (!br.rated()) br.flow_limit = rule.fixed_mw;
      }
      break;
    case RatingRule::Kind::BaseFlowMargin: {
      if (!(rule.factor > 0.0) || rule.min_mw < 0.0) throw ValidationError("invalid base-flow rating rule");
      const OpfSolution sol = solve_dcopf(grid, base_scenario(grid));
      if (sol.status == OpfStatus::Infeasible) throw ValidationError("base-load dispatch is infeasible");
      for (int k = 0; k < out.num_branches(); ++k) {
        auto& br = out.branches[k];
        if (br.rated()) continue;
        br.flow_limit = std::max(rule.min_mw, rule.factor * std::abs(sol.flows[k]));
        if (!(br.flow_limit > 0.0)) br.flow_limit = std::max(rule.min_mw, 1.0);
      }
      break;
    }
  }
  validate(out);
  return out;
}

}  // namespace gridrisk
