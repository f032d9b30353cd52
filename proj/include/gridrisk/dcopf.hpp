#pragma once

#include <string>
#include <vector>

#include "gridrisk/grid.hpp"
#include "gridrisk/lp.hpp"

namespace gridrisk {

/// One realization of the stochastic inputs.
struct Scenario {
  std::vector<double> load;  // MW per bus (zero at non-load buses)
  std::vector<double> wind;  // MW per wind generator, in Grid::wind_generators() order

  bool operator==(const Scenario&) const = default;
};

/// Loads at their base values and no wind.
Scenario base_scenario(const Grid& grid);

void check_scenario(const Grid& grid, const Scenario& scenario);

enum class OpfStatus { Optimal, Shed, Infeasible };
const char* to_string(OpfStatus status);
OpfStatus opf_status_from_string(const std::string& s);

struct OpfSolution {
  std::vector<double> dispatch;  // MW per dispatchable generator, Grid::dispatchable_generators() order
  std::vector<double> angles;    // rad per bus
  std::vector<double> flows;     // MW per branch, from -> to
  double slack_injection = 0.0;  // MW
  double objective = 0.0;        // $/h, including the slack penalty
  OpfStatus status = OpfStatus::Infeasible;
  int iterations = 0;

  bool operator==(const OpfSolution&) const = default;
};

struct SystemQoIs {
  double reserve = 0.0;     // MW
  double shedding = 0.0;    // MW
  double total_cost = 0.0;  // $/h

  bool operator==(const SystemQoIs&) const = default;
};

struct DcopfOptions {
  /// Slack injection price relative to the most expensive unit.
  double slack_cost_factor = 1e4;
  double shed_threshold_mw = 1e-6;
  SimplexOptions simplex;
};

/// Variable and row indices of the assembled program.
struct DcopfLayout {
  std::vector<int> gen_var;    // per dispatchable generator
  std::vector<int> angle_var;  // per bus, -1 for the slack bus
  int slack_var = -1;
  int first_balance_row = 0;
  int first_line_row = 0;      // two rows per in-service branch: +flow <= limit, -flow <= limit
  std::vector<int> line_branch;  // branch index of each line-row pair
};

/// Builds the per-unit DC OPF linear program. Wind output is netted from nodal demand.
LinearProgram assemble_lp(const Grid& grid, const Scenario& scenario, const DcopfOptions& options = {},
                          DcopfLayout* layout = nullptr);

OpfSolution solve_dcopf(const Grid& grid, const Scenario& scenario, const DcopfOptions& options = {});

SystemQoIs derive_qois(const OpfSolution& sol, const Grid& grid, const Scenario& scenario);

/// Reserve restricted to one zone (1-based): dispatchable capacity minus net load, clipped at 0.
double zonal_reserve(const Grid& grid, const Scenario& scenario, int zone);

/// Zonal reserves for every zone, in zone order.
std::vector<double> zonal_reserves(const Grid& grid, const Scenario& scenario);

/// max_i |(B theta)_i - (P_G - P_D)_i| in per-unit.
double nodal_balance_residual(const Grid& grid, const Scenario& scenario, const OpfSolution& sol);

/// How to rate branches that the case file leaves unrated (rateA = 0).
struct RatingRule {
  enum class Kind { Keep, Fixed, BaseFlowMargin };
  Kind kind = Kind::Keep;
  double fixed_mw = 0.0;
  /// BaseFlowMargin: limit = max(min_mw, factor * |flow|) at the base-load dispatch.
  double factor = 1.0;
  double min_mw = 0.0;
};

/// Assigns limits to unrated branches; rated branches are left untouched.
Grid apply_rating_rule(const Grid& grid, const RatingRule& rule);

}  // namespace gridrisk
