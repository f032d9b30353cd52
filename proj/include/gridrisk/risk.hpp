#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridrisk/dcopf.hpp"
#include "gridrisk/grid.hpp"

namespace gridrisk {

/// How zonal reserve is measured.
///   Scenario - zone capacity minus zone net load (depends on the scenario only)
///   Dispatch - unused capacity of the zone's units at the dispatch, sum(p_max - P_G)
enum class ZonalReserveMode { Scenario, Dispatch };
const char* to_string(ZonalReserveMode m);
ZonalReserveMode zonal_mode_from_string(const std::string& s);

/// Scope 0 is the whole system, scope z (1..s) is zone z.
struct RiskConfig {
  double epsilon = 0.9;
  std::vector<std::optional<double>> mrr_override;  // per scope; empty or nullopt = largest unit
  std::vector<double> reserve_cost;  // C^S per scope; a single value applies to every scope
  std::vector<double> branch_cost;   // C^B per branch; a single value applies to every branch
  ZonalReserveMode zonal_mode = ZonalReserveMode::Scenario;
  int critical_count = 20;

  void validate(int num_zones, int num_branches) const;
  double reserve_cost_for(int scope) const;
  double branch_cost_for(int branch) const;
  nlohmann::json to_json() const;
  static RiskConfig from_json(const nlohmann::json& j);
};

/// Largest dispatchable unit in the scope unless overridden.
double minimum_reserve_requirement(const Grid& grid, int scope, std::optional<double> override_mw = std::nullopt);

struct QoIRecord {
  SystemQoIs system;
  std::vector<double> zonal_reserve;  // per zone
  std::vector<double> flows;          // per branch, MW
};

struct QoIEnsemble {
  std::string source;  // "opf" or "gnn"
  std::vector<QoIRecord> records;
};

/// Zonal reserves from a per-dispatchable-bus dispatch vector (Grid::dispatchable_buses order).
std::vector<double> dispatch_zonal_reserves(const Grid& grid, const std::vector<double>& bus_dispatch);

struct ProbEstimate {
  double p = 0.0;
  double std_error = 0.0;
  int hits = 0;
  int samples = 0;
};

ProbEstimate prob_reserve_inadequacy(const std::vector<double>& reserves, double mrr);
double risk_reserve(double p, double cost);

/// U_k(i) = 1 iff |flow_k(i)| >= epsilon * limit_i. Unrated branches never overload.
std::vector<std::vector<char>> overload_indicators(const std::vector<std::vector<double>>& flows,
                                                   const std::vector<double>& limits, double epsilon);

std::vector<double> prob_branch_overload(const std::vector<std::vector<char>>& U);

/// Row i of the conditional matrix: P(j overloaded | i overloaded) for every j
/// (entry i is 1). nullopt when branch i never overloads.
std::optional<std::vector<double>> cond_prob_branch_overload(const std::vector<std::vector<char>>& U, int i);

struct BranchRisk {
  std::vector<double> risk;
  std::vector<char> undefined_row;  // risk computed with an undefined conditional row
};

BranchRisk overall_branch_risk(const std::vector<double>& prob,
                               const std::vector<std::optional<std::vector<double>>>& conditional,
                               const std::vector<double>& costs);

/// Top `count` branches by descending probability, ties broken by lower index.
std::vector<int> critical_branches(const std::vector<double>& prob, int count);

struct ScopeResult {
  std::string name;
  double mrr = 0.0;
  ProbEstimate prob;
  double cost = 0.0;
  double risk = 0.0;
};

struct RiskReport {
  std::string source;
  int samples = 0;
  std::uint64_t seed = 0;
  std::string grid_hash;
  double epsilon = 0.9;
  std::string zonal_mode;
  std::vector<ScopeResult> scopes;  // system first, then zones
  std::vector<double> branch_prob;
  std::vector<std::optional<std::vector<double>>> conditional;
  std::vector<double> branch_risk;
  std::vector<char> branch_risk_flagged;
  std::vector<int> critical;
};

RiskReport assess_risk(const Grid& grid, const QoIEnsemble& ensemble, const RiskConfig& config);

struct ErrorSummary {
  std::vector<double> scope_abs_error;
  double max_scope_error = 0.0;
  std::vector<double> branch_abs_error;
  double max_branch_error = 0.0;
  double mean_branch_error = 0.0;
  double mape = 0.0;  // percent, over branches with reference probability >= 0.01
  int mape_branches = 0;
  std::vector<double> risk_abs_error;
  double max_conditional_error = 0.0;
};

ErrorSummary compare_reports(const RiskReport& reference, const RiskReport& candidate);

nlohmann::json report_to_json(const RiskReport& r);
RiskReport report_from_json(const nlohmann::json& j);
nlohmann::json summary_to_json(const ErrorSummary& s);

/// index, from, to (case-file ids), limit, probability, risk, flagged, critical rank
std::string branch_table_csv(const Grid& grid, const RiskReport& r);
/// Row i = given-overloaded branch, column j; undefined rows hold NA.
std::string conditional_matrix_csv(const RiskReport& r);
/// Side-by-side scope table for two reports.
std::string scope_table(const RiskReport& reference, const RiskReport& candidate);

}  // namespace gridrisk
