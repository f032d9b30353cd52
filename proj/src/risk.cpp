#include "gridrisk/risk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "gridrisk/errors.hpp"

namespace gridrisk {

const char* to_string(ZonalReserveMode m) { return m == ZonalReserveMode::Scenario ? "scenario" : "dispatch"; }

ZonalReserveMode zonal_mode_from_string(const std::string& s) {
  if (s == "scenario") return ZonalReserveMode::Scenario;
  if (s == "dispatch") return ZonalReserveMode::Dispatch;
  throw ValidationError("unknown zonal reserve mode '" + s + "'");
}

void RiskConfig::validate(int num_zones, int num_branches) const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ValidationError("overload threshold epsilon must lie in (0, 1]");
  if (!mrr_override.empty() && static_cast<int>(mrr_override.size()) != num_zones + 1) {
    throw DimensionError("mrr overrides need one entry per scope (system + zones)");
  }
  for (const auto& o : mrr_override) {
    if (o && !(*o >= 0.0)) throw ValidationError("explicit MRR must be non-negative");
  }
  if (reserve_cost.size() > 1 && static_cast<int>(reserve_cost.size()) != num_zones + 1) {
    throw DimensionError("reserve costs need one value or one per scope");
  }
  if (branch_cost.size() > 1 && static_cast<int>(branch_cost.size()) != num_branches) {
    throw DimensionError("branch costs need one value or one per branch");
  }
  for (double c : reserve_cost) {
    if (!(c >= 0.0)) throw ValidationError("consequence costs must be non-negative");
  }
  for (double c : branch_cost) {
    if (!(c >= 0.0)) throw ValidationError("consequence costs must be non-negative");
  }
  if (critical_count < 0) throw ValidationError("critical_count must be non-negative");
}

double RiskConfig::reserve_cost_for(int scope) const {
  if (reserve_cost.empty()) return 0.0;
  return reserve_cost.size() == 1 ? reserve_cost[0] : reserve_cost.at(scope);
}

double RiskConfig::branch_cost_for(int branch) const {
  if (branch_cost.empty()) return 0.0;
  return branch_cost.size() == 1 ? branch_cost[0] : branch_cost.at(branch);
}

nlohmann::json RiskConfig::to_json() const {
  nlohmann::json mrr = nlohmann::json::array();
  for (const auto& o : mrr_override) {
    if (o) mrr.push_back(*o);
    else mrr.push_back(nullptr);
  }
  return {{"epsilon", epsilon},           {"mrr_override", mrr},
          {"reserve_cost", reserve_cost}, {"branch_cost", branch_cost},
          {"zonal_reserve", to_string(zonal_mode)}, {"critical_count", critical_count}};
}

RiskConfig RiskConfig::from_json(const nlohmann::json& j) {
  RiskConfig c;
  c.epsilon = j.value("epsilon", c.epsilon);
  if (j.contains("mrr_override")) {
    for (const auto& o : j.at("mrr_override")) {
      if (o.is_null()) c.mrr_override.emplace_back(std::nullopt);
      else c.mrr_override.emplace_back(o.get<double>());
    }
  }
  auto numbers = [&](const char* key, std::vector<double>& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (v.is_number()) out = {v.get<double>()};
    else out = v.get<std::vector<double>>();
  };
  numbers("reserve_cost", c.reserve_cost);
  numbers("branch_cost", c.branch_cost);
  c.zonal_mode = zonal_mode_from_string(j.value("zonal_reserve", std::string("scenario")));
  c.critical_count = j.value("critical_count", c.critical_count);
  return c;
}

double minimum_reserve_requirement(const Grid& grid, int scope, std::optional<double> override_mw) {
  if (override_mw) return *override_mw;
  if (scope < 0 || (scope > 0 && (!grid.zones || scope > grid.zones->num_zones))) {
    throw LookupError("unknown reserve scope " + std::to_string(scope));
  }
  double best = -1.0;
  for (const auto& gen : grid.generators) {
    if (!gen.dispatchable()) continue;
    if (scope > 0 && grid.zones->zone_of_bus[gen.bus] != scope) continue;
    best = std::max(best, gen.p_max);
  }
  if (best < 0.0) throw ValidationError("scope " + std::to_string(scope) + " has no dispatchable generator and no MRR override");
  return best;
}

std::vector<double> dispatch_zonal_reserves(const Grid& grid, const std::vector<double>& bus_dispatch) {
  if (!grid.zones) throw ValidationError("grid has no zone partition");
  const auto buses = grid.dispatchable_buses();
  if (bus_dispatch.size() != buses.size()) throw DimensionError("bus dispatch vector does not match the grid");
  const auto& z = *grid.zones;
  std::vector<double> out(z.num_zones, 0.0);
  for (const auto& gen : grid.generators) {
    if (gen.dispatchable()) out[z.zone_of_bus[gen.bus] - 1] += gen.p_max;
  }
  for (std::size_t k = 0; k < buses.size(); ++k) out[z.zone_of_bus[buses[k]] - 1] -= bus_dispatch[k];
  for (auto& v : out) v = std::max(v, 0.0);
  return out;
}

ProbEstimate prob_reserve_inadequacy(const std::vector<double>& reserves, double mrr) {
  ProbEstimate e;
  e.samples = static_cast<int>(reserves.size());
  if (reserves.empty()) throw ValidationError("reserve ensemble is empty");
  for (double r : reserves) e.hits += r < mrr ? 1 : 0;
  e.p = static_cast<double>(e.hits) / e.samples;
  e.std_error = std::sqrt(e.p * (1.0 - e.p) / e.samples);
  return e;
}

double risk_reserve(double p, double cost) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability must lie in [0, 1]");
  return p * cost;
}

std::vector<std::vector<char>> overload_indicators(const std::vector<std::vector<double>>& flows,
                                                   const std::vector<double>& limits, double epsilon) {
  std::vector<std::vector<char>> U(flows.size(), std::vector<char>(limits.size(), 0));
  for (std::size_t k = 0; k < flows.size(); ++k) {
    if (flows[k].size() != limits.size()) throw DimensionError("flow record does not match the branch count");
    for (std::size_t i = 0; i < limits.size(); ++i) {
      U[k][i] = std::isfinite(limits[i]) && std::abs(flows[k][i]) >= epsilon * limits[i] ? 1 : 0;
    }
  }
  return U;
}

std::vector<double> prob_branch_overload(const std::vector<std::vector<char>>& U) {
  if (U.empty()) throw ValidationError("flow ensemble is empty");
  std::vector<double> p(U.front().size(), 0.0);
  for (const auto& row : U) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += row[i];
  }
  for (auto& v : p) v /= static_cast<double>(U.size());
  return p;
}

std::optional<std::vector<double>> cond_prob_branch_overload(const std::vector<std::vector<char>>& U, int i) {
  if (U.empty()) throw ValidationError("flow ensemble is empty");
  const std::size_t n = U.front().size();
  if (i < 0 || static_cast<std::size_t>(i) >= n) throw LookupError("branch index out of range");
  std::vector<double> p(n, 0.0);
  int omega = 0;
  for (const auto& row : U) {
    if (!row[i]) continue;
    ++omega;
    for (std::size_t j = 0; j < n; ++j) p[j] += row[j];
  }
  if (omega == 0) return std::nullopt;
  for (auto& v : p) v /= omega;
  return p;
}

BranchRisk overall_branch_risk(const std::vector<double>& prob,
                               const std::vector<std::optional<std::vector<double>>>& conditional,
                               const std::vector<double>& costs) {
  const std::size_t n = prob.size();
  if (conditional.size() != n || costs.size() != n) throw DimensionError("branch risk inputs differ in length");
  BranchRisk r;
  r.risk.assign(n, 0.0);
  r.undefined_row.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double v = prob[i] * costs[i];
    if (conditional[i]) {
      const auto& row = *conditional[i];
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) v += row[j] * costs[j];
      }
    } else {
      r.undefined_row[i] = 1;
    }
    r.risk[i] = v;
  }
  return r;
}

std::vector<int> critical_branches(const std::vector<double>& prob, int count) {
  std::vector<int> idx(prob.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return prob[a] > prob[b]; });
  if (count < static_cast<int>(idx.size())) idx.resize(count);
  return idx;
}

RiskReport assess_risk(const Grid& grid, const QoIEnsemble& ensemble, const RiskConfig& config) {
  const int zones = grid.zones ? grid.zones->num_zones : 0;
  config.validate(zones, grid.num_branches());
  if (ensemble.records.empty()) throw ValidationError("QoI ensemble is empty");
  RiskReport r;
  r.source = ensemble.source;
  r.samples = static_cast<int>(ensemble.records.size());
  r.grid_hash = grid_hash(grid);
  r.epsilon = config.epsilon;
  r.zonal_mode = to_string(config.zonal_mode);

  for (int scope = 0; scope <= zones; ++scope) {
    std::vector<double> reserves;
    reserves.reserve(ensemble.records.size());
    for (const auto& rec : ensemble.records) {
      if (scope == 0) {
        reserves.push_back(rec.system.reserve);
      } else {
        if (static_cast<int>(rec.zonal_reserve.size()) != zones) throw DimensionError("record lacks zonal reserves");
        reserves.push_back(rec.zonal_reserve[scope - 1]);
      }
    }
    ScopeResult s;
    s.name = scope == 0 ? "system" : "zone " + std::to_string(scope);
    const std::optional<double> ov = config.mrr_override.empty() ? std::nullopt : config.mrr_override[scope];
    s.mrr = minimum_reserve_requirement(grid, scope, ov);
    s.prob = prob_reserve_inadequacy(reserves, s.mrr);
    s.cost = config.reserve_cost_for(scope);
    s.risk = risk_reserve(s.prob.p, s.cost);
    r.scopes.push_back(s);
  }

  std::vector<std::vector<double>> flows;
  flows.reserve(ensemble.records.size());
  for (const auto& rec : ensemble.records) flows.push_back(rec.flows);
  std::vector<double> limits;
  for (const auto& br : grid.branches) limits.push_back(br.flow_limit);
  const auto U = overload_indicators(flows, limits, config.epsilon);
  r.branch_prob = prob_branch_overload(U);
  for (int i = 0; i < grid.num_branches(); ++i) {
    r.conditional.push_back(r.branch_prob[i] > 0.0 ? cond_prob_branch_overload(U, i) : std::nullopt);
  }
  std::vector<double> costs(grid.num_branches());
  for (int i = 0; i < grid.num_branches(); ++i) costs[i] = config.branch_cost_for(i);
  const BranchRisk br = overall_branch_risk(r.branch_prob, r.conditional, costs);
  r.branch_risk = br.risk;
  r.branch_risk_flagged = br.undefined_row;
  r.critical = critical_branches(r.branch_prob, config.critical_count);
  return r;
}

ErrorSummary compare_reports(const RiskReport& a, const RiskReport& b) {
  if (a.scopes.size() != b.scopes.size() || a.branch_prob.size() != b.branch_prob.size() ||
      a.conditional.size() != b.conditional.size() || a.branch_risk.size() != b.branch_risk.size()) {
    throw DimensionError("reports have different shapes");
  }
  ErrorSummary s;
  for (std::size_t k = 0; k < a.scopes.size(); ++k) {
    s.scope_abs_error.push_back(std::abs(a.scopes[k].prob.p - b.scopes[k].prob.p));
    s.max_scope_error = std::max(s.max_scope_error, s.scope_abs_error.back());
  }
  double sum = 0.0, ape = 0.0;
  for (std::size_t i = 0; i < a.branch_prob.size(); ++i) {
    const double e = std::abs(a.branch_prob[i] - b.branch_prob[i]);
    s.branch_abs_error.push_back(e);
    s.max_branch_error = std::max(s.max_branch_error, e);
    sum += e;
    if (a.branch_prob[i] >= 0.01) {
      ape += e / a.branch_prob[i];
      ++s.mape_branches;
    }
    s.risk_abs_error.push_back(std::abs(a.branch_risk[i] - b.branch_risk[i]));
    if (a.conditional[i] && b.conditional[i]) {
      for (std::size_t j = 0; j < a.conditional[i]->size(); ++j) {
        s.max_conditional_error = std::max(s.max_conditional_error, std::abs((*a.conditional[i])[j] - (*b.conditional[i])[j]));
      }
    }
  }
  if (!a.branch_prob.empty()) s.mean_branch_error = sum / static_cast<double>(a.branch_prob.size());
  s.mape = s.mape_branches > 0 ? 100.0 * ape / s.mape_branches : 0.0;
  return s;
}

nlohmann::json report_to_json(const RiskReport& r) {
  nlohmann::json scopes = nlohmann::json::array();
  for (const auto& s : r.scopes) {
    scopes.push_back({{"name", s.name}, {"mrr", s.mrr}, {"probability", s.prob.p}, {"std_error", s.prob.std_error},
                      {"hits", s.prob.hits}, {"samples", s.prob.samples}, {"cost", s.cost}, {"risk", s.risk}});
  }
  nlohmann::json cond = nlohmann::json::array();
  for (const auto& row : r.conditional) {
    if (row) cond.push_back(*row);
    else cond.push_back(nullptr);
  }
  std::vector<int> flagged(r.branch_risk_flagged.begin(), r.branch_risk_flagged.end());
  return {{"format", "gridrisk-report"},
          {"version", 1},
          {"source", r.source},
          {"samples", r.samples},
          {"seed", r.seed},
          {"grid_hash", r.grid_hash},
          {"epsilon", r.epsilon},
          {"zonal_reserve", r.zonal_mode},
          {"scopes", scopes},
          {"branch_probability", r.branch_prob},
          {"conditional", cond},
          {"branch_risk", r.branch_risk},
          {"branch_risk_undefined_row", flagged},
          {"critical", r.critical}};
}

RiskReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "gridrisk-report") throw ParseError("not a risk report");
    RiskReport r;
    r.source = j.at("source").get<std::string>();
    r.samples = j.at("samples").get<int>();
    r.seed = j.value("seed", std::uint64_t{0});
    r.grid_hash = j.value("grid_hash", "");
    r.epsilon = j.at("epsilon").get<double>();
    r.zonal_mode = j.value("zonal_reserve", "scenario");
    for (const auto& s : j.at("scopes")) {
      ScopeResult x;
      x.name = s.at("name").get<std::string>();
      x.mrr = s.at("mrr").get<double>();
      x.prob.p = s.at("probability").get<double>();
      x.prob.std_error = s.at("std_error").get<double>();
      x.prob.hits = s.at("hits").get<int>();
      x.prob.samples = s.at("samples").get<int>();
      x.cost = s.at("cost").get<double>();
      x.risk = s.at("risk").get<double>();
      r.scopes.push_back(x);
    }
    r.branch_prob = j.at("branch_probability").get<std::vector<double>>();
    for (const auto& row : j.at("conditional")) {
      if (row.is_null()) r.conditional.emplace_back(std::nullopt);
      else r.conditional.emplace_back(row.get<std::vector<double>>());
    }
    r.branch_risk = j.at("branch_risk").get<std::vector<double>>();
    for (int f : j.at("branch_risk_undefined_row").get<std::vector<int>>()) r.branch_risk_flagged.push_back(static_cast<char>(f));
    r.critical = j.at("critical").get<std::vector<int>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("risk report: ") + e.what());
  }
}

nlohmann::json summary_to_json(const ErrorSummary& s) {
  return {{"format", "gridrisk-error-summary"},
          {"scope_abs_error", s.scope_abs_error},
          {"max_scope_error", s.max_scope_error},
          {"branch_abs_error", s.branch_abs_error},
          {"max_branch_error", s.max_branch_error},
          {"mean_branch_error", s.mean_branch_error},
          {"mape_percent", s.mape},
          {"mape_branches", s.mape_branches},
          {"risk_abs_error", s.risk_abs_error},
          {"max_conditional_error", s.max_conditional_error}};
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string branch_table_csv(const Grid& grid, const RiskReport& r) {
  if (static_cast<int>(r.branch_prob.size()) != grid.num_branches()) throw DimensionError("report does not match the grid");
  std::vector<int> rank(grid.num_branches(), 0);
  for (std::size_t k = 0; k < r.critical.size(); ++k) rank[r.critical[k]] = static_cast<int>(k) + 1;
  std::ostringstream out;
  out << "branch,from,to,limit_mw,probability,risk,undefined_row,critical_rank\n";
  for (int i = 0; i < grid.num_branches(); ++i) {
    const auto& br = grid.branches[i];
    out << i << ',' << grid.buses[br.from_bus].original_id << ',' << grid.buses[br.to_bus].original_id << ','
        << (br.rated() ? num(br.flow_limit) : "inf") << ',' << num(r.branch_prob[i]) << ',' << num(r.branch_risk[i])
        << ',' << int(r.branch_risk_flagged[i]) << ',' << rank[i] << '\n';
  }
  return out.str();
}

std::string conditional_matrix_csv(const RiskReport& r) {
  std::ostringstream out;
  const std::size_t n = r.conditional.size();
  out << "given";
  for (std::size_t j = 0; j < n; ++j) out << ',' << j;
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << i;
    for (std::size_t j = 0; j < n; ++j) out << ',' << (r.conditional[i] ? num((*r.conditional[i])[j]) : "NA");
    out << '\n';
  }
  return out.str();
}

std::string scope_table(const RiskReport& a, const RiskReport& b) {
  if (a.scopes.size() != b.scopes.size()) throw DimensionError("reports have different scopes");
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %10s %10s %10s %12s %12s\n", "scope", "MRR", ("P:" + a.source).c_str(),
                ("P:" + b.source).c_str(), ("R:" + a.source).c_str(), ("R:" + b.source).c_str());
  out << line;
  for (std::size_t k = 0; k < a.scopes.size(); ++k) {
    std::snprintf(line, sizeof line, "%-10s %10.1f %10.4f %10.4f %12.2f %12.2f\n", a.scopes[k].name.c_str(), a.scopes[k].mrr,
                  a.scopes[k].prob.p, b.scopes[k].prob.p, a.scopes[k].risk, b.scopes[k].risk);
    out << line;
  }
  return out.str();
}

}  // namespace gridrisk
