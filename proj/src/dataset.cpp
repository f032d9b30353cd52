#include "gridrisk/dataset.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "gridrisk/errors.hpp"

namespace gridrisk {

nlohmann::json SamplerSpec::to_json() const {
  if (kind == Kind::Uniform) return {{"kind", "uniform"}, {"bounds", bounds_to_json(bounds)}};
  return {{"kind", "copula"}, {"copula", copula_to_json(copula)}, {"power_curve", curve_to_json(curve)}};
}

SamplerSpec SamplerSpec::from_json(const nlohmann::json& j) {
  SamplerSpec s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "uniform") {
    s.kind = Kind::Uniform;
    s.bounds = bounds_from_json(j.at("bounds"));
  } else if (kind == "copula") {
    s.kind = Kind::Copula;
    s.copula = copula_from_json(j.at("copula"));
    s.curve = j.contains("power_curve") ? curve_from_json(j.at("power_curve")) : PowerCurve{};
  } else {
    throw ValidationError("unknown sampler kind '" + kind + "'");
  }
  return s;
}

std::vector<Scenario> draw_scenarios(const Grid& grid, const SamplerSpec& sampler, int n, std::uint64_t seed) {
  if (sampler.kind == SamplerSpec::Kind::Uniform) return sample_uniform_ensemble(grid, sampler.bounds, n, seed);
  if (!grid.zones) throw ValidationError("copula sampling needs a zone partition");
  if (sampler.copula.correlation.rows() != 2 * grid.zones->num_zones) {
    throw DimensionError("copula dimension does not match the zone count");
  }
  std::vector<Scenario> out;
  out.reserve(n);
  for (const auto& zonal : sample_copula(sampler.copula, n, seed)) out.push_back(disaggregate(zonal, grid, sampler.curve));
  return out;
}

int Dataset::failures() const {
  int f = 0;
  for (const auto& r : records) f += r.ok() ? 0 : 1;
  return f;
}

std::vector<Record> label_scenarios(const Grid& grid, const std::vector<Scenario>& scenarios,
                                    const DcopfOptions& options) {
  std::vector<Record> out;
  out.reserve(scenarios.size());
  for (std::size_t k = 0; k < scenarios.size(); ++k) {
    Record r;
    r.index = static_cast<int>(k);
    r.scenario = scenarios[k];
    try {
      r.solution = solve_dcopf(grid, r.scenario, options);
      if (r.solution.status != OpfStatus::Infeasible) r.qois = derive_qois(r.solution, grid, r.scenario);
    } catch (const SolverError& e) {
      r.solution = OpfSolution{};
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

Dataset generate_dataset(const Grid& grid, const SamplerSpec& sampler, int n, std::uint64_t seed,
                         const DcopfOptions& options) {
  Dataset ds;
  ds.provenance.sampler = sampler.to_json();
  ds.provenance.seed = seed;
  ds.provenance.count = n;
  ds.provenance.grid_name = grid.name;
  ds.provenance.grid_hash = grid_hash(grid);
  ds.records = label_scenarios(grid, draw_scenarios(grid, sampler, n, seed), options);
  return ds;
}

Split split_indices(int n, double train_fraction) {
  if (n < 0 || !(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ValidationError("invalid split");
  Split s;
  const int cut = static_cast<int>(std::lround(train_fraction * n));
  for (int i = 0; i < n; ++i) (i < cut ? s.train : s.test).push_back(i);
  return s;
}

namespace {

nlohmann::json numbers(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) {
    if (std::isfinite(x)) a.push_back(x);
    else a.push_back(nullptr);
  }
  return a;
}

std::vector<double> read_numbers(const nlohmann::json& j) {
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) v.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>());
  return v;
}

}  // namespace

nlohmann::json scenario_to_json(const Scenario& s) { return {{"load", numbers(s.load)}, {"wind", numbers(s.wind)}}; }

Scenario scenario_from_json(const nlohmann::json& j) {
  return Scenario{read_numbers(j.at("load")), read_numbers(j.at("wind"))};
}

nlohmann::json solution_to_json(const OpfSolution& s) {
  return {{"status", to_string(s.status)},     {"dispatch", numbers(s.dispatch)}, {"angles", numbers(s.angles)},
          {"flows", numbers(s.flows)},         {"slack_injection", s.slack_injection},
          {"objective", s.objective},          {"iterations", s.iterations}};
}

OpfSolution solution_from_json(const nlohmann::json& j) {
  OpfSolution s;
  s.status = opf_status_from_string(j.at("status").get<std::string>());
  s.dispatch = read_numbers(j.at("dispatch"));
  s.angles = read_numbers(j.at("angles"));
  s.flows = read_numbers(j.at("flows"));
  s.slack_injection = j.at("slack_injection").get<double>();
  s.objective = j.at("objective").get<double>();
  s.iterations = j.value("iterations", 0);
  return s;
}

nlohmann::json qois_to_json(const SystemQoIs& q) {
  return {{"reserve", q.reserve}, {"shedding", q.shedding}, {"total_cost", q.total_cost}};
}

SystemQoIs qois_from_json(const nlohmann::json& j) {
  return SystemQoIs{j.at("reserve").get<double>(), j.at("shedding").get<double>(), j.at("total_cost").get<double>()};
}

nlohmann::json record_to_json(const Record& r) {
  nlohmann::json j{{"index", r.index},
                   {"scenario", scenario_to_json(r.scenario)},
                   {"solution", solution_to_json(r.solution)},
                   {"qois", qois_to_json(r.qois)}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

Record record_from_json(const nlohmann::json& j) {
  Record r;
  r.index = j.at("index").get<int>();
  r.scenario = scenario_from_json(j.at("scenario"));
  r.solution = solution_from_json(j.at("solution"));
  r.qois = qois_from_json(j.at("qois"));
  r.error = j.value("error", std::string{});
  return r;
}

std::string manifest_path(const std::string& dataset_path) {
  const std::string ext = ".jsonl";
  if (dataset_path.size() > ext.size() && dataset_path.compare(dataset_path.size() - ext.size(), ext.size(), ext) == 0) {
    return dataset_path.substr(0, dataset_path.size() - ext.size()) + ".manifest.json";
  }
  return dataset_path + ".manifest.json";
}

void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset '" + path + "'");
  for (const auto& r : ds.records) out << record_to_json(r).dump() << '\n';
  if (!out) throw IoError("failed writing dataset '" + path + "'");

  const nlohmann::json manifest{{"format", "gridrisk-dataset"},
                                {"version", 1},
                                {"sampler", ds.provenance.sampler},
                                {"seed", ds.provenance.seed},
                                {"count", ds.provenance.count},
                                {"grid_name", ds.provenance.grid_name},
                                {"grid_hash", ds.provenance.grid_hash},
                                {"records", ds.records.size()},
                                {"failures", ds.failures()}};
  std::ofstream m(manifest_path(path), std::ios::binary);
  if (!m) throw IoError("cannot write manifest for '" + path + "'");
  m << manifest.dump(2) << '\n';
}

Dataset read_dataset(const std::string& path) {
  Dataset ds;
  {
    std::ifstream m(manifest_path(path), std::ios::binary);
    if (!m) throw IoError("missing manifest '" + manifest_path(path) + "'");
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(m);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("manifest: ") + e.what());
    }
    if (manifest.value("format", "") != "gridrisk-dataset") throw ParseError("not a dataset manifest");
    ds.provenance.sampler = manifest.at("sampler");
    ds.provenance.seed = manifest.at("seed").get<std::uint64_t>();
    ds.provenance.count = manifest.at("count").get<int>();
    ds.provenance.grid_name = manifest.value("grid_name", "");
    ds.provenance.grid_hash = manifest.value("grid_hash", "");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      ds.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("corrupt dataset record: ") + e.what(), lineno);
    } catch (const Error& e) {
      throw ParseError(std::string("corrupt dataset record: ") + e.what(), lineno);
    }
  }
  return ds;
}

}  // namespace gridrisk
