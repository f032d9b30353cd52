#include "gridrisk/config.hpp"

#include <cmath>

#include "gridrisk/errors.hpp"

namespace gridrisk {

namespace fs = std::filesystem;
using nlohmann::json;

Seeds Seeds::from_master(std::uint64_t master) {
  Seeds s;
  s.wind = derive_seed(master, 1);
  s.train = derive_seed(master, 2);
  s.forecast = derive_seed(master, 3);
  s.surrogate = derive_seed(master, 4);
  s.sweep = derive_seed(master, 5);
  s.bench = derive_seed(master, 6);
  return s;
}

namespace {

const char* rating_name(RatingRule::Kind k) {
  switch (k) {
    case RatingRule::Kind::Keep: return "keep";
    case RatingRule::Kind::Fixed: return "fixed";
    case RatingRule::Kind::BaseFlowMargin: return "base_flow_margin";
  }
  return "keep";
}

RatingRule rating_from_json(const json& j) {
  RatingRule r;
  const std::string rule = j.value("rule", "keep");
  if (rule == "keep") r.kind = RatingRule::Kind::Keep;
  else if (rule == "fixed") r.kind = RatingRule::Kind::Fixed;
  else if (rule == "base_flow_margin") r.kind = RatingRule::Kind::BaseFlowMargin;
  else throw ValidationError("unknown rating rule '" + rule + "'");
  r.fixed_mw = j.value("mw", 0.0);
  r.factor = j.value("factor", 1.0);
  r.min_mw = j.value("min_mw", 0.0);
  return r;
}

std::vector<MarginalSpec> marginals_from(const json& j, const char* one, const char* many) {
  std::vector<MarginalSpec> out;
  if (j.contains(many)) {
    for (const auto& m : j.at(many)) out.push_back(marginal_from_json(m));
  } else if (j.contains(one)) {
    out.push_back(marginal_from_json(j.at(one)));
  }
  return out;
}

json marginals_to(const std::vector<MarginalSpec>& ms) {
  json a = json::array();
  for (const auto& m : ms) a.push_back(marginal_to_json(m));
  return a;
}

/// Load-factor marginal -> MW marginal for a zone with base load L.
MarginalSpec scale_load_marginal(const MarginalSpec& m, double L, double shift) {
  if (const auto* u = std::get_if<UniformMarginal>(&m)) return UniformMarginal{(u->lo + shift) * L, (u->hi + shift) * L};
  if (const auto* t = std::get_if<TruncNormalMarginal>(&m)) {
    return TruncNormalMarginal{(t->mu + shift) * L, t->sigma * L, (t->a + shift) * L, (t->b + shift) * L};
  }
  throw ValidationError("load marginals must be uniform or trunc_normal");
}

json merge(json base, const json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) base[it.key()] = it.value();
  return base;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  try {
    RunConfig c;
    c.base_dir = base_dir;
    c.name = j.value("name", c.name);

    const auto& g = j.at("grid");
    c.grid_file = g.at("file").get<std::string>();
    const std::string nr = g.value("negative_reactance", "reject");
    if (nr == "absolute") c.parse.negative_reactance = ParseOptions::NegativeReactance::Absolute;
    else if (nr != "reject") throw ValidationError("negative_reactance must be reject or absolute");
    const std::string nl = g.value("negative_load", "reject");
    if (nl == "zero") c.parse.negative_load = ParseOptions::NegativeLoad::Zero;
    else if (nl != "reject") throw ValidationError("negative_load must be reject or zero");
    if (g.contains("rating")) c.rating = rating_from_json(g.at("rating"));
    c.cost_tiebreak = g.value("cost_tiebreak", 0.0);

    if (j.contains("wind")) c.wind_fraction = j.at("wind").value("fraction", c.wind_fraction);

    if (j.contains("zones")) {
      const auto& z = j.at("zones");
      if (z.contains("buses")) c.zone_buses = z.at("buses").get<std::vector<std::vector<int>>>();
      else c.zone_count = z.at("count").get<int>();
    }

    if (j.contains("training")) {
      const auto& t = j.at("training");
      c.train_samples = t.value("samples", c.train_samples);
      if (t.contains("load_range")) {
        const auto r = t.at("load_range").get<std::vector<double>>();
        if (r.size() != 2) throw ValidationError("training.load_range needs two numbers");
        c.load_lo = r[0];
        c.load_hi = r[1];
      }
      c.train_fraction = t.value("train_fraction", c.train_fraction);
    }

    if (j.contains("forecast")) {
      const auto& f = j.at("forecast");
      c.assess_samples = f.value("samples", c.assess_samples);
      if (f.contains("correlation")) {
        const auto& cj = f.at("correlation");
        if (cj.is_array()) {
          const auto d = static_cast<Eigen::Index>(cj.size());
          Eigen::MatrixXd m(d, d);
          for (Eigen::Index r = 0; r < d; ++r) {
            if (static_cast<Eigen::Index>(cj.at(r).size()) != d) throw DimensionError("correlation matrix is not square");
            for (Eigen::Index k = 0; k < d; ++k) m(r, k) = cj.at(r).at(k).get<double>();
          }
          c.forecast.matrix = m;
        } else {
          c.forecast.load_load = cj.value("load_load", 0.0);
          c.forecast.wind_wind = cj.value("wind_wind", 0.0);
          c.forecast.load_wind = cj.value("load_wind", 0.0);
        }
      }
      c.forecast.load_marginals = marginals_from(f, "load_marginal", "load_marginals");
      c.forecast.wind_marginals = marginals_from(f, "wind_marginal", "wind_marginals");
      if (f.contains("power_curve")) c.forecast.curve = curve_from_json(f.at("power_curve"));
    }

    if (j.contains("surrogate")) {
      json s = j.at("surrogate");
      if (s.contains("heads")) {
        c.head_overrides = s.at("heads");
        s.erase("heads");
      }
      c.surrogate = TrainConfig::from_json(s);
    }

    if (j.contains("risk")) c.risk = RiskConfig::from_json(j.at("risk"));

    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      c.sweep_shifts = s.value("shifts", std::vector<double>{});
      c.sweep_samples = s.value("samples", c.sweep_samples);
    }
    if (j.contains("bench")) c.bench_samples = j.at("bench").value("samples", c.bench_samples);

    if (j.contains("opf")) {
      const auto& o = j.at("opf");
      c.opf.slack_cost_factor = o.value("slack_cost_factor", c.opf.slack_cost_factor);
      c.opf.shed_threshold_mw = o.value("shed_threshold_mw", c.opf.shed_threshold_mw);
      c.max_failure_rate = o.value("max_failure_rate", c.max_failure_rate);
    }

    if (j.contains("seed")) c.seeds = Seeds::from_master(j.at("seed").get<std::uint64_t>());
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      c.seeds.wind = s.value("wind", c.seeds.wind);
      c.seeds.train = s.value("train", c.seeds.train);
      c.seeds.forecast = s.value("forecast", c.seeds.forecast);
      c.seeds.surrogate = s.value("surrogate", c.seeds.surrogate);
      c.seeds.sweep = s.value("sweep", c.seeds.sweep);
      c.seeds.bench = s.value("bench", c.seeds.bench);
    }

    if (j.contains("out")) {
      const fs::path out(j.at("out").get<std::string>());
      c.out_dir = (out.is_absolute() || base_dir.empty() ? out : (base_dir / out).lexically_normal()).string();
    } else {
      c.out_dir = "runs/" + c.name;
    }
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
}

RunConfig RunConfig::load(const std::string& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config ") + path + ": " + e.what());
  }
  return from_json(j, fs::path(path).parent_path());
}

json RunConfig::to_json() const {
  json zones = json::object();
  if (!zone_buses.empty()) zones["buses"] = zone_buses;
  else zones["count"] = zone_count;

  json corr;
  if (forecast.matrix) {
    corr = json::array();
    for (Eigen::Index r = 0; r < forecast.matrix->rows(); ++r) {
      json row = json::array();
      for (Eigen::Index k = 0; k < forecast.matrix->cols(); ++k) row.push_back((*forecast.matrix)(r, k));
      corr.push_back(row);
    }
  } else {
    corr = {{"load_load", forecast.load_load}, {"wind_wind", forecast.wind_wind}, {"load_wind", forecast.load_wind}};
  }

  json surrogate_json = surrogate.to_json();
  surrogate_json["heads"] = head_overrides;

  return {
      {"name", name},
      {"grid",
       {{"file", grid_file},
        {"negative_reactance",
         parse.negative_reactance == ParseOptions::NegativeReactance::Absolute ? "absolute" : "reject"},
        {"negative_load", parse.negative_load == ParseOptions::NegativeLoad::Zero ? "zero" : "reject"},
        {"rating", {{"rule", rating_name(rating.kind)}, {"mw", rating.fixed_mw}, {"factor", rating.factor}, {"min_mw", rating.min_mw}}},
        {"cost_tiebreak", cost_tiebreak}}},
      {"wind", {{"fraction", wind_fraction}}},
      {"zones", zones},
      {"training", {{"samples", train_samples}, {"load_range", {load_lo, load_hi}}, {"train_fraction", train_fraction}}},
      {"forecast",
       {{"samples", assess_samples},
        {"correlation", corr},
        {"load_marginals", marginals_to(forecast.load_marginals)},
        {"wind_marginals", marginals_to(forecast.wind_marginals)},
        {"power_curve", curve_to_json(forecast.curve)}}},
      {"surrogate", surrogate_json},
      {"risk", risk.to_json()},
      {"sweep", {{"shifts", sweep_shifts}, {"samples", sweep_samples}}},
      {"bench", {{"samples", bench_samples}}},
      {"opf",
       {{"slack_cost_factor", opf.slack_cost_factor},
        {"shed_threshold_mw", opf.shed_threshold_mw},
        {"max_failure_rate", max_failure_rate}}},
      {"seeds",
       {{"wind", seeds.wind},
        {"train", seeds.train},
        {"forecast", seeds.forecast},
        {"surrogate", seeds.surrogate},
        {"sweep", seeds.sweep},
        {"bench", seeds.bench}}},
      {"out", out_dir},
  };
}

void RunConfig::validate() const {
  if (grid_file.empty()) throw ValidationError("config needs grid.file");
  if (!(wind_fraction >= 0.0 && wind_fraction < 1.0)) throw ValidationError("wind.fraction must lie in [0, 1)");
  if (zone_count < 0) throw ValidationError("zones.count must be non-negative");
  if (train_samples < 0 || assess_samples < 1) throw ValidationError("sample counts must be positive");
  if (!(load_lo >= 0.0 && load_lo <= load_hi)) throw ValidationError("training.load_range must satisfy 0 <= lo <= hi");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ValidationError("training.train_fraction must lie in (0, 1]");
  if (sweep_samples < 1 || bench_samples < 1) throw ValidationError("sweep and bench sample counts must be positive");
  if (!(max_failure_rate >= 0.0 && max_failure_rate <= 1.0)) throw ValidationError("opf.max_failure_rate must lie in [0, 1]");
  if (!(opf.slack_cost_factor > 1.0)) throw ValidationError("opf.slack_cost_factor must exceed 1");
  if (!std::isfinite(cost_tiebreak) || cost_tiebreak < 0.0) throw ValidationError("grid.cost_tiebreak must be non-negative");
  surrogate.validate();
  for (const char* h : {"bus_pg", "branch_pf", "system"}) (void)train_config(head_from_string(h));
  for (auto it = head_overrides.begin(); it != head_overrides.end(); ++it) (void)head_from_string(it.key());
  for (double s : sweep_shifts) {
    if (!std::isfinite(s)) throw ValidationError("sweep shifts must be finite");
  }
  for (const auto& m : forecast.load_marginals) gridrisk::validate(m);
  for (const auto& m : forecast.wind_marginals) gridrisk::validate(m);
  gridrisk::validate(forecast.curve);
}

fs::path RunConfig::grid_path() const {
  const fs::path p(grid_file);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

TrainConfig RunConfig::train_config(Head head) const {
  TrainConfig c = surrogate;
  const std::string key = to_string(head);
  if (head_overrides.contains(key)) c = TrainConfig::from_json(merge(surrogate.to_json(), head_overrides.at(key)));
  c.seed = derive_seed(seeds.surrogate, static_cast<std::uint64_t>(head) + 1);
  return c;
}

SamplerSpec forecast_sampler(const RunConfig& config, const Grid& grid, double shift) {
  if (!grid.zones) throw ValidationError("the copula forecast needs zones");
  const int s = grid.zones->num_zones;
  const auto& f = config.forecast;
  auto pick = [s](const std::vector<MarginalSpec>& ms, const char* what) -> const std::vector<MarginalSpec>& {
    if (ms.size() != 1 && static_cast<int>(ms.size()) != s) {
      throw DimensionError(std::string("forecast needs one ") + what + " marginal or one per zone");
    }
    return ms;
  };
  const auto& lm = pick(f.load_marginals, "load");
  const auto& wm = pick(f.wind_marginals, "wind");

  SamplerSpec spec;
  spec.kind = SamplerSpec::Kind::Copula;
  spec.curve = f.curve;
  spec.copula.correlation = f.matrix ? *f.matrix : block_correlation(s, f.load_load, f.wind_wind, f.load_wind);
  for (int z = 0; z < s; ++z) {
    spec.copula.marginals.push_back(scale_load_marginal(lm.size() == 1 ? lm[0] : lm[z], grid.zones->base_load[z], shift));
  }
  for (int z = 0; z < s; ++z) spec.copula.marginals.push_back(wm.size() == 1 ? wm[0] : wm[z]);
  validate(spec.copula);
  return spec;
}

Setup build_setup(const RunConfig& config) {
  config.validate();
  Setup st;
  Grid g = load_grid_file(config.grid_path().string(), config.parse);
  if (g.name.empty()) g.name = config.name;
  g = apply_rating_rule(g, config.rating);
  if (config.cost_tiebreak > 0.0) {
    const double G = static_cast<double>(g.num_generators());
    for (int k = 0; k < g.num_generators(); ++k) g.generators[k].marginal_cost += config.cost_tiebreak * k / G;
  }
  g = designate_wind(g, config.wind_fraction, config.seeds.wind);

  if (!config.zone_buses.empty()) {
    std::vector<int> zone_of(g.num_buses(), 0);
    for (std::size_t z = 0; z < config.zone_buses.size(); ++z) {
      for (int id : config.zone_buses[z]) {
        const int b = g.bus_by_original_id(id);
        if (zone_of[b] != 0) throw ValidationError("bus " + std::to_string(id) + " is listed in two zones");
        zone_of[b] = static_cast<int>(z) + 1;
      }
    }
    for (int b = 0; b < g.num_buses(); ++b) {
      if (zone_of[b] == 0) throw ValidationError("bus " + std::to_string(g.buses[b].original_id) + " has no zone");
    }
    g.zones = partition_zones(g, zone_of);
  } else if (config.zone_count > 0) {
    g.zones = partition_zones(g, block_zone_assignment(g, config.zone_count));
  }
  validate(g);
  st.grid = std::move(g);

  st.training.kind = SamplerSpec::Kind::Uniform;
  st.training.bounds = default_training_bounds(st.grid, config.load_lo, config.load_hi);

  const int zones = st.grid.zones ? st.grid.zones->num_zones : 0;
  if (zones > 0 && !config.forecast.load_marginals.empty()) st.forecast = forecast_sampler(config, st.grid);
  config.risk.validate(zones, st.grid.num_branches());
  return st;
}

json frozen_config(const RunConfig& config, const Setup& setup) {
  json j = config.to_json();
  j["grid"]["file"] = config.grid_path().lexically_normal().generic_string();
  j["resolved"] = {{"grid_name", setup.grid.name},
                   {"grid_hash", grid_hash(setup.grid)},
                   {"wind_generators", setup.grid.wind_generators()},
                   {"training_sampler", setup.training.to_json()}};
  if (setup.forecast.kind == SamplerSpec::Kind::Copula) j["resolved"]["forecast_sampler"] = setup.forecast.to_json();
  for (const char* h : {"bus_pg", "branch_pf", "system"}) {
    j["resolved"]["train_config"][h] = config.train_config(head_from_string(h)).to_json();
  }
  return j;
}

}  // namespace gridrisk
