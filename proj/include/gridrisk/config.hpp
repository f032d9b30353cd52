#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridrisk/case_io.hpp"
#include "gridrisk/dataset.hpp"
#include "gridrisk/dcopf.hpp"
#include "gridrisk/risk.hpp"
#include "gridrisk/surrogate.hpp"

namespace gridrisk {

/// Named seeds; every random draw in a run comes from one of these.
struct Seeds {
  std::uint64_t wind = 1;
  std::uint64_t train = 2;
  std::uint64_t forecast = 3;
  std::uint64_t surrogate = 4;
  std::uint64_t sweep = 5;
  std::uint64_t bench = 6;

  /// All six derived from one master seed.
  static Seeds from_master(std::uint64_t master);
};

/// Copula forecast in configuration form. Load marginals are expressed as multiples of
/// the zone base load (so one spec fits every zone); wind marginals are in m/s.
struct ForecastSpec {
  std::optional<Eigen::MatrixXd> matrix;   // explicit 2s x 2s correlation
  double load_load = 0.0, wind_wind = 0.0, load_wind = 0.0;  // block form when no matrix
  std::vector<MarginalSpec> load_marginals;  // one, or one per zone
  std::vector<MarginalSpec> wind_marginals;  // one, or one per zone
  PowerCurve curve;
};

struct RunConfig {
  std::string name = "run";
  std::filesystem::path base_dir;  // relative paths in the file resolve against this

  std::string grid_file;
  ParseOptions parse;
  RatingRule rating;
  double cost_tiebreak = 0.0;  // $/MWh; unit k gets + cost_tiebreak * k / G
  double wind_fraction = 0.2;

  int zone_count = 0;                         // contiguous blocks by bus number
  std::vector<std::vector<int>> zone_buses;   // explicit zones, case-file bus numbers

  int train_samples = 1000;
  double load_lo = 0.8, load_hi = 1.2;
  double train_fraction = 0.7;

  int assess_samples = 2000;
  ForecastSpec forecast;

  TrainConfig surrogate;
  nlohmann::json head_overrides = nlohmann::json::object();

  RiskConfig risk;

  std::vector<double> sweep_shifts;  // added to the load factor of every load marginal
  int sweep_samples = 400;
  int bench_samples = 50;

  DcopfOptions opf;
  double max_failure_rate = 0.5;

  Seeds seeds;
  std::string out_dir;

  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;

  /// Grid-independent checks.
  void validate() const;

  std::filesystem::path grid_path() const;
  TrainConfig train_config(Head head) const;
};

/// Grid and samplers built from a configuration, validated as a unit.
struct Setup {
  Grid grid;
  SamplerSpec training;
  SamplerSpec forecast;
};

Setup build_setup(const RunConfig& config);

/// Forecast sampler with every load-factor marginal shifted by `shift`.
SamplerSpec forecast_sampler(const RunConfig& config, const Grid& grid, double shift = 0.0);

/// Copy of `config` with the resolved grid and samplers attached, as written next to outputs.
nlohmann::json frozen_config(const RunConfig& config, const Setup& setup);

}  // namespace gridrisk
