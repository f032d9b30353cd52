#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gridrisk/dcopf.hpp"
#include "gridrisk/distributions.hpp"
#include "gridrisk/grid.hpp"

namespace gridrisk {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Per-variable sampling box for the uncorrelated training ensemble.
struct TrainingBounds {
  std::vector<Interval> load;  // per bus; non-load buses carry (0, 0)
  std::vector<Interval> wind;  // per wind generator
  bool operator==(const TrainingBounds&) const = default;
};

/// Loads in [lo_factor, hi_factor] x base load, wind in [0, p_max].
TrainingBounds default_training_bounds(const Grid& grid, double lo_factor = 0.8, double hi_factor = 1.2);

std::vector<Scenario> sample_uniform_ensemble(const Grid& grid, const TrainingBounds& bounds, int n,
                                              std::uint64_t seed);

struct CopulaSpec {
  Eigen::MatrixXd correlation;  // 2s x 2s, zonal loads first, then zonal wind speeds
  std::vector<MarginalSpec> marginals;
};

void validate(const CopulaSpec& spec);

/// Block correlation: every pair of zonal loads at `ll`, every pair of zonal wind
/// speeds at `ww`, and every load/wind pair at `lw`.
Eigen::MatrixXd block_correlation(int zones, double ll, double ww, double lw);

/// Cholesky factor of C, retrying with a diagonal jitter of at most 1e-10.
Eigen::MatrixXd copula_factor(const Eigen::MatrixXd& correlation);

std::vector<std::vector<double>> sample_copula(const CopulaSpec& spec, int n, std::uint64_t seed);

struct PowerCurve {
  double cut_in = 3.0;        // m/s
  double rated_speed = 12.0;  // m/s
  double cut_out = 25.0;      // m/s
  double rated_power = 1.0;   // MW

  bool operator==(const PowerCurve&) const = default;
};

void validate(const PowerCurve& curve);
double wind_speed_to_power(double v, const PowerCurve& curve);

/// Splits zonal loads (MW) and zonal wind speeds (m/s) onto buses and wind units using
/// the grid's zone shares. A zone's wind power is its installed capacity times the
/// curve's capacity factor at the sampled speed.
Scenario disaggregate(const std::vector<double>& zonal, const Grid& grid, const PowerCurve& curve);

/// Stacked (per-bus load, per-unit wind) vector in MW.
std::vector<double> scenario_vector(const Scenario& s);

/// Mean pairwise Euclidean distance between the members of X and Y. With `normalize`,
/// every coordinate is first divided by its standard deviation over the pooled sample
/// (constant coordinates are left as they are).
double ensemble_distance(const std::vector<std::vector<double>>& X, const std::vector<std::vector<double>>& Y,
                         bool normalize = false);

/// Centered energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'| (diagnostic only).
double energy_distance(const std::vector<std::vector<double>>& X, const std::vector<std::vector<double>>& Y);

nlohmann::json bounds_to_json(const TrainingBounds& b);
TrainingBounds bounds_from_json(const nlohmann::json& j);
nlohmann::json copula_to_json(const CopulaSpec& spec);
CopulaSpec copula_from_json(const nlohmann::json& j);
nlohmann::json curve_to_json(const PowerCurve& c);
PowerCurve curve_from_json(const nlohmann::json& j);

}  // namespace gridrisk
