#include "gridrisk/scenario.hpp"

#include <cmath>

#include "gridrisk/errors.hpp"

namespace gridrisk {

TrainingBounds default_training_bounds(const Grid& grid, double lo_factor, double hi_factor) {
  if (!(lo_factor >= 0.0) || !(hi_factor >= lo_factor)) throw ValidationError("invalid load bound factors");
  TrainingBounds b;
  for (const auto& bus : grid.buses) b.load.push_back({lo_factor * bus.base_load, hi_factor * bus.base_load});
  for (int g : grid.wind_generators()) b.wind.push_back({0.0, grid.generators[g].p_max});
  return b;
}

std::vector<Scenario> sample_uniform_ensemble(const Grid& grid, const TrainingBounds& bounds, int n,
                                              std::uint64_t seed) {
  if (n < 0) throw ValidationError("sample count must be non-negative");
  if (static_cast<int>(bounds.load.size()) != grid.num_buses() ||
      bounds.wind.size() != grid.wind_generators().size()) {
    throw DimensionError("training bounds do not cover every bus and wind generator");
  }
  for (const auto* v : {&bounds.load, &bounds.wind}) {
    for (const auto& iv : *v) {
      if (!(iv.lo <= iv.hi) || iv.lo < 0.0) throw ValidationError("training bound has lo > hi or a negative value");
    }
  }
  Rng rng(seed);
  std::vector<Scenario> out(n);
  for (auto& s : out) {
    s.load.resize(bounds.load.size());
    s.wind.resize(bounds.wind.size());
    for (std::size_t i = 0; i < bounds.load.size(); ++i) {
      const auto& iv = bounds.load[i];
      const double u = rng.uniform();
      s.load[i] = iv.lo == iv.hi ? iv.lo : iv.lo + u * (iv.hi - iv.lo);
    }
    for (std::size_t k = 0; k < bounds.wind.size(); ++k) {
      const auto& iv = bounds.wind[k];
      const double u = rng.uniform();
      s.wind[k] = iv.lo == iv.hi ? iv.lo : iv.lo + u * (iv.hi - iv.lo);
    }
  }
  return out;
}

void validate(const CopulaSpec& spec) {
  const auto& c = spec.correlation;
  const Eigen::Index d = c.rows();
  if (d == 0 || d % 2 != 0 || c.cols() != d) throw DimensionError("copula correlation must be 2s x 2s");
  if (static_cast<Eigen::Index>(spec.marginals.size()) != d) {
    throw DimensionError("copula needs one marginal per zonal variable");
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::abs(c(i, i) - 1.0) > 1e-12) throw ValidationError("copula correlation must have a unit diagonal");
    for (Eigen::Index j = 0; j < d; ++j) {
      if (std::abs(c(i, j) - c(j, i)) > 1e-12) throw ValidationError("copula correlation must be symmetric");
      if (std::abs(c(i, j)) > 1.0) throw ValidationError("correlation entries must lie in [-1, 1]");
    }
  }
  for (const auto& m : spec.marginals) validate(m);
  copula_factor(c);
}

Eigen::MatrixXd block_correlation(int zones, double ll, double ww, double lw) {
  if (zones < 1) throw ValidationError("zone count must be positive");
  const int d = 2 * zones;
  Eigen::MatrixXd c(d, d);
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      const bool la = a < zones, lb = b < zones;
      c(a, b) = a == b ? 1.0 : (la && lb ? ll : (!la && !lb ? ww : lw));
    }
  }
  return c;
}

Eigen::MatrixXd copula_factor(const Eigen::MatrixXd& correlation) {
  for (double jitter : {0.0, 1e-12, 1e-11, 1e-10}) {
    Eigen::MatrixXd a = correlation;
    a.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd l = llt.matrixL();
      if (l.allFinite()) return l;
    }
  }
  // A singular but PSD matrix still has a valid factor; fall back to LDLT.
  Eigen::LDLT<Eigen::MatrixXd> ldlt(correlation);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const Eigen::VectorXd dvec = ldlt.vectorD();
    if ((dvec.array() >= -1e-10).all()) {
      Eigen::MatrixXd l = ldlt.transpositionsP().transpose() * Eigen::MatrixXd(ldlt.matrixL());
      return l * dvec.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
  }
  throw ValidationError("copula correlation matrix is not positive semi-definite");
}

std::vector<std::vector<double>> sample_copula(const CopulaSpec& spec, int n, std::uint64_t seed) {
  if (n < 0) throw ValidationError("sample count must be non-negative");
  validate(spec);
  const Eigen::MatrixXd l = copula_factor(spec.correlation);
  const Eigen::Index d = l.rows();
  Rng rng(seed);
  std::vector<std::vector<double>> out(n, std::vector<double>(d));
  Eigen::VectorXd w(d), z(d);
  for (int k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < d; ++i) w(i) = rng.normal();
    z.noalias() = l * w;
    for (Eigen::Index i = 0; i < d; ++i) {
      // Keep u strictly inside (0, 1) so every quantile is defined.
      const double u = std::clamp(std_normal_cdf(z(i)), 1e-16, 1.0 - 1e-16);
      out[k][i] = inverse_cdf(spec.marginals[i], u);
    }
  }
  return out;
}

void validate(const PowerCurve& c) {
  if (!(0.0 < c.cut_in && c.cut_in < c.rated_speed && c.rated_speed < c.cut_out)) {
    throw ValidationError("power curve needs 0 < cut_in < rated_speed < cut_out");
  }
  if (!(c.rated_power > 0.0)) throw ValidationError("power curve rated power must be positive");
}

double wind_speed_to_power(double v, const PowerCurve& c) {
  if (v < c.cut_in || v >= c.cut_out) return 0.0;
  if (v >= c.rated_speed) return c.rated_power;
  const double ci3 = c.cut_in * c.cut_in * c.cut_in;
  const double r3 = c.rated_speed * c.rated_speed * c.rated_speed;
  return c.rated_power * (v * v * v - ci3) / (r3 - ci3);
}

Scenario disaggregate(const std::vector<double>& zonal, const Grid& grid, const PowerCurve& curve) {
  if (!grid.zones) throw ValidationError("grid has no zone partition");
  const auto& z = *grid.zones;
  const int s = z.num_zones;
  if (static_cast<int>(zonal.size()) != 2 * s) throw DimensionError("zonal vector must have length 2s");

  const auto wind = grid.wind_generators();
  std::vector<int> wind_slot(grid.num_generators(), -1);
  for (std::size_t k = 0; k < wind.size(); ++k) wind_slot[wind[k]] = static_cast<int>(k);

  Scenario out;
  out.load.assign(grid.num_buses(), 0.0);
  out.wind.assign(wind.size(), 0.0);
  for (int zi = 0; zi < s; ++zi) {
    const double load = zonal[zi];
    if (load < 0.0) throw ValidationError("zonal load sample is negative");
    if (z.load_buses[zi].empty()) {
      if (load != 0.0) throw ValidationError("zone " + std::to_string(zi + 1) + " has no load buses to take its load");
    }
    for (std::size_t j = 0; j < z.load_buses[zi].size(); ++j) out.load[z.load_buses[zi][j]] = z.load_shares[zi][j] * load;

    const double power = wind_speed_to_power(zonal[s + zi], curve) / curve.rated_power * z.wind_capacity[zi];
    if (z.wind_gens[zi].empty() && power != 0.0) {
      throw ValidationError("zone " + std::to_string(zi + 1) + " has no wind units to take its wind output");
    }
    for (std::size_t k = 0; k < z.wind_gens[zi].size(); ++k) {
      out.wind[wind_slot[z.wind_gens[zi][k]]] = z.wind_shares[zi][k] * power;
    }
  }
  return out;
}

std::vector<double> scenario_vector(const Scenario& s) {
  std::vector<double> v = s.load;
  v.insert(v.end(), s.wind.begin(), s.wind.end());
  return v;
}

namespace {

void check_ensembles(const std::vector<std::vector<double>>& X, const std::vector<std::vector<double>>& Y) {
  if (X.empty() || Y.empty()) throw ValidationError("ensemble distance needs nonempty ensembles");
  const std::size_t d = X.front().size();
  for (const auto* e : {&X, &Y}) {
    for (const auto& v : *e) {
      if (v.size() != d) throw DimensionError("ensemble members differ in dimension");
    }
  }
}

double mean_cross_norm(const std::vector<std::vector<double>>& X, const std::vector<std::vector<double>>& Y,
                       const std::vector<double>& scale) {
  const std::size_t d = scale.size();
  double total = 0.0;
  for (const auto& x : X) {
    double row = 0.0;
    for (const auto& y : Y) {
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = (x[k] - y[k]) * scale[k];
        sq += diff * diff;
      }
      row += std::sqrt(sq);
    }
    total += row;
  }
  return total / (static_cast<double>(X.size()) * static_cast<double>(Y.size()));
}

}  // namespace

double ensemble_distance(const std::vector<std::vector<double>>& X, const std::vector<std::vector<double>>& Y,
                         bool normalize) {
  check_ensembles(X, Y);
  const std::size_t d = X.front().size();
  std::vector<double> scale(d, 1.0);
  if (normalize) {
    const double count = static_cast<double>(X.size() + Y.size());
    for (std::size_t k = 0; k < d; ++k) {
      double mean = 0.0;
      for (const auto* e : {&X, &Y}) {
        for (const auto& v : *e) mean += v[k];
      }
      mean /= count;
      double var = 0.0;
      for (const auto* e : {&X, &Y}) {
        for (const auto& v : *e) var += (v[k] - mean) * (v[k] - mean);
      }
      const double sd = std::sqrt(var / count);
      if (sd > 0.0) scale[k] = 1.0 / sd;
    }
  }
  return mean_cross_norm(X, Y, scale);
}

double energy_distance(const std::vector<std::vector<double>>& X, const std::vector<std::vector<double>>& Y) {
  check_ensembles(X, Y);
  const std::vector<double> unit(X.front().size(), 1.0);
  return 2.0 * mean_cross_norm(X, Y, unit) - mean_cross_norm(X, X, unit) - mean_cross_norm(Y, Y, unit);
}

nlohmann::json bounds_to_json(const TrainingBounds& b) {
  auto pairs = [](const std::vector<Interval>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& iv : v) a.push_back({iv.lo, iv.hi});
    return a;
  };
  return {{"load", pairs(b.load)}, {"wind", pairs(b.wind)}};
}

TrainingBounds bounds_from_json(const nlohmann::json& j) {
  TrainingBounds b;
  for (const auto& p : j.at("load")) b.load.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  for (const auto& p : j.at("wind")) b.wind.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return b;
}

nlohmann::json copula_to_json(const CopulaSpec& spec) {
  nlohmann::json c = nlohmann::json::array();
  for (Eigen::Index i = 0; i < spec.correlation.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < spec.correlation.cols(); ++k) row.push_back(spec.correlation(i, k));
    c.push_back(row);
  }
  nlohmann::json m = nlohmann::json::array();
  for (const auto& mg : spec.marginals) m.push_back(marginal_to_json(mg));
  return {{"correlation", c}, {"marginals", m}};
}

CopulaSpec copula_from_json(const nlohmann::json& j) {
  CopulaSpec spec;
  const auto& c = j.at("correlation");
  const auto d = static_cast<Eigen::Index>(c.size());
  spec.correlation.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (static_cast<Eigen::Index>(c.at(i).size()) != d) throw DimensionError("correlation matrix is not square");
    for (Eigen::Index k = 0; k < d; ++k) spec.correlation(i, k) = c.at(i).at(k).get<double>();
  }
  for (const auto& m : j.at("marginals")) spec.marginals.push_back(marginal_from_json(m));
  validate(spec);
  return spec;
}

nlohmann::json curve_to_json(const PowerCurve& c) {
  return {{"cut_in", c.cut_in}, {"rated_speed", c.rated_speed}, {"cut_out", c.cut_out}, {"rated_power", c.rated_power}};
}

PowerCurve curve_from_json(const nlohmann::json& j) {
  PowerCurve c;
  c.cut_in = j.value("cut_in", c.cut_in);
  c.rated_speed = j.value("rated_speed", c.rated_speed);
  c.cut_out = j.value("cut_out", c.cut_out);
  c.rated_power = j.value("rated_power", c.rated_power);
  validate(c);
  return c;
}

}  // namespace gridrisk
