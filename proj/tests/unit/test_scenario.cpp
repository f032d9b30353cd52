#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "gridrisk/case_io.hpp"
#include "gridrisk/distributions.hpp"
#include "gridrisk/errors.hpp"
#include "gridrisk/scenario.hpp"
#include "stats.hpp"

using namespace gridrisk;
using oracle::ks_critical_1pct;
using oracle::ks_statistic;
using oracle::rank_corr;

namespace {

std::vector<double> column(const std::vector<std::vector<double>>& s, int c) {
  std::vector<double> out;
  for (const auto& row : s) out.push_back(row[c]);
  return out;
}

Grid zoned_triangle() {
  Grid g = fixtures::three_bus();
  g.buses[1].base_load = 40.0;
  g.buses[2].base_load = 60.0;
  g.generators.push_back({1, 0.0, 30.0, 0.0, GenKind::Wind});
  g.generators.push_back({2, 0.0, 10.0, 0.0, GenKind::Wind});
  g.zones = partition_zones(g, {1, 1, 1});
  return g;
}

}  // namespace

TEST(Marginals, QuantileExamples) {
  EXPECT_NEAR(inverse_cdf(WeibullMarginal{1.0, 2.0}, 1.0 - std::exp(-1.0)), 2.0, 1e-12);
  EXPECT_NEAR(inverse_cdf(TruncNormalMarginal{100.0, 10.0, 80.0, 120.0}, 0.5), 100.0, 1e-9);
  EXPECT_NEAR(inverse_cdf(UniformMarginal{10.0, 20.0}, 0.25), 12.5, 1e-12);
}

TEST(Marginals, RejectsOutOfRangeProbability) {
  const MarginalSpec m = UniformMarginal{0.0, 1.0};
  EXPECT_THROW(inverse_cdf(m, 0.0), ValidationError);
  EXPECT_THROW(inverse_cdf(m, 1.0), ValidationError);
  EXPECT_THROW(validate(MarginalSpec{TruncNormalMarginal{0.0, 0.0, -1.0, 1.0}}), ValidationError);
  EXPECT_THROW(validate(MarginalSpec{WeibullMarginal{-1.0, 1.0}}), ValidationError);
  EXPECT_THROW(validate(MarginalSpec{UniformMarginal{2.0, 1.0}}), ValidationError);
}

TEST(Marginals, QuantileIsMonotoneAndInvertsCdf) {
  const std::vector<MarginalSpec> specs = {UniformMarginal{-3.0, 5.0}, TruncNormalMarginal{1.0, 0.08, 0.8, 1.2},
                                           TruncNormalMarginal{0.0, 1.0, 4.0, 9.0}, WeibullMarginal{2.0, 8.0},
                                           WeibullMarginal{0.7, 1.5}};
  for (const auto& m : specs) {
    double prev = -kInf;
    for (int i = 1; i < 1000; ++i) {
      const double u = i / 1000.0;
      const double x = inverse_cdf(m, u);
      EXPECT_GE(x, prev);
      EXPECT_NEAR(cdf(m, x), u, 1e-9);
      prev = x;
    }
  }
}

TEST(Marginals, JsonRoundTrip) {
  for (const MarginalSpec& m : {MarginalSpec{UniformMarginal{1, 2}}, MarginalSpec{TruncNormalMarginal{1, 2, 0, 3}},
                                MarginalSpec{WeibullMarginal{2, 8}}}) {
    EXPECT_EQ(marginal_from_json(marginal_to_json(m)), m);
  }
}

TEST(Uniform, DegenerateIntervalIsConstant) {
  const Grid g = fixtures::two_bus();
  TrainingBounds b = default_training_bounds(g);
  b.load[1] = {50.0, 50.0};
  for (const auto& s : sample_uniform_ensemble(g, b, 20, 3)) EXPECT_EQ(s.load[1], 50.0);
}

TEST(Uniform, LawOfLargeNumbers) {
  const Grid g = fixtures::two_bus();
  TrainingBounds b = default_training_bounds(g);
  b.load[1] = {0.0, 100.0};
  const auto s = sample_uniform_ensemble(g, b, 100000, 4);
  double m = 0.0;
  for (const auto& x : s) m += x.load[1] / s.size();
  EXPECT_NEAR(m, 50.0, 1.0);
}

TEST(Uniform, DeterministicAndBoundedPerSeed) {
  const Grid g = designate_wind(load_grid_file(fixtures::data_dir() + "/case30.m"), 0.2, 1);
  const TrainingBounds b = default_training_bounds(g);
  const auto a = sample_uniform_ensemble(g, b, 50, 17);
  EXPECT_EQ(a, sample_uniform_ensemble(g, b, 50, 17));
  EXPECT_NE(a, sample_uniform_ensemble(g, b, 50, 18));
  for (const auto& s : a) {
    for (int i = 0; i < g.num_buses(); ++i) {
      EXPECT_GE(s.load[i], b.load[i].lo);
      EXPECT_LE(s.load[i], b.load[i].hi);
    }
    for (std::size_t k = 0; k < s.wind.size(); ++k) EXPECT_LE(s.wind[k], b.wind[k].hi);
  }
}

TEST(Uniform, InvalidBoundsRejected) {
  const Grid g = fixtures::two_bus();
  TrainingBounds b = default_training_bounds(g);
  b.load[1] = {60.0, 50.0};
  EXPECT_THROW(sample_uniform_ensemble(g, b, 1, 1), ValidationError);
  b.load.pop_back();
  EXPECT_THROW(sample_uniform_ensemble(g, b, 1, 1), DimensionError);
}

TEST(Copula, IdentityGivesIndependence) {
  CopulaSpec spec{Eigen::MatrixXd::Identity(4, 4),
                  {UniformMarginal{0, 1}, UniformMarginal{0, 1}, WeibullMarginal{2, 8}, WeibullMarginal{2, 8}}};
  const auto s = sample_copula(spec, 10000, 12);
  ASSERT_EQ(s[0].size(), 4u);
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) EXPECT_LT(std::abs(rank_corr(column(s, a), column(s, b))), 0.05);
  }
}

TEST(Copula, SpearmanMatchesClosedForm) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(2, 2);
  c(0, 1) = c(1, 0) = 0.8;
  const auto s = sample_copula({c, {UniformMarginal{0, 1}, UniformMarginal{0, 1}}}, 10000, 21);
  const double target = 6.0 / std::numbers::pi * std::asin(0.4);
  EXPECT_NEAR(target, 0.7859, 5e-5);
  EXPECT_NEAR(rank_corr(column(s, 0), column(s, 1)), target, 0.02);
}

TEST(Copula, MarginalsPassKs) {
  const Eigen::MatrixXd c = block_correlation(2, 0.6, 0.4, -0.2);
  const std::vector<MarginalSpec> m = {TruncNormalMarginal{100, 8, 80, 120}, TruncNormalMarginal{50, 4, 40, 60},
                                       WeibullMarginal{2, 8}, WeibullMarginal{2.5, 7}};
  const auto s = sample_copula({c, m}, 10000, 5);
  for (int k = 0; k < 4; ++k) EXPECT_LT(ks_statistic(column(s, k), m[k]), ks_critical_1pct(10000)) << k;
}

TEST(Copula, DimensionsAndErrors) {
  const auto s = sample_copula({Eigen::MatrixXd::Identity(2, 2), {UniformMarginal{}, WeibullMarginal{}}}, 3, 1);
  EXPECT_EQ(s[0].size(), 2u);
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 1.5, 1.5, 1.0;
  EXPECT_THROW(sample_copula({bad, {UniformMarginal{}, UniformMarginal{}}}, 3, 1), ValidationError);
  Eigen::MatrixXd npsd = Eigen::MatrixXd::Identity(4, 4);
  npsd(0, 1) = npsd(1, 0) = 0.9;
  npsd(0, 2) = npsd(2, 0) = 0.9;
  npsd(1, 2) = npsd(2, 1) = -0.9;
  EXPECT_THROW(copula_factor(npsd), ValidationError);
  EXPECT_THROW(sample_copula({Eigen::MatrixXd::Identity(2, 2), {UniformMarginal{}}}, 3, 1), DimensionError);
}

TEST(Copula, SingularButPsdFactorizes) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Ones(2, 2);
  const Eigen::MatrixXd l = copula_factor(c);
  EXPECT_LT((l * l.transpose() - c).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(PowerCurveTest, Examples) {
  const PowerCurve c{3, 12, 25, 2};
  EXPECT_EQ(wind_speed_to_power(0.0, c), 0.0);
  EXPECT_EQ(wind_speed_to_power(12.0, c), 2.0);
  EXPECT_NEAR(wind_speed_to_power(9.0, c), 2.0 * (729.0 - 27.0) / (1728.0 - 27.0), 1e-12);
  EXPECT_NEAR(wind_speed_to_power(9.0, c), 0.8254, 5e-5);
  EXPECT_EQ(wind_speed_to_power(25.0, c), 0.0);
  EXPECT_THROW(validate(PowerCurve{5, 4, 25, 1}), ValidationError);
}

TEST(PowerCurveTest, MonotoneAndBoundedBelowCutOut) {
  const PowerCurve c;
  double prev = 0.0;
  for (double v = 0.0; v < c.cut_out; v += 0.01) {
    const double p = wind_speed_to_power(v, c);
    EXPECT_GE(p, prev);
    EXPECT_LE(p, c.rated_power);
    prev = p;
  }
}

TEST(Disaggregate, SplitsByShares) {
  const Grid g = zoned_triangle();
  const Scenario s = disaggregate({100.0, 12.0}, g, PowerCurve{});
  EXPECT_NEAR(s.load[1], 40.0, 1e-12);
  EXPECT_NEAR(s.load[2], 60.0, 1e-12);
  EXPECT_NEAR(s.wind[0], 30.0, 1e-12);
  EXPECT_NEAR(s.wind[1], 10.0, 1e-12);
  const Scenario calm = disaggregate({100.0, 2.0}, g, PowerCurve{});
  EXPECT_EQ(calm.wind[0], 0.0);
  EXPECT_EQ(calm.wind[1], 0.0);
}

TEST(Disaggregate, ConservesZonalTotals) {
  const Grid base = designate_wind(load_grid_file(fixtures::data_dir() + "/case118.m"), 0.2, 11);
  Grid g = base;
  g.zones = partition_zones(g, block_zone_assignment(g, 3));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 2000.0);
  for (int t = 0; t < 20; ++t) {
    const std::vector<double> z = {u(rng), u(rng), u(rng), 8.0, 8.0, 8.0};
    const Scenario s = disaggregate(z, g, PowerCurve{});
    for (int k = 1; k <= 3; ++k) {
      double total = 0.0;
      for (int i = 0; i < g.num_buses(); ++i) {
        if (g.zones->zone_of_bus[i] == k) total += s.load[i];
      }
      EXPECT_NEAR(total, z[k - 1], 1e-9);
    }
  }
}

TEST(Disaggregate, OneBusZoneGetsZonalValue) {
  Grid g = fixtures::two_bus();
  g.zones = partition_zones(g, {1, 2});
  const Scenario s = disaggregate({0.0, 70.0, 5.0, 5.0}, g, PowerCurve{});
  EXPECT_EQ(s.load[1], 70.0);
}

TEST(Disaggregate, ZoneWithoutSharesRejectsMass) {
  Grid g = fixtures::two_bus();
  g.zones = partition_zones(g, {1, 2});
  EXPECT_THROW(disaggregate({10.0, 70.0, 5.0, 5.0}, g, PowerCurve{}), ValidationError);
  EXPECT_THROW(disaggregate({0.0, 70.0}, g, PowerCurve{}), DimensionError);
}

TEST(Distance, SmallExamples) {
  EXPECT_DOUBLE_EQ(ensemble_distance({{0.0}}, {{3.0}}), 3.0);
  EXPECT_DOUBLE_EQ(ensemble_distance({{0.0}, {2.0}}, {{1.0}, {3.0}}), 1.5);
  EXPECT_THROW(ensemble_distance({{0.0}}, {{1.0, 2.0}}), DimensionError);
  EXPECT_THROW(ensemble_distance({}, {{1.0}}), ValidationError);
}

TEST(Distance, MatchesDoubleLoopAndIsSymmetric) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd(0.0, 10.0);
  std::vector<std::vector<double>> X(200, std::vector<double>(7)), Y(150, std::vector<double>(7));
  for (auto& v : X)
    for (double& e : v) e = nd(rng);
  for (auto& v : Y)
    for (double& e : v) e = nd(rng) + 4.0;
  double ref = 0.0;
  for (const auto& x : X) {
    for (const auto& y : Y) {
      double s = 0.0;
      for (int d = 0; d < 7; ++d) s += (x[d] - y[d]) * (x[d] - y[d]);
      ref += std::sqrt(s);
    }
  }
  ref /= static_cast<double>(X.size() * Y.size());
  EXPECT_NEAR(ensemble_distance(X, Y), ref, 1e-12 * ref);
  EXPECT_NEAR(ensemble_distance(X, Y), ensemble_distance(Y, X), 1e-12 * ref);
  EXPECT_GT(energy_distance(X, Y), 0.0);
  EXPECT_NEAR(energy_distance(X, X), 0.0, 1e-9);
}

TEST(Serialization, SpecsRoundTrip) {
  const Grid g = zoned_triangle();
  const TrainingBounds b = default_training_bounds(g);
  EXPECT_EQ(bounds_from_json(bounds_to_json(b)), b);
  const PowerCurve c{3, 11, 24, 2};
  EXPECT_EQ(curve_from_json(curve_to_json(c)), c);
  const CopulaSpec spec{block_correlation(1, 0.6, 0.4, -0.2), {TruncNormalMarginal{1, 2, 0, 3}, WeibullMarginal{2, 8}}};
  const CopulaSpec back = copula_from_json(copula_to_json(spec));
  EXPECT_EQ(back.correlation, spec.correlation);
  EXPECT_EQ(back.marginals, spec.marginals);
}
