#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "gridrisk/case_io.hpp"
#include "gridrisk/dcopf.hpp"
#include "gridrisk/errors.hpp"
#include "lp_oracle.hpp"
#include "random_grid.hpp"

using namespace gridrisk;

TEST(Dcopf, TwoBusHandSolution) {
  const Grid g = fixtures::two_bus();
  const OpfSolution s = solve_dcopf(g, base_scenario(g));
  ASSERT_EQ(s.status, OpfStatus::Optimal);
  EXPECT_NEAR(s.dispatch[0], 50.0, 1e-9);
  EXPECT_NEAR(s.flows[0], 50.0, 1e-9);
  EXPECT_NEAR(s.angles[0] - s.angles[1], 0.05, 1e-12);
  EXPECT_NEAR(s.objective, 500.0, 1e-7);
  EXPECT_NEAR(s.slack_injection, 0.0, 1e-9);
}

TEST(Dcopf, ShortfallGoesToSlack) {
  Grid g = fixtures::two_bus();
  g.generators[0].p_max = 80.0;
  Scenario sc = base_scenario(g);
  sc.load[1] = 100.0;
  g.branches[0].flow_limit = 200.0;
  const OpfSolution s = solve_dcopf(g, sc);
  EXPECT_EQ(s.status, OpfStatus::Shed);
  EXPECT_NEAR(s.slack_injection, 20.0, 1e-9);
  EXPECT_NEAR(s.dispatch[0], 80.0, 1e-9);
  const SystemQoIs q = derive_qois(s, g, sc);
  EXPECT_NEAR(q.shedding, 20.0, 1e-9);
  EXPECT_EQ(q.reserve, 0.0);
}

TEST(Dcopf, BindingLineOnTriangle) {
  // With equal reactances 2/3 of bus-1 output and 1/3 of bus-2 output use line 1-3,
  // so the 60 MW limit forces 60 MW from each unit.
  const Grid g = fixtures::three_bus();
  const Scenario sc = base_scenario(g);
  const OpfSolution s = solve_dcopf(g, sc);
  ASSERT_EQ(s.status, OpfStatus::Optimal);
  EXPECT_NEAR(s.dispatch[0], 60.0, 1e-8);
  EXPECT_NEAR(s.dispatch[1], 60.0, 1e-8);
  EXPECT_NEAR(s.flows[2], 60.0, 1e-8);
  EXPECT_NEAR(s.objective, 2400.0, 1e-6);
  // KCL at bus 3
  EXPECT_NEAR(s.flows[1] + s.flows[2], 120.0, 1e-8);
  const auto o = oracle::brute_force_opf(g, sc);
  ASSERT_TRUE(o.feasible);
  EXPECT_NEAR(s.objective, o.objective, 1e-6);
}

TEST(Dcopf, LayoutCounts) {
  const Grid g = fixtures::two_bus();
  DcopfLayout layout;
  const LinearProgram lp = assemble_lp(g, base_scenario(g), {}, &layout);
  EXPECT_EQ(lp.num_vars(), 3);
  EXPECT_EQ(layout.angle_var[0], -1);

  const Grid t = fixtures::three_bus();
  const LinearProgram lt = assemble_lp(t, base_scenario(t), {}, &layout);
  EXPECT_EQ(lt.num_rows() - layout.first_line_row, 2 * t.num_branches());
}

TEST(Dcopf, WindAboveLocalLoadIsValid) {
  Grid g = fixtures::two_bus();
  g.generators.push_back({1, 0.0, 100.0, 0.0, GenKind::Wind});
  Scenario sc = base_scenario(g);
  sc.wind[0] = 80.0;  // 30 MW above the bus-2 load
  g.generators[0].p_min = 0.0;
  const OpfSolution s = solve_dcopf(g, sc);
  EXPECT_NE(s.status, OpfStatus::Infeasible);
  EXPECT_NEAR(s.dispatch[0] + s.slack_injection, -30.0, 1e-8);
  EXPECT_NEAR(s.flows[0], -30.0, 1e-8);
  EXPECT_EQ(derive_qois(s, g, sc).shedding, 0.0);
}

TEST(Dcopf, DimensionMismatchThrows) {
  const Grid g = fixtures::two_bus();
  Scenario sc = base_scenario(g);
  sc.load.push_back(1.0);
  EXPECT_THROW(assemble_lp(g, sc), DimensionError);
  EXPECT_THROW(solve_dcopf(g, sc), DimensionError);
}

TEST(Qois, ReserveArithmetic) {
  Grid g;
  g.buses = {{0, 1, BusKind::Slack, 400.0}};
  g.generators = {{0, 0.0, 300.0, 10.0, GenKind::Slack},
                  {0, 0.0, 200.0, 20.0, GenKind::Dispatchable},
                  {0, 0.0, 90.0, 0.0, GenKind::Wind}};
  Scenario sc{{400.0}, {50.0}};
  OpfSolution sol;
  sol.dispatch = {50.0, 30.0};
  sol.slack_injection = -10.0;
  const SystemQoIs q = derive_qois(sol, g, sc);
  EXPECT_DOUBLE_EQ(q.reserve, 150.0);
  EXPECT_DOUBLE_EQ(q.shedding, 0.0);
  EXPECT_DOUBLE_EQ(q.total_cost, 1100.0);
  sol.slack_injection = 20.0;
  EXPECT_DOUBLE_EQ(derive_qois(sol, g, sc).shedding, 20.0);
}

TEST(Qois, ZonalReserve) {
  Grid g = fixtures::three_bus();
  g.zones = partition_zones(g, {1, 1, 1});
  const Scenario sc = base_scenario(g);
  const OpfSolution sol = solve_dcopf(g, sc);
  EXPECT_DOUBLE_EQ(zonal_reserve(g, sc, 1), derive_qois(sol, g, sc).reserve);

  // zone 2 holds only the load bus; zone 1 nets 400 MW of capacity against no load
  g.zones = partition_zones(g, {1, 1, 2});
  EXPECT_DOUBLE_EQ(zonal_reserve(g, sc, 2), 0.0);
  EXPECT_DOUBLE_EQ(zonal_reserve(g, sc, 1), 400.0);
  // the clipped zone makes the zonal sum exceed the system value
  EXPECT_GT(zonal_reserve(g, sc, 1) + zonal_reserve(g, sc, 2), derive_qois(sol, g, sc).reserve);
  EXPECT_THROW(zonal_reserve(g, sc, 3), LookupError);
}

TEST(Rating, RulesOnlyTouchUnratedBranches) {
  Grid g = fixtures::three_bus();
  g.branches[0].flow_limit = kInf;
  g.branches[1].flow_limit = kInf;
  RatingRule fixed{RatingRule::Kind::Fixed, 75.0};
  const Grid f = apply_rating_rule(g, fixed);
  EXPECT_EQ(f.branches[0].flow_limit, 75.0);
  EXPECT_EQ(f.branches[2].flow_limit, 60.0);

  RatingRule margin;
  margin.kind = RatingRule::Kind::BaseFlowMargin;
  margin.factor = 2.0;
  margin.min_mw = 10.0;
  const Grid m = apply_rating_rule(g, margin);
  const OpfSolution base = solve_dcopf(g, base_scenario(g));
  EXPECT_NEAR(m.branches[0].flow_limit, std::max(10.0, 2.0 * std::abs(base.flows[0])), 1e-9);
  EXPECT_EQ(m.branches[2].flow_limit, 60.0);
}

namespace {

Scenario jitter(const Grid& g, std::mt19937_64& rng) {
  Scenario s = base_scenario(g);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (double& v : s.load) v *= u(rng);
  return s;
}

}  // namespace

TEST(DcopfProperty, MatchesOracleOnRandomGrids) {
  std::mt19937_64 rng(2024);
  int feasible = 0;
  for (int t = 0; t < 60; ++t) {
    const Grid g = oracle::random_grid(rng);
    const Scenario sc = jitter(g, rng);
    const OpfSolution s = solve_dcopf(g, sc);
    const auto o = oracle::brute_force_opf(g, sc);
    ASSERT_EQ(s.status == OpfStatus::Infeasible, !o.feasible) << "trial " << t;
    if (!o.feasible) continue;
    ++feasible;
    const double scale = std::max(1.0, std::abs(o.objective));
    EXPECT_LE(std::abs(s.objective - o.objective) / scale, 1e-6) << "trial " << t;
  }
  EXPECT_GT(feasible, 30);
}

TEST(DcopfProperty, BalanceBoundsAndExclusivity) {
  const Grid g = apply_rating_rule(load_grid_file(fixtures::data_dir() + "/case30.m"),
                                   {RatingRule::Kind::BaseFlowMargin, 0.0, 1.5, 20.0});
  std::mt19937_64 rng(8);
  const auto disp = g.dispatchable_generators();
  for (int t = 0; t < 30; ++t) {
    const Scenario sc = jitter(g, rng);
    const OpfSolution s = solve_dcopf(g, sc);
    if (s.status == OpfStatus::Infeasible) continue;
    EXPECT_LE(nodal_balance_residual(g, sc, s), 1e-8);
    double total = s.slack_injection;
    for (double p : s.dispatch) total += p;
    double load = 0.0;
    for (double v : sc.load) load += v;
    EXPECT_NEAR(total, load, 1e-6);
    for (std::size_t k = 0; k < disp.size(); ++k) {
      EXPECT_GE(s.dispatch[k], g.generators[disp[k]].p_min - 1e-9);
      EXPECT_LE(s.dispatch[k], g.generators[disp[k]].p_max + 1e-9);
    }
    for (int b = 0; b < g.num_branches(); ++b) EXPECT_LE(std::abs(s.flows[b]), g.branches[b].flow_limit + 1e-6);
    const SystemQoIs q = derive_qois(s, g, sc);
    EXPECT_GE(q.reserve, 0.0);
    EXPECT_GE(q.shedding, 0.0);
    if (q.shedding > 0.0) EXPECT_EQ(q.reserve, 0.0);
  }
}

TEST(DcopfProperty, ObjectiveMonotoneInLoad) {
  Grid g = load_grid_file(fixtures::data_dir() + "/case14.m");
  Scenario sc = base_scenario(g);
  double prev = solve_dcopf(g, sc).objective;
  for (int step = 0; step < 10; ++step) {
    sc.load[13] += 5.0;
    const double obj = solve_dcopf(g, sc).objective;
    EXPECT_GE(obj, prev - 1e-7 * std::abs(prev));
    prev = obj;
  }
}

TEST(DcopfProperty, FlowAntisymmetry) {
  const Grid g = fixtures::three_bus();
  Grid r = g;
  for (auto& br : r.branches) std::swap(br.from_bus, br.to_bus);
  const OpfSolution a = solve_dcopf(g, base_scenario(g));
  const OpfSolution b = solve_dcopf(r, base_scenario(r));
  for (int k = 0; k < g.num_branches(); ++k) EXPECT_NEAR(a.flows[k], -b.flows[k], 1e-9);
}
