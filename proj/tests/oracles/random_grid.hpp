#pragma once

#include <algorithm>
#include <random>
#include <string>

#include "gridrisk/dcopf.hpp"
#include "gridrisk/grid.hpp"

namespace oracle {

/// Connected grid with 2..max_buses buses: a random spanning tree plus a few extra
/// lines, 1..3 dispatchable units with distinct costs, rated lines.
inline gridrisk::Grid random_grid(std::mt19937_64& rng, int max_buses = 6) {
  using namespace gridrisk;
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto pick = [&](int n) { return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(rng)); };

  Grid g;
  g.name = "random";
  const int n = 2 + pick(max_buses - 1);
  for (int i = 0; i < n; ++i) {
    Bus b;
    b.id = i;
    b.original_id = i + 1;
    b.base_load = uni(0.0, 1.0) < 0.7 ? uni(5.0, 80.0) : 0.0;
    g.buses.push_back(b);
  }
  auto add_line = [&](int f, int t) {
    Branch br;
    br.from_bus = f;
    br.to_bus = t;
    br.reactance = uni(0.05, 0.5);
    br.flow_limit = uni(15.0, 120.0);
    g.branches.push_back(br);
  };
  for (int i = 1; i < n; ++i) add_line(pick(i), i);
  const int extra = pick(3);
  for (int e = 0; e < extra && n > 2; ++e) {
    const int f = pick(n);
    int t = pick(n);
    if (t == f) t = (f + 1) % n;
    add_line(f, t);
  }
  const int gens = 1 + pick(3);
  for (int k = 0; k < gens; ++k) {
    Generator gen;
    gen.bus = pick(n);
    gen.p_min = uni(0.0, 1.0) < 0.5 ? 0.0 : uni(0.0, 15.0);
    gen.p_max = gen.p_min + uni(20.0, 150.0);
    gen.marginal_cost = uni(5.0, 50.0);
    g.generators.push_back(gen);
  }
  const int slack = g.generators[0].bus;
  for (auto& b : g.buses) b.kind = b.id == slack ? BusKind::Slack : BusKind::PQ;
  g.generators[0].kind = GenKind::Slack;
  return g;
}

}  // namespace oracle
