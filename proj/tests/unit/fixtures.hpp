#pragma once

#include <string>

#include "gridrisk/grid.hpp"

namespace fixtures {

inline std::string data_dir() { return GRIDRISK_DATA_DIR; }

/// Generator at bus 1 (c=10, p_max=100), 50 MW load at bus 2, line x=0.1 rated 100 MW.
inline gridrisk::Grid two_bus() {
  using namespace gridrisk;
  Grid g;
  g.name = "two_bus";
  g.buses = {{0, 1, BusKind::Slack, 0.0}, {1, 2, BusKind::PQ, 50.0}};
  g.branches = {{0, 1, 0.1, 100.0, true}};
  g.generators = {{0, 0.0, 100.0, 10.0, GenKind::Slack}};
  return g;
}

/// Triangle 1-2-3 with a cheap unit at bus 1, an expensive one at bus 2 and the load at
/// bus 3; line 1-3 is rated low enough to bind.
inline gridrisk::Grid three_bus() {
  using namespace gridrisk;
  Grid g;
  g.name = "three_bus";
  g.buses = {{0, 1, BusKind::Slack, 0.0}, {1, 2, BusKind::PV, 0.0}, {2, 3, BusKind::PQ, 120.0}};
  g.branches = {{0, 1, 0.1, 200.0, true}, {1, 2, 0.1, 200.0, true}, {0, 2, 0.1, 60.0, true}};
  g.generators = {{0, 0.0, 200.0, 10.0, GenKind::Slack}, {1, 0.0, 200.0, 30.0, GenKind::Dispatchable}};
  return g;
}

inline const char* kTwoBusCase = R"(function mpc = two_bus
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	135	1	1.05	0.95;
	2	1	50	0	0	0	1	1	0	135	1	1.05	0.95;
];
mpc.gen = [
	1	0	0	10	-10	1	100	1	100	0	0	0	0	0	0	0	0	0	0	0	0;
];
mpc.branch = [
	1	2	0	0.1	0	100	100	100	0	0	1	-360	360;
];
mpc.gencost = [
	2	0	0	3	0	10	0;
];
)";

}  // namespace fixtures
