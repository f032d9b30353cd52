#pragma once

// Five-sample overload tables for the branch estimators. Each table is written as one bit
// string per sample ('1' = overloaded); flows are built to realize exactly that pattern,
// including flows that sit exactly on the threshold and negative flows.

#include <optional>
#include <string>
#include <vector>

namespace oracle {

struct RiskFixture {
  std::vector<std::string> pattern;  // per sample, one char per branch
  std::vector<double> limits;
  double epsilon = 0.9;
  std::vector<double> costs;
  std::vector<std::vector<double>> flows;  // realized from pattern, per sample
};

/// Plain counting over the bit strings, independent of the library.
struct RiskExpectation {
  std::vector<double> prob;
  std::vector<std::optional<std::vector<double>>> cond;
  std::vector<double> risk;
  std::vector<char> undefined_row;
};

inline RiskExpectation enumerate(const RiskFixture& f) {
  const int M = static_cast<int>(f.pattern.size());
  const int N = static_cast<int>(f.limits.size());
  RiskExpectation e;
  for (int i = 0; i < N; ++i) {
    int hits = 0;
    for (int k = 0; k < M; ++k) hits += f.pattern[k][i] == '1';
    e.prob.push_back(static_cast<double>(hits) / M);
  }
  for (int i = 0; i < N; ++i) {
    int omega = 0;
    std::vector<int> joint(N, 0);
    for (int k = 0; k < M; ++k) {
      if (f.pattern[k][i] != '1') continue;
      ++omega;
      for (int j = 0; j < N; ++j) joint[j] += f.pattern[k][j] == '1';
    }
    if (omega == 0) {
      e.cond.push_back(std::nullopt);
      continue;
    }
    std::vector<double> row;
    for (int j = 0; j < N; ++j) row.push_back(static_cast<double>(joint[j]) / omega);
    e.cond.push_back(row);
  }
  for (int i = 0; i < N; ++i) {
    double r = e.prob[i] * f.costs[i];
    if (e.cond[i]) {
      for (int j = 0; j < N; ++j) {
        if (j != i) r += (*e.cond[i])[j] * f.costs[j];
      }
    }
    e.risk.push_back(r);
    e.undefined_row.push_back(e.cond[i] ? 0 : 1);
  }
  return e;
}

inline RiskFixture make_fixture(std::vector<std::string> pattern, std::vector<double> limits, double eps,
                                std::vector<double> costs) {
  RiskFixture f{std::move(pattern), std::move(limits), eps, std::move(costs), {}};
  for (std::size_t k = 0; k < f.pattern.size(); ++k) {
    std::vector<double> row;
    for (std::size_t i = 0; i < f.limits.size(); ++i) {
      const double thr = f.epsilon * f.limits[i];
      const double sign = (k + i) % 2 == 0 ? 1.0 : -1.0;
      double mag;
      if (f.pattern[k][i] == '1') {
        mag = (k + 2 * i) % 3 == 0 ? thr : thr + 0.25 * (f.limits[i] - thr) + 1.0;  // on or above the threshold
      } else {
        mag = (k + i) % 3 == 0 ? 0.0 : thr * (0.5 + 0.1 * ((k + i) % 4));  // strictly below
      }
      row.push_back(sign * mag);
    }
    f.flows.push_back(row);
  }
  return f;
}

/// The twenty constructed tables.
inline std::vector<RiskFixture> risk_fixtures() {
  std::vector<RiskFixture> v;
  auto add = [&](std::vector<std::string> p, std::vector<double> lim, double eps, std::vector<double> c) {
    v.push_back(make_fixture(std::move(p), std::move(lim), eps, std::move(c)));
  };
  add({"10", "00", "11", "01", "10"}, {100, 50}, 0.9, {500, 500});
  add({"111", "000", "101", "110", "001"}, {80, 120, 60}, 0.9, {100, 200, 300});
  add({"0000", "0000", "0000", "0000", "0000"}, {10, 20, 30, 40}, 0.8, {1, 1, 1, 1});
  add({"1111", "1111", "1111", "1111", "1111"}, {10, 20, 30, 40}, 1.0, {250, 250, 250, 250});
  add({"1", "0", "1", "1", "0"}, {75}, 0.9, {1000});
  add({"100", "010", "001", "100", "010"}, {100, 100, 100}, 0.95, {10, 20, 30});
  add({"1100", "1100", "0011", "0011", "0000"}, {50, 60, 70, 80}, 0.9, {500, 400, 300, 200});
  add({"1010", "0101", "1010", "0101", "1111"}, {200, 150, 100, 50}, 0.85, {5, 10, 15, 20});
  add({"10", "10", "10", "10", "10"}, {40, 40}, 0.9, {700, 900});
  add({"011", "011", "000", "001", "010"}, {30, 45, 90}, 0.7, {120, 0, 60});
  add({"1000", "1100", "1110", "1111", "0000"}, {100, 200, 300, 400}, 0.9, {1, 2, 3, 4});
  add({"0001", "0010", "0100", "1000", "0001"}, {25, 35, 45, 55}, 0.6, {300, 300, 300, 300});
  add({"11", "01", "00", "01", "11"}, {500, 20}, 0.99, {2500, 100});
  add({"100", "100", "110", "111", "100"}, {60, 70, 80}, 0.9, {800, 600, 400});
  add({"0110", "1001", "0110", "1001", "0110"}, {15, 25, 35, 45}, 0.75, {50, 60, 70, 80});
  add({"1", "1", "1", "1", "1"}, {120}, 0.9, {333});
  add({"010", "010", "010", "000", "110"}, {90, 95, 100}, 0.5, {10, 1000, 100});
  add({"1011", "0000", "1011", "0100", "1111"}, {70, 80, 90, 100}, 0.9, {0, 0, 0, 0});
  add({"00", "01", "00", "10", "00"}, {1000, 1000}, 0.9, {9000, 1});
  add({"1101", "1011", "0111", "1110", "0000"}, {33, 44, 55, 66}, 0.9, {125, 250, 375, 500});
  return v;
}

}  // namespace oracle
