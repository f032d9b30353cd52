#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace gridrisk {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { LessEqual, GreaterEqual, Equal };

struct LpRow {
  std::vector<std::pair<int, double>> coeffs;  // (variable, coefficient)
  RowSense sense = RowSense::LessEqual;
  double rhs = 0.0;
};

/// min c'x  s.t.  rows,  lower <= x <= upper. Infinite bounds are allowed.
struct LinearProgram {
  std::vector<double> cost;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<LpRow> rows;
  std::vector<std::string> names;  // optional, for diagnostics

  int num_vars() const noexcept { return static_cast<int>(cost.size()); }
  int num_rows() const noexcept { return static_cast<int>(rows.size()); }

  int add_var(double c, double lo, double hi, std::string name = {});
  void add_row(std::vector<std::pair<int, double>> coeffs, RowSense sense, double rhs);
};

enum class LpStatus { Optimal, Infeasible };

const char* to_string(LpStatus status);

struct SimplexOptions {
  double feasibility_tol = 1e-8;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  int refactor_interval = 100;
  int max_iterations = 0;          // 0 selects 50 * (rows + vars) + 1000
  int degenerate_before_bland = 50;  // consecutive degenerate pivots before Bland's rule engages
};

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
  std::vector<double> row_activity;
  int iterations = 0;
  int bland_iterations = 0;
  double max_primal_residual = 0.0;  // max |row activity - bound violation| at exit
};

/// Bounded-variable primal revised simplex (composite phase 1, Dantzig pricing with a
/// Harris ratio test, Bland's rule after a run of degenerate pivots). Returns an optimal
/// basic solution or status Infeasible; throws SolverError when the LP is unbounded or
/// the iteration limit is reached.
LpResult solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

}  // namespace gridrisk
