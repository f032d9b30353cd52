#include <gtest/gtest.h>

#include <random>

#include "gridrisk/errors.hpp"
#include "gridrisk/lp.hpp"
#include "lp_oracle.hpp"

using namespace gridrisk;

TEST(Simplex, OneDimensional) {
  LinearProgram lp;
  lp.add_var(1.0, -kInf, kInf);
  lp.add_row({{0, 1.0}}, RowSense::GreaterEqual, 3.0);
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.x[0], 3.0, 1e-12);
  EXPECT_NEAR(r.objective, 3.0, 1e-12);
}

TEST(Simplex, EqualityAndBounds) {
  // min x0 + 2 x1  s.t.  x0 + x1 = 4, 0 <= x0 <= 3, x1 >= 0
  LinearProgram lp;
  lp.add_var(1.0, 0.0, 3.0);
  lp.add_var(2.0, 0.0, kInf);
  lp.add_row({{0, 1.0}, {1, 1.0}}, RowSense::Equal, 4.0);
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.x[0], 3.0, 1e-10);
  EXPECT_NEAR(r.x[1], 1.0, 1e-10);
  EXPECT_NEAR(r.objective, 5.0, 1e-10);
}

TEST(Simplex, InfeasibleIsReported) {
  LinearProgram lp;
  lp.add_var(1.0, 0.0, 1.0);
  lp.add_row({{0, 1.0}}, RowSense::GreaterEqual, 2.0);
  EXPECT_EQ(solve_lp(lp).status, LpStatus::Infeasible);
}

TEST(Simplex, UnboundedThrows) {
  LinearProgram lp;
  lp.add_var(-1.0, 0.0, kInf);
  lp.add_row({{0, 1.0}}, RowSense::GreaterEqual, 1.0);
  EXPECT_THROW(solve_lp(lp), SolverError);
}

TEST(Simplex, BealeCyclingExampleTerminates) {
  // Classic example on which textbook Dantzig pricing cycles; optimum -5/4.
  LinearProgram lp;
  lp.add_var(-0.75, 0.0, kInf);
  lp.add_var(20.0, 0.0, kInf);
  lp.add_var(-0.5, 0.0, kInf);
  lp.add_var(6.0, 0.0, kInf);
  lp.add_row({{0, 0.25}, {1, -8.0}, {2, -1.0}, {3, 9.0}}, RowSense::LessEqual, 0.0);
  lp.add_row({{0, 0.5}, {1, -12.0}, {2, -0.5}, {3, 3.0}}, RowSense::LessEqual, 0.0);
  lp.add_row({{2, 1.0}}, RowSense::LessEqual, 1.0);
  SimplexOptions opt;
  opt.degenerate_before_bland = 1;
  const LpResult r = solve_lp(lp, opt);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.objective, -1.25, 1e-10);
}

TEST(Simplex, HighlyDegenerateVertex) {
  // Many constraints through the origin; the optimum sits on all of them.
  LinearProgram lp;
  for (int j = 0; j < 3; ++j) lp.add_var(-1.0, 0.0, kInf);
  for (int k = 1; k <= 8; ++k) {
    lp.add_row({{0, 1.0 * k}, {1, 1.0}, {2, -1.0 * k}}, RowSense::LessEqual, 0.0);
  }
  lp.add_row({{0, 1.0}, {1, 1.0}, {2, 1.0}}, RowSense::LessEqual, 1.0);
  const LpResult r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.objective, -1.0, 1e-10);
}

// Random bounded feasible LPs in five variables against vertex enumeration.
TEST(Simplex, MatchesVertexEnumeration) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const int nv = 5;
    const int m = 3 + static_cast<int>(rng() % 4);
    const int meq = static_cast<int>(rng() % 2);
    Eigen::VectorXd x0(nv);
    for (int j = 0; j < nv; ++j) x0(j) = 2.0 * u(rng);

    LinearProgram lp;
    oracle::VertexLp vo;
    vo.c.resize(nv);
    for (int j = 0; j < nv; ++j) {
      vo.c(j) = u(rng);
      lp.add_var(vo.c(j), -5.0, 5.0);
    }
    vo.E.resize(meq, nv);
    vo.e.resize(meq);
    vo.A.resize(m + 2 * nv, nv);
    vo.b.resize(m + 2 * nv);
    vo.A.setZero();
    for (int i = 0; i < m + meq; ++i) {
      Eigen::VectorXd a(nv);
      for (int j = 0; j < nv; ++j) a(j) = u(rng);
      std::vector<std::pair<int, double>> coeffs;
      for (int j = 0; j < nv; ++j) coeffs.emplace_back(j, a(j));
      if (i < m) {
        const double rhs = a.dot(x0) + std::abs(u(rng));
        lp.add_row(coeffs, RowSense::LessEqual, rhs);
        vo.A.row(i) = a.transpose();
        vo.b(i) = rhs;
      } else {
        const double rhs = a.dot(x0);
        lp.add_row(coeffs, RowSense::Equal, rhs);
        vo.E.row(i - m) = a.transpose();
        vo.e(i - m) = rhs;
      }
    }
    for (int j = 0; j < nv; ++j) {
      vo.A(m + 2 * j, j) = 1.0;
      vo.b(m + 2 * j) = 5.0;
      vo.A(m + 2 * j + 1, j) = -1.0;
      vo.b(m + 2 * j + 1) = 5.0;
    }
    Eigen::VectorXd best;
    double best_obj = 0.0;
    ASSERT_TRUE(vo.solve(best, best_obj)) << "trial " << t;
    const LpResult r = solve_lp(lp);
    ASSERT_EQ(r.status, LpStatus::Optimal) << "trial " << t;
    EXPECT_NEAR(r.objective, best_obj, 1e-8) << "trial " << t;
    EXPECT_LE(r.max_primal_residual, 1e-8);
  }
}
