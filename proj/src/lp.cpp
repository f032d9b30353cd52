#include "gridrisk/lp.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "gridrisk/errors.hpp"

namespace gridrisk {

int LinearProgram::add_var(double c, double lo, double hi, std::string name) {
  cost.push_back(c);
  lower.push_back(lo);
  upper.push_back(hi);
  names.push_back(std::move(name));
  return num_vars() - 1;
}

void LinearProgram::add_row(std::vector<std::pair<int, double>> coeffs, RowSense sense, double rhs) {
  rows.push_back(LpRow{std::move(coeffs), sense, rhs});
}

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
  }
  return "?";
}

namespace {

/// Row lo <= a'x <= hi after merging rows that differ only by sign.
struct RangedRow {
  std::vector<std::pair<int, double>> coeffs;
  double lo = -kInf;
  double hi = kInf;
};

std::vector<RangedRow> presolve_rows(const LinearProgram& lp, bool& infeasible) {
  std::vector<RangedRow> out;
  std::map<std::vector<std::pair<int, double>>, std::size_t> seen;
  infeasible = false;
  for (const auto& row : lp.rows) {
    std::vector<std::pair<int, double>> coeffs;
    {
      std::map<int, double> merged;
      for (auto [j, a] : row.coeffs) {
        if (j < 0 || j >= lp.num_vars()) throw DimensionError("LP row references an unknown variable");
        merged[j] += a;
      }
      for (auto [j, a] : merged) {
        if (a != 0.0) coeffs.emplace_back(j, a);
      }
    }
    double lo = -kInf, hi = kInf;
    switch (row.sense) {
      case RowSense::LessEqual: hi = row.rhs; break;
      case RowSense::GreaterEqual: lo = row.rhs; break;
      case RowSense::Equal: lo = hi = row.rhs; break;
    }
    if (coeffs.empty()) {
      if (lo > 0.0 || hi < 0.0) infeasible = true;
      continue;
    }
    if (coeffs.front().second < 0.0) {
      for (auto& c : coeffs) c.second = -c.second;
      std::swap(lo, hi);
      lo = -lo;
      hi = -hi;
    }
    auto [it, fresh] = seen.emplace(coeffs, out.size());
    if (fresh) {
      out.push_back(RangedRow{std::move(coeffs), lo, hi});
    } else {
      auto& r = out[it->second];
      r.lo = std::max(r.lo, lo);
      r.hi = std::min(r.hi, hi);
    }
  }
  std::vector<RangedRow> kept;
  for (auto& r : out) {
    if (r.lo > r.hi) infeasible = true;
    if (std::isinf(r.lo) && std::isinf(r.hi)) continue;
    kept.push_back(std::move(r));
  }
  return kept;
}

enum class NonbasicAt : char { Lower, Upper, Zero, Basic };

class Simplex {
public:
  Simplex(const LinearProgram& lp, std::vector<RangedRow> rows, const SimplexOptions& opt)
      : opt_(opt), n_(lp.num_vars()), m_(static_cast<int>(rows.size())) {
    const int total = n_ + m_;
    col_start_.assign(n_ + 1, 0);
    for (const auto& r : rows) {
      for (auto [j, a] : r.coeffs) {
        (void)a;
        ++col_start_[j + 1];
      }
    }
    for (int j = 0; j < n_; ++j) col_start_[j + 1] += col_start_[j];
    col_row_.resize(col_start_[n_]);
    col_val_.resize(col_start_[n_]);
    std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
    for (int i = 0; i < m_; ++i) {
      for (auto [j, a] : rows[i].coeffs) {
        col_row_[fill[j]] = i;
        col_val_[fill[j]++] = a;
      }
    }

    lb_.resize(total);
    ub_.resize(total);
    cost_.assign(total, 0.0);
    double cmax = 0.0;
    for (int j = 0; j < n_; ++j) {
      lb_[j] = lp.lower[j];
      ub_[j] = lp.upper[j];
      cmax = std::max(cmax, std::abs(lp.cost[j]));
    }
    cost_scale_ = cmax > 0.0 ? cmax : 1.0;
    for (int j = 0; j < n_; ++j) cost_[j] = lp.cost[j] / cost_scale_;
    for (int i = 0; i < m_; ++i) {
      lb_[n_ + i] = rows[i].lo;
      ub_[n_ + i] = rows[i].hi;
    }

    x_.assign(total, 0.0);
    state_.assign(total, NonbasicAt::Zero);
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(lb_[j])) {
        state_[j] = NonbasicAt::Lower;
        x_[j] = lb_[j];
      } else if (std::isfinite(ub_[j])) {
        state_[j] = NonbasicAt::Upper;
        x_[j] = ub_[j];
      }
    }
    basis_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      basis_[i] = n_ + i;
      state_[n_ + i] = NonbasicAt::Basic;
    }
    binv_ = -Eigen::MatrixXd::Identity(m_, m_);
    recompute_basics();
  }

  LpResult run() {
    LpResult res;
    const int limit = opt_.max_iterations > 0 ? opt_.max_iterations : 50 * (n_ + m_) + 1000;
    int since_refactor = 0;
    int degenerate_run = 0;
    bool bland = false;
    Eigen::VectorXd cb(m_), y(m_), alpha(m_);

    for (int iter = 0;; ++iter) {
      if (iter >= limit) throw SolverError("simplex iteration limit reached");
      if (since_refactor >= opt_.refactor_interval) {
        refactor();
        since_refactor = 0;
      }

      // Phase selection: composite phase 1 whenever any basic variable is out of bounds.
      bool phase1 = false;
      for (int i = 0; i < m_; ++i) {
        const int j = basis_[i];
        const double v = x_[j];
        if (v < lb_[j] - opt_.feasibility_tol) {
          cb(i) = -1.0;
          phase1 = true;
        } else if (v > ub_[j] + opt_.feasibility_tol) {
          cb(i) = 1.0;
          phase1 = true;
        } else {
          cb(i) = 0.0;
        }
      }
      if (!phase1) {
        for (int i = 0; i < m_; ++i) cb(i) = cost_[basis_[i]];
      }
      y.noalias() = binv_.transpose() * cb;

      // Pricing.
      int enter = -1;
      int dir = 0;
      double best = 0.0;
      for (int j = 0; j < n_ + m_; ++j) {
        const NonbasicAt st = state_[j];
        if (st == NonbasicAt::Basic) continue;
        if (lb_[j] == ub_[j]) continue;
        double dj = phase1 ? 0.0 : cost_[j];
        if (j < n_) {
          for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) dj -= y(col_row_[k]) * col_val_[k];
        } else {
          dj += y(j - n_);
        }
        int jdir = 0;
        if (st == NonbasicAt::Lower && dj < -opt_.optimality_tol) jdir = 1;
        else if (st == NonbasicAt::Upper && dj > opt_.optimality_tol) jdir = -1;
        else if (st == NonbasicAt::Zero && std::abs(dj) > opt_.optimality_tol) jdir = dj < 0 ? 1 : -1;
        if (!jdir) continue;
        if (bland) {
          enter = j;
          dir = jdir;
          break;
        }
        if (std::abs(dj) > best) {
          best = std::abs(dj);
          enter = j;
          dir = jdir;
        }
      }

      if (enter < 0) {
        // Confirm on a fresh factorization before declaring the outcome.
        if (since_refactor > 0) {
          refactor();
          since_refactor = 0;
          continue;
        }
        res.iterations = iter;
        res.status = phase1 ? LpStatus::Infeasible : LpStatus::Optimal;
        break;
      }

      column(enter, alpha);

      // Harris two-pass ratio test; Bland mode uses exact ratios with smallest-index ties.
      const double tol = opt_.feasibility_tol;
      double relaxed = kInf;
      for (int i = 0; i < m_; ++i) {
        const double rate = -dir * alpha(i);
        if (std::abs(rate) <= opt_.pivot_tol) continue;
        const double bound = blocking_bound(i, rate, tol);
        if (std::isnan(bound)) continue;
        relaxed = std::min(relaxed, (bound - x_[basis_[i]]) / rate);
      }
      const double flip = ub_[enter] - lb_[enter];

      int leave = -1;
      double step = kInf;
      if (bland) {
        for (int i = 0; i < m_; ++i) {
          const double rate = -dir * alpha(i);
          if (std::abs(rate) <= opt_.pivot_tol) continue;
          const double bound = blocking_bound(i, rate, 0.0);
          if (std::isnan(bound)) continue;
          const double t = std::max(0.0, (bound - x_[basis_[i]]) / rate);
          if (t < step - 1e-12 || (t <= step + 1e-12 && leave >= 0 && basis_[i] < basis_[leave])) {
            step = t;
            leave = i;
          }
        }
      } else if (std::isfinite(relaxed)) {
        double best_rate = 0.0;
        for (int i = 0; i < m_; ++i) {
          const double rate = -dir * alpha(i);
          if (std::abs(rate) <= opt_.pivot_tol) continue;
          const double bound = blocking_bound(i, rate, 0.0);
          if (std::isnan(bound)) continue;
          const double t = (bound - x_[basis_[i]]) / rate;
          if (t <= relaxed && std::abs(rate) > best_rate) {
            best_rate = std::abs(rate);
            leave = i;
            step = std::max(0.0, t);
          }
        }
      }

      if (std::isfinite(flip) && flip <= step) {
        // Entering variable reaches its opposite bound first: no basis change.
        apply_step(enter, dir, flip, alpha);
        state_[enter] = dir > 0 ? NonbasicAt::Upper : NonbasicAt::Lower;
        x_[enter] = dir > 0 ? ub_[enter] : lb_[enter];
        degenerate_run = 0;
        bland = false;
        continue;
      }
      if (leave < 0) {
        if (phase1) throw SolverError("simplex phase 1 lost feasibility progress (numerical trouble)");
        throw SolverError("LP is unbounded");
      }

      const int out = basis_[leave];
      const double rate = -dir * alpha(leave);
      const double target = blocking_bound(leave, rate, 0.0);
      apply_step(enter, dir, step, alpha);
      x_[out] = target;
      state_[out] = (target == lb_[out]) ? NonbasicAt::Lower : NonbasicAt::Upper;
      pivot(leave, enter, alpha);
      ++since_refactor;

      if (step <= 1e-12) {
        if (++degenerate_run >= opt_.degenerate_before_bland) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
      if (bland) ++res.bland_iterations;
    }

    res.x.assign(x_.begin(), x_.begin() + n_);
    double worst = 0.0;
    for (int j = 0; j < n_ + m_; ++j) {
      worst = std::max({worst, lb_[j] - x_[j], x_[j] - ub_[j]});
    }
    res.max_primal_residual = worst;
    return res;
  }

private:
  // Bound a basic variable runs into when moving at `rate`; NaN if it never blocks.
  double blocking_bound(int i, double rate, double tol) const {
    const int j = basis_[i];
    const double v = x_[j];
    const bool below = v < lb_[j] - opt_.feasibility_tol;
    const bool above = v > ub_[j] + opt_.feasibility_tol;
    if (below) return rate > 0 ? lb_[j] + tol : std::nan("");
    if (above) return rate < 0 ? ub_[j] - tol : std::nan("");
    if (rate > 0) return std::isfinite(ub_[j]) ? ub_[j] + tol : std::nan("");
    return std::isfinite(lb_[j]) ? lb_[j] - tol : std::nan("");
  }

  void column(int j, Eigen::VectorXd& out) const {
    if (j < n_) {
      out.setZero();
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) out.noalias() += binv_.col(col_row_[k]) * col_val_[k];
    } else {
      out = -binv_.col(j - n_);
    }
  }

  void apply_step(int enter, int dir, double t, const Eigen::VectorXd& alpha) {
    if (t == 0.0) return;
    x_[enter] += dir * t;
    for (int i = 0; i < m_; ++i) x_[basis_[i]] -= dir * t * alpha(i);
  }

  void pivot(int leave, int enter, const Eigen::VectorXd& alpha) {
    const double ap = alpha(leave);
    Eigen::RowVectorXd r = binv_.row(leave) / ap;
    Eigen::VectorXd e = alpha;
    e(leave) -= 1.0;
    binv_.noalias() -= e * r;
    basis_[leave] = enter;
    state_[enter] = NonbasicAt::Basic;
  }

  void refactor() {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m_, m_);
    for (int i = 0; i < m_; ++i) {
      const int j = basis_[i];
      if (j < n_) {
        for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) b(col_row_[k], i) = col_val_[k];
      } else {
        b(j - n_, i) = -1.0;
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    binv_ = lu.inverse();
    if (!binv_.allFinite()) throw SolverError("singular simplex basis");
    recompute_basics();
  }

  // x_B = -B^{-1} N x_N, from A x - r = 0.
  void recompute_basics() {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
    for (int j = 0; j < n_ + m_; ++j) {
      if (state_[j] == NonbasicAt::Basic || x_[j] == 0.0) continue;
      if (j < n_) {
        for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) rhs(col_row_[k]) -= col_val_[k] * x_[j];
      } else {
        rhs(j - n_) += x_[j];
      }
    }
    Eigen::VectorXd xb = binv_ * rhs;
    for (int i = 0; i < m_; ++i) x_[basis_[i]] = xb(i);
  }

  SimplexOptions opt_;
  int n_, m_;
  std::vector<int> col_start_, col_row_;
  std::vector<double> col_val_;
  std::vector<double> lb_, ub_, cost_, x_;
  double cost_scale_ = 1.0;
  std::vector<NonbasicAt> state_;
  std::vector<int> basis_;
  Eigen::MatrixXd binv_;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
  const int n = lp.num_vars();
  if (static_cast<int>(lp.lower.size()) != n || static_cast<int>(lp.upper.size()) != n) {
    throw DimensionError("LP bound vectors do not match the variable count");
  }
  for (int j = 0; j < n; ++j) {
    if (lp.lower[j] > lp.upper[j]) {
      LpResult r;
      r.status = LpStatus::Infeasible;
      return r;
    }
  }
  bool infeasible = false;
  auto rows = presolve_rows(lp, infeasible);
  if (infeasible) {
    LpResult r;
    r.status = LpStatus::Infeasible;
    return r;
  }

  LpResult res = Simplex(lp, std::move(rows), options).run();
  if (res.status == LpStatus::Optimal) {
    res.objective = 0.0;
    for (int j = 0; j < n; ++j) res.objective += lp.cost[j] * res.x[j];
    res.row_activity.assign(lp.num_rows(), 0.0);
    for (int i = 0; i < lp.num_rows(); ++i) {
      for (auto [j, a] : lp.rows[i].coeffs) res.row_activity[i] += a * res.x[j];
    }
  }
  return res;
}

}  // namespace gridrisk
