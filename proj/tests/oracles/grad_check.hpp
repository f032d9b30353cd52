#pragma once

// Central finite differences against the analytic gradient of batch_loss.

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "gridrisk/surrogate.hpp"

namespace oracle {

struct GradCheck {
  double max_rel_error = 0.0;
  long checked = 0;
  long kinks = 0;  // entries skipped because a ReLU or hinge kink lies inside the stencil
};

/// Compares every parameter of `model` on one batch. An entry counts as a kink when the
/// two one-sided differences disagree by more than the tolerance; the central
/// difference is meaningless there.
inline GradCheck check_gradients(const gridrisk::SurrogateModel& model, const gridrisk::GraphStructure& graph,
                                 const gridrisk::RowMatrix& X, const gridrisk::RowMatrix& Y, double w1, double w2,
                                 double h = 1e-4, double tol = 1e-4) {
  using gridrisk::RowMatrix;
  GradCheck out;
  gridrisk::Parameters grad;
  const double f0 = gridrisk::batch_loss(model, graph, X, Y, w1, w2, &grad).total;
  gridrisk::SurrogateModel m = model;
  auto pb = m.params.blocks();
  auto gb = grad.blocks();
  for (std::size_t k = 0; k < pb.size(); ++k) {
    RowMatrix& p = *pb[k];
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double orig = p.data()[i];
      p.data()[i] = orig + h;
      const double fp = gridrisk::batch_loss(m, graph, X, Y, w1, w2).total;
      p.data()[i] = orig - h;
      const double fm = gridrisk::batch_loss(m, graph, X, Y, w1, w2).total;
      p.data()[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double right = (fp - f0) / h, left = (f0 - fm) / h;
      const double g = gb[k]->data()[i];
      const double scale = std::max({std::abs(g), std::abs(fd), 1e-6});
      if (std::abs(right - left) > 1e3 * h * scale + 1e-9) {
        // curvature this large at h means a kink, not smooth second-order error
        ++out.kinks;
        continue;
      }
      out.max_rel_error = std::max(out.max_rel_error, std::abs(g - fd) / scale);
      ++out.checked;
    }
  }
  return out;
}

/// Random 3-bus instance for one head: random weights, normalized features and targets,
/// and tight bounds so the penalty branch is exercised.
struct ToyProblem {
  gridrisk::Grid grid;
  gridrisk::GraphStructure graph;
  gridrisk::SurrogateModel model;
  gridrisk::RowMatrix X, Y;
};

inline ToyProblem toy_problem(gridrisk::Head head, std::uint64_t seed, int hidden = 6, int batch = 3) {
  using namespace gridrisk;
  ToyProblem t;
  t.grid = fixtures::three_bus();
  t.grid.generators.push_back({2, 0.0, 40.0, 0.0, GenKind::Wind});
  t.graph = build_graph(t.grid);
  t.model = init_model(t.grid, head, FeatureSet::LocalSystem, hidden, seed);
  std::mt19937_64 rng(seed * 7919 + 1);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (auto* b : t.model.params.blocks()) {
    for (Eigen::Index i = 0; i < b->size(); ++i) b->data()[i] = 0.8 * nd(rng);
  }
  const int f = feature_count(FeatureSet::LocalSystem);
  const int out = head_outputs(t.grid, head);
  t.X.resize(batch * t.graph.n, f);
  for (Eigen::Index i = 0; i < t.X.size(); ++i) t.X.data()[i] = nd(rng);
  t.Y.resize(batch, out);
  for (Eigen::Index i = 0; i < t.Y.size(); ++i) t.Y.data()[i] = nd(rng);
  t.model.lower.assign(out, -0.3);
  t.model.upper.assign(out, 0.3);
  return t;
}

}  // namespace oracle
