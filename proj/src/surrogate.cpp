#include "gridrisk/surrogate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "gridrisk/distributions.hpp"
#include "gridrisk/errors.hpp"

namespace gridrisk {

const char* to_string(Head head) {
  switch (head) {
    case Head::BusPg: return "bus_pg";
    case Head::BranchPf: return "branch_pf";
    case Head::System: return "system";
  }
  return "?";
}

Head head_from_string(const std::string& s) {
  if (s == "bus_pg") return Head::BusPg;
  if (s == "branch_pf") return Head::BranchPf;
  if (s == "system") return Head::System;
  throw ValidationError("unknown head '" + s + "' (expected bus_pg, branch_pf or system)");
}

const char* to_string(FeatureSet f) { return f == FeatureSet::Local ? "local" : "local+system"; }

FeatureSet feature_set_from_string(const std::string& s) {
  if (s == "local") return FeatureSet::Local;
  if (s == "local+system") return FeatureSet::LocalSystem;
  throw ValidationError("unknown feature set '" + s + "'");
}

int feature_count(FeatureSet f) { return f == FeatureSet::Local ? 6 : 8; }

Affine fit_affine(const std::vector<std::vector<double>>& rows) {
  Affine a;
  if (rows.empty()) return a;
  const std::size_t d = rows.front().size();
  a.mean.assign(d, 0.0);
  a.scale.assign(d, 1.0);
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < d; ++k) a.mean[k] += r[k];
  }
  for (auto& m : a.mean) m /= static_cast<double>(rows.size());
  std::vector<double> var(d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < d; ++k) var[k] += (r[k] - a.mean[k]) * (r[k] - a.mean[k]);
  }
  for (std::size_t k = 0; k < d; ++k) {
    const double sd = std::sqrt(var[k] / static_cast<double>(rows.size()));
    a.scale[k] = sd > 1e-9 * (1.0 + std::abs(a.mean[k])) ? sd : 1.0;
  }
  return a;
}

namespace {

Affine identity_affine(std::size_t d) {
  Affine a;
  a.mean.assign(d, 0.0);
  a.scale.assign(d, 1.0);
  return a;
}

}  // namespace

GraphStructure build_graph(const Grid& grid) {
  GraphStructure g;
  const int n = grid.num_buses();
  g.n = n;
  std::vector<std::set<int>> nbr(n);
  for (const auto& br : grid.branches) {
    if (!br.in_service) continue;
    nbr[br.from_bus].insert(br.to_bus);
    nbr[br.to_bus].insert(br.from_bus);
  }
  std::vector<double> deg(n);
  for (int i = 0; i < n; ++i) {
    nbr[i].insert(i);
    deg[i] = static_cast<double>(nbr[i].size());
  }
  g.row_ptr.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    for (int j : nbr[i]) {
      g.col.push_back(j);
      g.val.push_back(1.0 / std::sqrt(deg[i] * deg[j]));
    }
    g.row_ptr[i + 1] = static_cast<int>(g.col.size());
  }
  g.readout_nodes = grid.dispatchable_buses();
  for (const auto& br : grid.branches) g.readout_edges.emplace_back(br.from_bus, br.to_bus);
  g.static_features = RowMatrix::Zero(n, 4);
  for (const auto& gen : grid.generators) {
    if (!gen.dispatchable()) continue;
    g.static_features(gen.bus, 0) += gen.p_min;
    g.static_features(gen.bus, 1) += gen.p_max;
    g.static_features(gen.bus, 2) += gen.marginal_cost;
  }
  g.static_features(grid.slack_bus(), 3) = 1.0;
  for (int k : grid.wind_generators()) g.wind_bus.push_back(grid.generators[k].bus);
  return g;
}

namespace {

void check_dims(const GraphStructure& g, const Scenario& s) {
  if (static_cast<int>(s.load.size()) != g.n || s.wind.size() != g.wind_bus.size()) {
    throw DimensionError("scenario does not match the grid the model was built for");
  }
}

/// Writes the n x f feature block of one scenario into rows [offset, offset + n).
void fill_features(const GraphStructure& g, FeatureSet fs, const Scenario& s, const Affine* norm, RowMatrix& out,
                   Eigen::Index offset) {
  check_dims(g, s);
  const int f = feature_count(fs);
  double total_load = 0.0, total_wind = 0.0;
  for (double v : s.load) total_load += v;
  for (double v : s.wind) total_wind += v;
  for (int i = 0; i < g.n; ++i) {
    auto row = out.row(offset + i);
    row(0) = s.load[i];
    row(1) = 0.0;
    for (int c = 0; c < 4; ++c) row(2 + c) = g.static_features(i, c);
    if (fs == FeatureSet::LocalSystem) {
      row(6) = total_load;
      row(7) = total_wind;
    }
  }
  for (std::size_t k = 0; k < g.wind_bus.size(); ++k) out(offset + g.wind_bus[k], 1) += s.wind[k];
  if (norm) {
    for (int i = 0; i < g.n; ++i) {
      for (int c = 0; c < f; ++c) out(offset + i, c) = norm->forward(c, out(offset + i, c));
    }
  }
}

/// out = blockdiag(A_hat, ..., A_hat) * in over `batch` stacked samples.
void propagate(const GraphStructure& g, Eigen::Index batch, const RowMatrix& in, RowMatrix& out) {
  out.resize(in.rows(), in.cols());
  const Eigen::Index h = in.cols();
  for (Eigen::Index s = 0; s < batch; ++s) {
    const Eigen::Index base = s * g.n;
    for (int i = 0; i < g.n; ++i) {
      double* dst = out.row(base + i).data();
      std::fill(dst, dst + h, 0.0);
      for (int k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k) {
        const double a = g.val[k];
        const double* src = in.row(base + g.col[k]).data();
        for (Eigen::Index c = 0; c < h; ++c) dst[c] += a * src[c];
      }
    }
  }
}

struct Trace {
  std::array<RowMatrix, 4> H;
  std::array<RowMatrix, 3> Z;
  RowMatrix pooled;
  RowMatrix Y;
};

int items(const GraphStructure& g, Head head) {
  switch (head) {
    case Head::BusPg: return static_cast<int>(g.readout_nodes.size());
    case Head::BranchPf: return static_cast<int>(g.readout_edges.size());
    case Head::System: return 3;
  }
  return 0;
}

void forward_batch(const Parameters& p, Head head, const GraphStructure& g, const RowMatrix& X, Eigen::Index batch,
                   Trace& t) {
  t.H[0] = X;
  RowMatrix u;
  for (int l = 0; l < 3; ++l) {
    u.noalias() = t.H[l] * p.W[l];
    propagate(g, batch, u, t.Z[l]);
    t.Z[l].rowwise() += p.b[l].row(0);
    t.H[l + 1] = t.Z[l].cwiseMax(0.0);
  }
  const RowMatrix& h3 = t.H[3];
  const Eigen::Index hid = h3.cols();
  const int out = items(g, head);
  t.Y.resize(batch, out);
  switch (head) {
    case Head::BusPg: {
      const Eigen::VectorXd v = h3 * p.Wr.col(0);
      for (Eigen::Index s = 0; s < batch; ++s) {
        for (int o = 0; o < out; ++o) t.Y(s, o) = v(s * g.n + g.readout_nodes[o]) + p.br(0, 0);
      }
      break;
    }
    case Head::BranchPf: {
      const Eigen::VectorXd vf = h3 * p.Wr.col(0).head(hid);
      const Eigen::VectorXd vt = h3 * p.Wr.col(0).tail(hid);
      for (Eigen::Index s = 0; s < batch; ++s) {
        for (int o = 0; o < out; ++o) {
          const auto [f, to] = g.readout_edges[o];
          t.Y(s, o) = vf(s * g.n + f) + vt(s * g.n + to) + p.br(0, 0);
        }
      }
      break;
    }
    case Head::System: {
      t.pooled.resize(batch, hid);
      for (Eigen::Index s = 0; s < batch; ++s) {
        t.pooled.row(s) = h3.middleRows(s * g.n, g.n).colwise().mean();
      }
      t.Y.noalias() = t.pooled * p.Wr;
      t.Y.rowwise() += p.br.row(0);
      break;
    }
  }
}

void backward_batch(const Parameters& p, Head head, const GraphStructure& g, Eigen::Index batch, const Trace& t,
                    const RowMatrix& dY, Parameters& grad) {
  const RowMatrix& h3 = t.H[3];
  const Eigen::Index hid = h3.cols();
  const int out = items(g, head);
  RowMatrix dH = RowMatrix::Zero(h3.rows(), hid);
  switch (head) {
    case Head::BusPg: {
      Eigen::VectorXd dv = Eigen::VectorXd::Zero(h3.rows());
      for (Eigen::Index s = 0; s < batch; ++s) {
        for (int o = 0; o < out; ++o) dv(s * g.n + g.readout_nodes[o]) += dY(s, o);
      }
      grad.Wr = h3.transpose() * dv;
      grad.br.resize(1, 1);
      grad.br(0, 0) = dY.sum();
      dH.noalias() = dv * p.Wr.col(0).transpose();
      break;
    }
    case Head::BranchPf: {
      Eigen::VectorXd df = Eigen::VectorXd::Zero(h3.rows()), dt = Eigen::VectorXd::Zero(h3.rows());
      for (Eigen::Index s = 0; s < batch; ++s) {
        for (int o = 0; o < out; ++o) {
          const auto [f, to] = g.readout_edges[o];
          df(s * g.n + f) += dY(s, o);
          dt(s * g.n + to) += dY(s, o);
        }
      }
      grad.Wr.resize(2 * hid, 1);
      grad.Wr.col(0).head(hid) = h3.transpose() * df;
      grad.Wr.col(0).tail(hid) = h3.transpose() * dt;
      grad.br.resize(1, 1);
      grad.br(0, 0) = dY.sum();
      dH.noalias() = df * p.Wr.col(0).head(hid).transpose();
      dH.noalias() += dt * p.Wr.col(0).tail(hid).transpose();
      break;
    }
    case Head::System: {
      grad.Wr.noalias() = t.pooled.transpose() * dY;
      grad.br = dY.colwise().sum();
      const RowMatrix dP = dY * p.Wr.transpose();
      const double inv = 1.0 / g.n;
      for (Eigen::Index s = 0; s < batch; ++s) {
        dH.middleRows(s * g.n, g.n).rowwise() = dP.row(s) * inv;
      }
      break;
    }
  }
  RowMatrix dZ, dU;
  for (int l = 2; l >= 0; --l) {
    dZ = dH.cwiseProduct((t.Z[l].array() > 0.0).cast<double>().matrix());
    grad.b[l] = dZ.colwise().sum();
    propagate(g, batch, dZ, dU);  // A_hat is symmetric
    grad.W[l].noalias() = t.H[l].transpose() * dU;
    if (l > 0) dH.noalias() = dU * p.W[l].transpose();
  }
}

/// Signed bound violation: its square is the penalty and has derivative 2 * value.
inline double bound_excess(double y, double lo, double hi) {
  if (y > hi) return y - hi;
  if (y < lo) return y - lo;
  return 0.0;
}

}  // namespace

std::vector<RowMatrix*> Parameters::blocks() {
  return {&W[0], &W[1], &W[2], &b[0], &b[1], &b[2], &Wr, &br};
}

std::vector<const RowMatrix*> Parameters::blocks() const {
  return {&W[0], &W[1], &W[2], &b[0], &b[1], &b[2], &Wr, &br};
}

std::size_t Parameters::size() const {
  std::size_t s = 0;
  for (const auto* b : blocks()) s += static_cast<std::size_t>(b->size());
  return s;
}

GraphEncoding encode(const Grid& grid, const Scenario& scenario, FeatureSet features, const Affine* norm) {
  const GraphStructure g = build_graph(grid);
  GraphEncoding enc;
  enc.normalized_adjacency = Eigen::MatrixXd::Zero(g.n, g.n);
  for (int i = 0; i < g.n; ++i) {
    for (int k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k) enc.normalized_adjacency(i, g.col[k]) = g.val[k];
  }
  enc.node_features.resize(g.n, feature_count(features));
  fill_features(g, features, scenario, norm, enc.node_features, 0);
  return enc;
}

int head_outputs(const Grid& grid, Head head) {
  switch (head) {
    case Head::BusPg: return static_cast<int>(grid.dispatchable_buses().size());
    case Head::BranchPf: return grid.num_branches();
    case Head::System: return 3;
  }
  return 0;
}

void head_bounds(const Grid& grid, Head head, std::vector<double>& lower, std::vector<double>& upper) {
  lower.clear();
  upper.clear();
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (head) {
    case Head::BusPg: {
      const auto buses = grid.dispatchable_buses();
      std::vector<int> slot(grid.num_buses(), -1);
      for (std::size_t k = 0; k < buses.size(); ++k) slot[buses[k]] = static_cast<int>(k);
      lower.assign(buses.size(), 0.0);
      upper.assign(buses.size(), 0.0);
      for (const auto& gen : grid.generators) {
        if (!gen.dispatchable()) continue;
        lower[slot[gen.bus]] += gen.p_min;
        upper[slot[gen.bus]] += gen.p_max;
      }
      break;
    }
    case Head::BranchPf:
      for (const auto& br : grid.branches) {
        lower.push_back(-br.flow_limit);
        upper.push_back(br.flow_limit);
      }
      break;
    case Head::System:
      lower = {0.0, 0.0, -inf};
      upper = {inf, inf, inf};
      break;
  }
}

std::vector<double> head_targets(const Grid& grid, Head head, const Record& record) {
  if (!record.ok()) throw ValidationError("record " + std::to_string(record.index) + " has no OPF solution");
  switch (head) {
    case Head::BusPg: {
      const auto buses = grid.dispatchable_buses();
      std::vector<int> slot(grid.num_buses(), -1);
      for (std::size_t k = 0; k < buses.size(); ++k) slot[buses[k]] = static_cast<int>(k);
      const auto disp = grid.dispatchable_generators();
      if (record.solution.dispatch.size() != disp.size()) throw DimensionError("record dispatch does not match the grid");
      std::vector<double> t(buses.size(), 0.0);
      for (std::size_t k = 0; k < disp.size(); ++k) t[slot[grid.generators[disp[k]].bus]] += record.solution.dispatch[k];
      return t;
    }
    case Head::BranchPf:
      if (static_cast<int>(record.solution.flows.size()) != grid.num_branches()) {
        throw DimensionError("record flows do not match the grid");
      }
      return record.solution.flows;
    case Head::System:
      return {record.qois.reserve, record.qois.shedding, record.qois.total_cost};
  }
  return {};
}

SurrogateModel init_model(const Grid& grid, Head head, FeatureSet features, int hidden, std::uint64_t seed) {
  if (hidden < 1) throw ValidationError("hidden width must be positive");
  SurrogateModel m;
  m.head = head;
  m.features = features;
  m.hidden = hidden;
  head_bounds(grid, head, m.lower, m.upper);
  m.grid_hash = grid_hash(grid);
  const int f = feature_count(features);
  Rng rng(seed);
  auto glorot = [&rng](RowMatrix& w, Eigen::Index rows, Eigen::Index cols) {
    w.resize(rows, cols);
    const double lim = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-lim, lim);
    }
  };
  glorot(m.params.W[0], f, hidden);
  glorot(m.params.W[1], hidden, hidden);
  glorot(m.params.W[2], hidden, hidden);
  for (auto& b : m.params.b) b = RowMatrix::Zero(1, hidden);
  switch (head) {
    case Head::BusPg: glorot(m.params.Wr, hidden, 1); m.params.br = RowMatrix::Zero(1, 1); break;
    case Head::BranchPf: glorot(m.params.Wr, 2 * hidden, 1); m.params.br = RowMatrix::Zero(1, 1); break;
    case Head::System: glorot(m.params.Wr, hidden, 3); m.params.br = RowMatrix::Zero(1, 3); break;
  }
  m.feature_norm = identity_affine(f);
  m.target_norm = identity_affine(m.lower.size());
  return m;
}

std::vector<double> forward(const SurrogateModel& model, const GraphStructure& graph, const GraphEncoding& enc) {
  if (enc.node_features.rows() != graph.n || enc.node_features.cols() != feature_count(model.features)) {
    throw DimensionError("encoding does not match the model");
  }
  Trace t;
  forward_batch(model.params, model.head, graph, enc.node_features, 1, t);
  if (t.Y.cols() != model.num_outputs()) throw DimensionError("model output count does not match the grid");
  std::vector<double> out(t.Y.cols());
  for (Eigen::Index o = 0; o < t.Y.cols(); ++o) out[o] = model.target_norm.inverse(o, t.Y(0, o));
  return out;
}

LossValue loss(const std::vector<double>& pred, const std::vector<double>& target, const std::vector<double>& lower,
               const std::vector<double>& upper, double w1, double w2) {
  if (pred.size() != target.size() || pred.size() != lower.size() || pred.size() != upper.size()) {
    throw DimensionError("loss inputs differ in length");
  }
  LossValue v;
  if (pred.empty()) return v;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    const double z = bound_excess(pred[i], lower[i], upper[i]);
    v.mse += e * e;
    v.penalty += z * z;
  }
  v.mse /= static_cast<double>(pred.size());
  v.penalty /= static_cast<double>(pred.size());
  v.total = w1 * v.mse + w2 * v.penalty;
  return v;
}

LossValue batch_loss(const SurrogateModel& model, const GraphStructure& graph, const RowMatrix& features,
                     const RowMatrix& targets, double w1, double w2, Parameters* grad) {
  const Eigen::Index batch = targets.rows();
  if (features.rows() != batch * graph.n) throw DimensionError("feature rows do not match the batch");
  Trace t;
  forward_batch(model.params, model.head, graph, features, batch, t);
  const Eigen::Index out = t.Y.cols();
  if (targets.cols() != out) throw DimensionError("target columns do not match the model outputs");

  std::vector<double> lo(out), hi(out);
  for (Eigen::Index o = 0; o < out; ++o) {
    lo[o] = model.target_norm.forward(o, model.lower[o]);
    hi[o] = model.target_norm.forward(o, model.upper[o]);
  }
  LossValue v;
  RowMatrix dY(batch, out);
  const double count = static_cast<double>(batch * out);
  for (Eigen::Index s = 0; s < batch; ++s) {
    for (Eigen::Index o = 0; o < out; ++o) {
      const double y = t.Y(s, o);
      const double e = y - targets(s, o);
      const double z = bound_excess(y, lo[o], hi[o]);
      v.mse += e * e;
      v.penalty += z * z;
      dY(s, o) = 2.0 * (w1 * e + w2 * z) / count;
    }
  }
  v.mse /= count;
  v.penalty /= count;
  v.total = w1 * v.mse + w2 * v.penalty;
  if (grad) backward_batch(model.params, model.head, graph, batch, t, dY, *grad);
  return v;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (batch_size < 1) throw ValidationError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ValidationError("lr_decay must lie in (0, 1]");
  if (!(w1 >= 0.0 && w2 >= 0.0) || std::abs(w1 + w2 - 1.0) > 1e-12) {
    throw ValidationError("loss weights must be non-negative and sum to 1");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ValidationError("validation_fraction must lie in [0, 1)");
  }
  if (hidden < 1) throw ValidationError("hidden width must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},         {"batch_size", batch_size},
          {"learning_rate", learning_rate}, {"lr_decay", lr_decay},
          {"w1", w1},                 {"w2", w2},
          {"seed", seed},             {"validation_fraction", validation_fraction},
          {"hidden", hidden},         {"features", to_string(features)},
          {"restore_best", restore_best}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.w1 = j.value("w1", c.w1);
  c.w2 = j.value("w2", c.w2);
  c.seed = j.value("seed", c.seed);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.hidden = j.value("hidden", c.hidden);
  c.features = feature_set_from_string(j.value("features", std::string(to_string(c.features))));
  c.restore_best = j.value("restore_best", c.restore_best);
  c.validate();
  return c;
}

namespace {

struct Tensors {
  RowMatrix X;  // stacked normalized features
  RowMatrix T;  // normalized targets
};

Tensors build_tensors(const Grid& grid, const GraphStructure& g, const SurrogateModel& m, const Dataset& data,
                      const std::vector<int>& idx) {
  const int f = feature_count(m.features);
  Tensors t;
  t.X.resize(static_cast<Eigen::Index>(idx.size()) * g.n, f);
  t.T.resize(static_cast<Eigen::Index>(idx.size()), m.num_outputs());
  for (std::size_t s = 0; s < idx.size(); ++s) {
    const Record& r = data.records[idx[s]];
    fill_features(g, m.features, r.scenario, &m.feature_norm, t.X, static_cast<Eigen::Index>(s) * g.n);
    const auto y = head_targets(grid, m.head, r);
    for (int o = 0; o < m.num_outputs(); ++o) t.T(s, o) = m.target_norm.forward(o, y[o]);
  }
  return t;
}

double evaluate(const SurrogateModel& m, const GraphStructure& g, const Tensors& t, const TrainConfig& c) {
  const Eigen::Index n = t.T.rows();
  if (n == 0) return 0.0;
  constexpr Eigen::Index chunk = 128;
  double total = 0.0;
  for (Eigen::Index s = 0; s < n; s += chunk) {
    const Eigen::Index b = std::min(chunk, n - s);
    const LossValue v = batch_loss(m, g, t.X.middleRows(s * g.n, b * g.n), t.T.middleRows(s, b), c.w1, c.w2, nullptr);
    total += v.total * static_cast<double>(b);
  }
  return total / static_cast<double>(n);
}

}  // namespace

SurrogateModel train(const Grid& grid, const Dataset& data, const std::vector<int>& indices, Head head,
                     const TrainConfig& config, TrainingReport* report) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<int> usable;
  for (int i : indices) {
    if (i < 0 || i >= static_cast<int>(data.records.size())) throw LookupError("training index out of range");
    if (data.records[i].ok()) usable.push_back(i);
  }
  if (usable.empty()) throw TrainingError("no labeled records to train on");

  const int n_val = static_cast<int>(std::floor(config.validation_fraction * static_cast<double>(usable.size())));
  const std::vector<int> train_idx(usable.begin(), usable.end() - n_val);
  const std::vector<int> val_idx(usable.end() - n_val, usable.end());
  if (train_idx.empty()) throw TrainingError("validation split leaves no training records");

  SurrogateModel model = init_model(grid, head, config.features, config.hidden, config.seed);
  const GraphStructure g = build_graph(grid);

  {
    const int f = feature_count(config.features);
    std::vector<std::vector<double>> feature_rows;
    std::vector<std::vector<double>> target_rows;
    RowMatrix block(g.n, f);
    for (int i : train_idx) {
      fill_features(g, config.features, data.records[i].scenario, nullptr, block, 0);
      for (int r = 0; r < g.n; ++r) feature_rows.emplace_back(block.row(r).data(), block.row(r).data() + f);
      target_rows.push_back(head_targets(grid, head, data.records[i]));
    }
    model.feature_norm = fit_affine(feature_rows);
    model.target_norm = fit_affine(target_rows);
  }

  const Tensors tr = build_tensors(grid, g, model, data, train_idx);
  const Tensors va = build_tensors(grid, g, model, data, val_idx);

  std::vector<RowMatrix*> params = model.params.blocks();
  std::vector<RowMatrix> m1, m2;
  for (auto* p : params) {
    m1.push_back(RowMatrix::Zero(p->rows(), p->cols()));
    m2.push_back(RowMatrix::Zero(p->rows(), p->cols()));
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double b1t = 1.0, b2t = 1.0;

  Rng rng(derive_seed(config.seed, 1));
  std::vector<int> order(train_idx.size());
  std::iota(order.begin(), order.end(), 0);
  const int f = feature_count(config.features);
  const int outs = model.num_outputs();
  RowMatrix bx, bt;
  Parameters grad;

  TrainingReport rep;
  rep.train_records = static_cast<int>(train_idx.size());
  rep.validation_records = static_cast<int>(val_idx.size());
  Parameters best = model.params;
  double best_val = std::numeric_limits<double>::infinity();
  double lr = config.learning_rate;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double running = 0.0;
    for (std::size_t start_i = 0; start_i < order.size(); start_i += config.batch_size) {
      const std::size_t b = std::min<std::size_t>(config.batch_size, order.size() - start_i);
      bx.resize(static_cast<Eigen::Index>(b) * g.n, f);
      bt.resize(static_cast<Eigen::Index>(b), outs);
      for (std::size_t s = 0; s < b; ++s) {
        const int src = order[start_i + s];
        bx.middleRows(static_cast<Eigen::Index>(s) * g.n, g.n) = tr.X.middleRows(static_cast<Eigen::Index>(src) * g.n, g.n);
        bt.row(s) = tr.T.row(src);
      }
      const LossValue v = batch_loss(model, g, bx, bt, config.w1, config.w2, &grad);
      if (!std::isfinite(v.total)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " (head " + to_string(head) + ")");
      }
      running += v.total * static_cast<double>(b);

      b1t *= beta1;
      b2t *= beta2;
      const std::vector<RowMatrix*> gb = grad.blocks();
      for (std::size_t k = 0; k < params.size(); ++k) {
        m1[k] = beta1 * m1[k] + (1.0 - beta1) * *gb[k];
        m2[k] = beta2 * m2[k] + (1.0 - beta2) * gb[k]->cwiseProduct(*gb[k]);
        params[k]->array() -= lr * (m1[k].array() / (1.0 - b1t)) / ((m2[k].array() / (1.0 - b2t)).sqrt() + eps);
      }
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = running / static_cast<double>(order.size());
    st.validation_loss = val_idx.empty() ? st.train_loss : evaluate(model, g, va, config);
    if (!std::isfinite(st.validation_loss)) throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    if (st.validation_loss < best_val) {
      best_val = st.validation_loss;
      best = model.params;
      rep.best_epoch = epoch;
    }
    rep.curve.push_back(st);
    lr *= config.lr_decay;
  }
  if (config.restore_best && config.epochs > 0) model.params = best;

  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  model.manifest = {{"train_config", config.to_json()},
                    {"dataset", {{"sampler", data.provenance.sampler},
                                 {"seed", data.provenance.seed},
                                 {"grid_hash", data.provenance.grid_hash}}},
                    {"train_records", rep.train_records},
                    {"validation_records", rep.validation_records},
                    {"best_epoch", rep.best_epoch}};
  if (report) *report = std::move(rep);
  return model;
}

BatchPrediction predict_batch(const SurrogateModel& model, const Grid& grid, const std::vector<Scenario>& scenarios) {
  const auto start = std::chrono::steady_clock::now();
  BatchPrediction out;
  if (head_outputs(grid, model.head) != model.num_outputs()) throw DimensionError("model does not match the grid");
  if (!model.grid_hash.empty() && model.grid_hash != grid_hash(grid)) {
    throw ValidationError("model was trained on a different grid (hash " + model.grid_hash + ")");
  }
  out.values.reserve(scenarios.size());
  if (!scenarios.empty()) {
    const GraphStructure g = build_graph(grid);
    const int f = feature_count(model.features);
    constexpr std::size_t chunk = 256;
    RowMatrix x;
    Trace t;
    for (std::size_t s0 = 0; s0 < scenarios.size(); s0 += chunk) {
      const std::size_t b = std::min(chunk, scenarios.size() - s0);
      x.resize(static_cast<Eigen::Index>(b) * g.n, f);
      for (std::size_t s = 0; s < b; ++s) {
        fill_features(g, model.features, scenarios[s0 + s], &model.feature_norm, x, static_cast<Eigen::Index>(s) * g.n);
      }
      forward_batch(model.params, model.head, g, x, static_cast<Eigen::Index>(b), t);
      for (std::size_t s = 0; s < b; ++s) {
        std::vector<double> v(t.Y.cols());
        for (Eigen::Index o = 0; o < t.Y.cols(); ++o) v[o] = model.target_norm.inverse(o, t.Y(s, o));
        out.values.push_back(std::move(v));
      }
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

namespace {

nlohmann::json matrix_json(const RowMatrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

RowMatrix matrix_from(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ParseError("model matrix has the wrong element count");
  RowMatrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

nlohmann::json bounds_json(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) {
    if (std::isfinite(x)) a.push_back(x);
    else a.push_back(x > 0 ? "inf" : "-inf");
  }
  return a;
}

std::vector<double> bounds_from(const nlohmann::json& j) {
  std::vector<double> v;
  for (const auto& x : j) {
    if (x.is_string()) {
      const auto s = x.get<std::string>();
      if (s == "inf") v.push_back(std::numeric_limits<double>::infinity());
      else if (s == "-inf") v.push_back(-std::numeric_limits<double>::infinity());
      else throw ParseError("bad bound value '" + s + "'");
    } else {
      v.push_back(x.get<double>());
    }
  }
  return v;
}

nlohmann::json affine_json(const Affine& a) { return {{"mean", a.mean}, {"scale", a.scale}}; }
Affine affine_from(const nlohmann::json& j) {
  return Affine{j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
}

}  // namespace

nlohmann::json model_to_json(const SurrogateModel& m) {
  nlohmann::json w = nlohmann::json::array();
  for (const auto* b : m.params.blocks()) w.push_back(matrix_json(*b));
  return {{"format", "gridrisk-model"},
          {"version", SurrogateModel::kVersion},
          {"head", to_string(m.head)},
          {"features", to_string(m.features)},
          {"num_features", feature_count(m.features)},
          {"hidden", m.hidden},
          {"outputs", m.num_outputs()},
          {"parameters", w},
          {"lower", bounds_json(m.lower)},
          {"upper", bounds_json(m.upper)},
          {"feature_norm", affine_json(m.feature_norm)},
          {"target_norm", affine_json(m.target_norm)},
          {"grid_hash", m.grid_hash},
          {"manifest", m.manifest}};
}

SurrogateModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "gridrisk-model") throw ParseError("not a model document");
    const int version = j.at("version").get<int>();
    if (version != SurrogateModel::kVersion) throw ParseError("unsupported model version " + std::to_string(version));
    SurrogateModel m;
    m.head = head_from_string(j.at("head").get<std::string>());
    m.features = feature_set_from_string(j.at("features").get<std::string>());
    m.hidden = j.at("hidden").get<int>();
    const auto& w = j.at("parameters");
    auto blocks = m.params.blocks();
    if (w.size() != blocks.size()) throw ParseError("model has the wrong number of parameter blocks");
    for (std::size_t k = 0; k < blocks.size(); ++k) *blocks[k] = matrix_from(w.at(k));
    m.lower = bounds_from(j.at("lower"));
    m.upper = bounds_from(j.at("upper"));
    m.feature_norm = affine_from(j.at("feature_norm"));
    m.target_norm = affine_from(j.at("target_norm"));
    m.grid_hash = j.value("grid_hash", "");
    m.manifest = j.value("manifest", nlohmann::json::object());

    const int f = feature_count(m.features);
    const auto& p = m.params;
    const Eigen::Index h = m.hidden;
    const Eigen::Index rin = m.head == Head::BranchPf ? 2 * h : h;
    const Eigen::Index rout = m.head == Head::System ? 3 : 1;
    bool ok = p.W[0].rows() == f && p.W[0].cols() == h;
    for (int l = 1; l < 3; ++l) ok = ok && p.W[l].rows() == h && p.W[l].cols() == h;
    for (int l = 0; l < 3; ++l) ok = ok && p.b[l].rows() == 1 && p.b[l].cols() == h;
    ok = ok && p.Wr.rows() == rin && p.Wr.cols() == rout && p.br.rows() == 1 && p.br.cols() == rout;
    ok = ok && m.upper.size() == m.lower.size() && m.target_norm.mean.size() == m.lower.size() &&
         m.target_norm.scale.size() == m.lower.size() && static_cast<int>(m.feature_norm.mean.size()) == f &&
         static_cast<int>(m.feature_norm.scale.size()) == f;
    if (!ok) throw ParseError("model dimensions are inconsistent");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model JSON: ") + e.what());
  }
}

void save_model(const SurrogateModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model '" + path + "'");
  out << model_to_json(model).dump() << '\n';
  if (!out) throw IoError("failed writing model '" + path + "'");
}

SurrogateModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model JSON: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace gridrisk
