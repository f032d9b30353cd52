#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gridrisk/dataset.hpp"
#include "gridrisk/dcopf.hpp"
#include "gridrisk/grid.hpp"

namespace gridrisk {

/// Which grid quantities a model predicts.
///   BusPg    - total dispatch at each bus hosting dispatchable units (Grid::dispatchable_buses order)
///   BranchPf - flow on every branch, from -> to
///   System   - [reserve, shedding, total_cost]
enum class Head { BusPg, BranchPf, System };
const char* to_string(Head head);
Head head_from_string(const std::string& s);

/// Node feature layout. Local is [load, wind, p_min, p_max, cost, is_slack] per bus;
/// LocalSystem appends the system totals of load and wind to every node.
enum class FeatureSet { Local, LocalSystem };
const char* to_string(FeatureSet f);
FeatureSet feature_set_from_string(const std::string& s);
int feature_count(FeatureSet f);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-column affine map z = (x - mean) / scale.
struct Affine {
  std::vector<double> mean;
  std::vector<double> scale;

  double forward(std::size_t k, double x) const { return (x - mean[k]) / scale[k]; }
  double inverse(std::size_t k, double z) const { return z * scale[k] + mean[k]; }
  bool operator==(const Affine&) const = default;
};

/// z-score statistics of the columns of `rows`; near-constant columns get scale 1.
Affine fit_affine(const std::vector<std::vector<double>>& rows);

struct GraphEncoding {
  Eigen::MatrixXd normalized_adjacency;  // D^-1/2 (A + I) D^-1/2
  RowMatrix node_features;               // n x f
};

/// Raw (unnormalized) features unless `norm` is given.
GraphEncoding encode(const Grid& grid, const Scenario& scenario, FeatureSet features = FeatureSet::Local,
                     const Affine* norm = nullptr);

/// Static graph data shared by every sample of one grid.
struct GraphStructure {
  int n = 0;
  std::vector<int> row_ptr, col;  // normalized adjacency in CSR form
  std::vector<double> val;
  std::vector<int> readout_nodes;                  // BusPg
  std::vector<std::pair<int, int>> readout_edges;  // BranchPf
  RowMatrix static_features;                       // n x 4: p_min, p_max, cost, is_slack
  std::vector<int> wind_bus;                       // bus of each wind unit
};

GraphStructure build_graph(const Grid& grid);

struct Parameters {
  std::array<RowMatrix, 3> W;
  std::array<RowMatrix, 3> b;  // 1 x hidden
  RowMatrix Wr;                // readout
  RowMatrix br;                // 1 x outputs-per-item

  std::vector<RowMatrix*> blocks();
  std::vector<const RowMatrix*> blocks() const;
  std::size_t size() const;
  bool operator==(const Parameters&) const = default;
};

struct SurrogateModel {
  static constexpr int kVersion = 1;

  Head head = Head::System;
  FeatureSet features = FeatureSet::Local;
  int hidden = 64;
  Parameters params;
  std::vector<double> lower, upper;  // physical bounds per output for the penalty term
  Affine feature_norm;
  Affine target_norm;
  std::string grid_hash;
  nlohmann::json manifest;

  int num_outputs() const { return static_cast<int>(lower.size()); }
  bool operator==(const SurrogateModel&) const = default;
};

/// Output count and per-output bounds of a head on a grid.
int head_outputs(const Grid& grid, Head head);
void head_bounds(const Grid& grid, Head head, std::vector<double>& lower, std::vector<double>& upper);

/// Targets of one labeled record in physical units.
std::vector<double> head_targets(const Grid& grid, Head head, const Record& record);

/// Fresh model with Glorot-uniform weights and zero biases; identity normalizations.
SurrogateModel init_model(const Grid& grid, Head head, FeatureSet features, int hidden, std::uint64_t seed);

/// Prediction in physical units for one encoded sample (normalized features).
std::vector<double> forward(const SurrogateModel& model, const GraphStructure& graph, const GraphEncoding& enc);

struct LossValue {
  double total = 0.0;
  double mse = 0.0;      // L_E
  double penalty = 0.0;  // L_IE
};

/// Weighted MSE plus squared-hinge bound penalty, averaged over elements.
LossValue loss(const std::vector<double>& pred, const std::vector<double>& target, const std::vector<double>& lower,
               const std::vector<double>& upper, double w1 = 0.5, double w2 = 0.5);

/// Loss on the normalized scale for a batch of samples. `features` stacks the n x f
/// normalized blocks of all samples; `targets` is batch x outputs, normalized.
LossValue batch_loss(const SurrogateModel& model, const GraphStructure& graph, const RowMatrix& features,
                     const RowMatrix& targets, double w1, double w2, Parameters* grad = nullptr);

struct TrainConfig {
  int epochs = 500;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double lr_decay = 1.0;  // multiplicative, per epoch
  double w1 = 0.5;
  double w2 = 0.5;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  int hidden = 64;
  FeatureSet features = FeatureSet::Local;
  bool restore_best = true;  // keep the parameters with the lowest validation loss

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainingReport {
  std::vector<EpochStats> curve;
  int best_epoch = 0;
  double seconds = 0.0;
  int train_records = 0;
  int validation_records = 0;
};

/// Trains on the successfully labeled records among `indices`.
SurrogateModel train(const Grid& grid, const Dataset& data, const std::vector<int>& indices, Head head,
                     const TrainConfig& config, TrainingReport* report = nullptr);

struct BatchPrediction {
  std::vector<std::vector<double>> values;  // per scenario, physical units
  double seconds = 0.0;                     // wall-clock of the whole call
};

BatchPrediction predict_batch(const SurrogateModel& model, const Grid& grid, const std::vector<Scenario>& scenarios);

nlohmann::json model_to_json(const SurrogateModel& model);
SurrogateModel model_from_json(const nlohmann::json& j);
void save_model(const SurrogateModel& model, const std::string& path);
SurrogateModel load_model(const std::string& path);

}  // namespace gridrisk
