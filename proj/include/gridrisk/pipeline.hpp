#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridrisk/config.hpp"
#include "gridrisk/dataset.hpp"
#include "gridrisk/risk.hpp"
#include "gridrisk/surrogate.hpp"

namespace gridrisk {

enum class Engine { Opf, Gnn };
const char* to_string(Engine e);
Engine engine_from_string(const std::string& s);

enum class GenMode { Train, Forecast };
const char* to_string(GenMode m);
GenMode gen_mode_from_string(const std::string& s);

/// File layout of one run directory.
struct RunPaths {
  std::filesystem::path dir;

  std::filesystem::path frozen_config(const std::string& command) const { return dir / ("config_" + command + ".json"); }
  std::filesystem::path dataset(GenMode m) const { return dir / (std::string(to_string(m)) + ".jsonl"); }
  std::filesystem::path model(Head h) const { return dir / ("model_" + std::string(to_string(h)) + ".json"); }
  std::filesystem::path loss_curve(Head h) const { return dir / ("loss_" + std::string(to_string(h)) + ".csv"); }
  std::filesystem::path training(Head h) const { return dir / ("training_" + std::string(to_string(h)) + ".json"); }
  std::filesystem::path report(Engine e) const { return dir / ("report_" + std::string(to_string(e)) + ".json"); }
  std::filesystem::path branches(Engine e) const { return dir / ("branches_" + std::string(to_string(e)) + ".csv"); }
  std::filesystem::path conditional(Engine e) const { return dir / ("conditional_" + std::string(to_string(e)) + ".csv"); }
  /// Wall-clock measurements live apart from the deterministic artifacts.
  std::filesystem::path timing(const std::string& what) const { return dir / ("timing_" + what + ".json"); }
  std::filesystem::path comparison() const { return dir / "comparison.json"; }
  std::filesystem::path sweep() const { return dir / "sweep.csv"; }
  std::filesystem::path bench() const { return dir / "bench.json"; }
};

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// Aggregate dispatch per bus in Grid::dispatchable_buses order.
std::vector<double> bus_dispatch(const Grid& grid, const OpfSolution& sol);

/// QoIs of the successfully solved records.
QoIEnsemble opf_ensemble(const Grid& grid, const std::vector<Record>& records, ZonalReserveMode mode);

struct SurrogateSet {
  std::optional<SurrogateModel> bus;
  SurrogateModel branch;
  SurrogateModel system;
};

QoIEnsemble gnn_ensemble(const Grid& grid, const SurrogateSet& models, const std::vector<Scenario>& scenarios,
                         ZonalReserveMode mode, double* seconds = nullptr);

/// Relative-error statistics of one head on held-out records.
struct MagnitudeBin {
  double lo = 0.0, hi = 0.0;
  int count = 0;
  double mean_rel_error = 0.0;
  double max_rel_error = 0.0;
};

struct HeadEvaluation {
  Head head = Head::System;
  int records = 0;
  std::vector<double> mean_rel_error;  // per output, System head only
  std::vector<int> rel_error_count;    // outputs with |reference| >= 1e-6 that entered the mean
  std::vector<MagnitudeBin> bins;      // [0.1, 1), [1, 10), [10, inf) MW of |reference|
  double mean_abs_error = 0.0;
};

HeadEvaluation evaluate_head(const SurrogateModel& model, const Grid& grid, const Dataset& data,
                             const std::vector<int>& indices);
nlohmann::json evaluation_to_json(const HeadEvaluation& e);

double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct SweepRow {
  double shift = 0.0;
  double distance = 0.0;
  double mape = 0.0;
  int mape_branches = 0;
  double max_scope_error = 0.0;
  int opf_failures = 0;
  std::string status = "ok";
};

struct BenchResult {
  int samples = 0;
  double opf_median_seconds = 0.0;
  double gnn_seconds_per_sample = 0.0;
  double speedup = 0.0;
  int opf_failures = 0;
};

std::string sweep_csv(const std::vector<SweepRow>& rows);

void cmd_info(const Grid& grid, std::ostream& out);
Dataset cmd_gen(const RunConfig& config, GenMode mode, std::ostream& log);
SurrogateModel cmd_train(const RunConfig& config, Head head, std::ostream& log);
RiskReport cmd_assess(const RunConfig& config, Engine engine, std::ostream& log);
ErrorSummary cmd_compare(const std::filesystem::path& reference, const std::filesystem::path& candidate,
                         const std::filesystem::path& out_dir, std::ostream& out);
std::vector<SweepRow> cmd_sweep(const RunConfig& config, std::ostream& log);
BenchResult cmd_bench(const RunConfig& config, std::ostream& log);

}  // namespace gridrisk
