#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridrisk/dcopf.hpp"
#include "gridrisk/scenario.hpp"

namespace gridrisk {

/// Either the uncorrelated training box or the zonal copula forecast.
struct SamplerSpec {
  enum class Kind { Uniform, Copula };
  Kind kind = Kind::Uniform;
  TrainingBounds bounds;  // Uniform
  CopulaSpec copula;      // Copula
  PowerCurve curve;       // Copula

  nlohmann::json to_json() const;
  static SamplerSpec from_json(const nlohmann::json& j);
};

std::vector<Scenario> draw_scenarios(const Grid& grid, const SamplerSpec& sampler, int n, std::uint64_t seed);

struct Record {
  int index = 0;
  Scenario scenario;
  OpfSolution solution;
  SystemQoIs qois;
  std::string error;  // solver diagnostic when the solve failed

  bool ok() const noexcept { return solution.status != OpfStatus::Infeasible && error.empty(); }
  bool operator==(const Record&) const = default;
};

struct Provenance {
  nlohmann::json sampler;
  std::uint64_t seed = 0;
  int count = 0;
  std::string grid_name;
  std::string grid_hash;

  bool operator==(const Provenance&) const = default;
};

struct Dataset {
  Provenance provenance;
  std::vector<Record> records;

  int failures() const;
  bool operator==(const Dataset&) const = default;
};

/// Labels every scenario with its DC OPF solution. Failed solves stay in the dataset
/// with status infeasible and the solver's message.
std::vector<Record> label_scenarios(const Grid& grid, const std::vector<Scenario>& scenarios,
                                    const DcopfOptions& options = {});

Dataset generate_dataset(const Grid& grid, const SamplerSpec& sampler, int n, std::uint64_t seed,
                         const DcopfOptions& options = {});

/// First round(fraction * n) indices for training, the rest for testing.
struct Split {
  std::vector<int> train;
  std::vector<int> test;
};
Split split_indices(int n, double train_fraction);

nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json solution_to_json(const OpfSolution& s);
OpfSolution solution_from_json(const nlohmann::json& j);
nlohmann::json qois_to_json(const SystemQoIs& q);
SystemQoIs qois_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const Record& r);
Record record_from_json(const nlohmann::json& j);

/// Manifest path that accompanies a dataset file: `runs/x.jsonl` -> `runs/x.manifest.json`.
std::string manifest_path(const std::string& dataset_path);

/// Writes the JSON-lines records and the sidecar manifest.
void write_dataset(const Dataset& ds, const std::string& path);
/// Reads a dataset; a malformed line raises ParseError naming its line number.
Dataset read_dataset(const std::string& path);

}  // namespace gridrisk
