#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "gridrisk/grid.hpp"

namespace gridrisk {

/// Policies for published cases that stray outside the model's invariants.
struct ParseOptions {
  enum class NegativeReactance { Reject, Absolute };
  enum class NegativeLoad { Reject, Zero };
  NegativeReactance negative_reactance = NegativeReactance::Reject;
  NegativeLoad negative_load = NegativeLoad::Reject;
};

/// Parses MATPOWER case text (bus, gen, branch, gencost matrices). Out-of-service
/// generators are dropped; only the linear term of polynomial costs is kept. The
/// result is validated.
Grid parse_case(std::string_view text, const ParseOptions& options = {});

/// Emits MATPOWER text that `parse_case` reads back into an equal Grid. Generator kinds
/// travel in an extra `mpc.gen_kind` row vector that MATPOWER itself ignores.
std::string write_case(const Grid& grid);

nlohmann::json grid_to_json(const Grid& grid);
Grid grid_from_json(const nlohmann::json& doc);

/// Reads a whole file; throws IoError if it cannot be opened.
std::string read_text_file(const std::string& path);

/// Loads `.json` files through grid_from_json and anything else through parse_case.
Grid load_grid_file(const std::string& path, const ParseOptions& options = {});

}  // namespace gridrisk
