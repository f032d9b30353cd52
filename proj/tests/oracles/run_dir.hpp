#pragma once

// Helpers for running the pipeline in a scratch directory and comparing its artifacts.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace oracle {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / ("gridrisk_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// File name -> bytes for every artifact that must be reproducible. Wall-clock output
/// (timing_*.json and bench.json) is left out.
inline std::map<std::string, std::string> artifacts(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("timing_", 0) == 0 || name == "bench.json") continue;
    out[name] = slurp(e.path());
  }
  return out;
}

}  // namespace oracle
