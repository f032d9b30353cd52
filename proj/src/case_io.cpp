#include "gridrisk/case_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "gridrisk/errors.hpp"

namespace gridrisk {
namespace {

struct Row {
  int line = 0;
  std::vector<double> values;
};

struct Matrix {
  int line = 0;  // line of the assignment
  std::vector<Row> rows;
};

struct RawCase {
  std::string name;
  std::optional<double> base_mva;
  std::map<std::string, Matrix> matrices;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_comment(std::string_view line) {
  bool in_quote = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\'') in_quote = !in_quote;
    if (line[i] == '%' && !in_quote) return line.substr(0, i);
  }
  return line;
}

double parse_number(std::string_view token, int line) {
  std::string buf(token);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end == buf.c_str() || *end != '\0') {
    throw ParseError("invalid numeric token '" + buf + "'", line);
  }
  return v;
}

void append_tokens(std::string_view chunk, int line, Row& row) {
  std::size_t i = 0;
  while (i < chunk.size()) {
    while (i < chunk.size() && (std::isspace(static_cast<unsigned char>(chunk[i])) || chunk[i] == ',')) ++i;
    std::size_t j = i;
    while (j < chunk.size() && !std::isspace(static_cast<unsigned char>(chunk[j])) && chunk[j] != ',') ++j;
    if (j > i) row.values.push_back(parse_number(chunk.substr(i, j - i), line));
    i = j;
  }
}

RawCase scan(std::string_view text) {
  RawCase raw;
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= text.size();) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }

  Matrix* open = nullptr;
  std::string open_name;
  Row pending;
  auto flush_row = [&](int line) {
    if (!pending.values.empty()) {
      pending.line = pending.line ? pending.line : line;
      open->rows.push_back(std::move(pending));
    }
    pending = Row{};
  };

  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int line_no = static_cast<int>(li) + 1;
    std::string_view line = trim(strip_comment(lines[li]));
    if (line.empty()) continue;

    if (!open) {
      if (line.rfind("function", 0) == 0) {
        auto eq = line.find('=');
        if (eq != std::string_view::npos) raw.name = std::string(trim(line.substr(eq + 1)));
        continue;
      }
      if (line.rfind("mpc.", 0) != 0) continue;
      auto eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      std::string name(trim(line.substr(4, eq - 4)));
      std::string_view rhs = trim(line.substr(eq + 1));
      if (name == "baseMVA") {
        if (!rhs.empty() && rhs.back() == ';') rhs.remove_suffix(1);
        raw.base_mva = parse_number(trim(rhs), line_no);
        continue;
      }
      if (rhs.empty() || rhs.front() != '[') continue;  // strings, cell arrays, etc.
      open_name = name;
      open = &raw.matrices[name];
      *open = Matrix{line_no, {}};
      line = trim(rhs.substr(1));
      if (line.empty()) continue;
    }

    // Inside a matrix: rows end at ';' or end of line; ']' closes the matrix.
    bool closed = false;
    auto close = line.find(']');
    if (close != std::string_view::npos) {
      closed = true;
      line = line.substr(0, close);
    }
    std::size_t start = 0;
    while (start <= line.size()) {
      auto semi = line.find(';', start);
      std::string_view chunk = line.substr(start, semi == std::string_view::npos ? std::string_view::npos : semi - start);
      if (pending.values.empty()) pending.line = line_no;
      append_tokens(chunk, line_no, pending);
      if (semi == std::string_view::npos) break;
      flush_row(line_no);
      start = semi + 1;
    }
    flush_row(line_no);  // a newline also terminates a row
    if (closed) {
      open = nullptr;
    }
  }
  if (open) throw ParseError("matrix mpc." + open_name + " is not terminated", open->line);
  return raw;
}

const Matrix& require(const RawCase& raw, const std::string& name, std::size_t min_cols) {
  auto it = raw.matrices.find(name);
  if (it == raw.matrices.end()) throw ParseError("missing table mpc." + name);
  const Matrix& m = it->second;
  std::size_t width = 0;
  for (const auto& row : m.rows) {
    if (row.values.size() < min_cols) {
      throw ParseError("mpc." + name + " row has " + std::to_string(row.values.size()) +
                           " columns, expected at least " + std::to_string(min_cols),
                       row.line);
    }
    if (width == 0) width = row.values.size();
    if (row.values.size() != width && name != "gencost") {
      throw ParseError("mpc." + name + " row width differs from the first row", row.line);
    }
  }
  return m;
}

int as_int(double v, int line, const char* what) {
  if (std::floor(v) != v) throw ParseError(std::string(what) + " must be an integer", line);
  return static_cast<int>(v);
}

}  // namespace

Grid parse_case(std::string_view text, const ParseOptions& options) {
  RawCase raw = scan(text);
  Grid grid;
  grid.name = raw.name.empty() ? "case" : raw.name;
  grid.base_mva = raw.base_mva.value_or(100.0);

  const Matrix& bus_m = require(raw, "bus", 13);
  const Matrix& gen_m = require(raw, "gen", 10);
  const Matrix& branch_m = require(raw, "branch", 11);
  const Matrix& cost_m = require(raw, "gencost", 4);

  std::unordered_map<int, int> index_of;
  for (const auto& row : bus_m.rows) {
    Bus bus;
    bus.id = grid.num_buses();
    bus.original_id = as_int(row.values[0], row.line, "bus number");
    const int type = as_int(row.values[1], row.line, "bus type");
    switch (type) {
      case 1: bus.kind = BusKind::PQ; break;
      case 2: bus.kind = BusKind::PV; break;
      case 3: bus.kind = BusKind::Slack; break;
      default: throw ParseError("unsupported bus type " + std::to_string(type), row.line);
    }
    bus.base_load = row.values[2];
    if (bus.base_load < 0.0) {
      if (options.negative_load == ParseOptions::NegativeLoad::Zero) {
        bus.base_load = 0.0;
      } else {
        throw ValidationError("bus " + std::to_string(bus.original_id) + " has negative load");
      }
    }
    if (!index_of.emplace(bus.original_id, bus.id).second) {
      throw ParseError("duplicate bus number " + std::to_string(bus.original_id), row.line);
    }
    grid.buses.push_back(bus);
  }

  auto lookup = [&](double id, int line) {
    auto it = index_of.find(as_int(id, line, "bus reference"));
    if (it == index_of.end()) {
      throw ValidationError("line " + std::to_string(line) + ": reference to nonexistent bus " +
                            std::to_string(static_cast<long long>(id)));
    }
    return it->second;
  };

  for (const auto& row : branch_m.rows) {
    Branch br;
    br.from_bus = lookup(row.values[0], row.line);
    br.to_bus = lookup(row.values[1], row.line);
    br.reactance = row.values[3];
    if (br.reactance < 0.0 && options.negative_reactance == ParseOptions::NegativeReactance::Absolute) {
      br.reactance = -br.reactance;
    }
    const double rate = row.values[5];
    br.flow_limit = rate > 0.0 ? rate : std::numeric_limits<double>::infinity();
    br.in_service = row.values[10] != 0.0;
    grid.branches.push_back(br);
  }

  if (cost_m.rows.size() < gen_m.rows.size()) {
    throw ParseError("mpc.gencost has fewer rows than mpc.gen", cost_m.line);
  }
  std::vector<int> kinds;
  if (auto it = raw.matrices.find("gen_kind"); it != raw.matrices.end()) {
    for (const auto& row : it->second.rows) {
      for (double v : row.values) kinds.push_back(as_int(v, row.line, "gen_kind"));
    }
    if (kinds.size() != gen_m.rows.size()) {
      throw ParseError("mpc.gen_kind length differs from mpc.gen", it->second.line);
    }
  }

  const int slack = grid.slack_bus();
  bool slack_unit_assigned = false;
  for (std::size_t g = 0; g < gen_m.rows.size(); ++g) {
    const auto& row = gen_m.rows[g];
    const auto& cost = cost_m.rows[g];
    if (row.values[7] <= 0.0) continue;  // out of service

    Generator gen;
    gen.bus = lookup(row.values[0], row.line);
    gen.p_max = row.values[8];
    gen.p_min = row.values[9];

    const int model = as_int(cost.values[0], cost.line, "cost model");
    if (model != 2) throw ParseError("only polynomial generator costs are supported", cost.line);
    const int ncoef = as_int(cost.values[3], cost.line, "cost coefficient count");
    if (ncoef > 3) throw ParseError("polynomial costs above degree 2 are not supported", cost.line);
    if (ncoef < 0 || cost.values.size() < static_cast<std::size_t>(4 + ncoef)) {
      throw ParseError("gencost row is shorter than its coefficient count", cost.line);
    }
    gen.marginal_cost = ncoef >= 2 ? cost.values[4 + ncoef - 2] : 0.0;

    if (!kinds.empty()) {
      switch (kinds[g]) {
        case 0: gen.kind = GenKind::Dispatchable; break;
        case 1: gen.kind = GenKind::Wind; break;
        case 2: gen.kind = GenKind::Slack; break;
        default: throw ParseError("unknown gen_kind code", row.line);
      }
    } else if (gen.bus == slack && !slack_unit_assigned) {
      gen.kind = GenKind::Slack;
      slack_unit_assigned = true;
    }
    grid.generators.push_back(gen);
  }

  validate(grid);
  return grid;
}

namespace {

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int bus_type_code(BusKind k) {
  switch (k) {
    case BusKind::PQ: return 1;
    case BusKind::PV: return 2;
    case BusKind::Slack: return 3;
  }
  return 1;
}

int gen_kind_code(GenKind k) {
  switch (k) {
    case GenKind::Dispatchable: return 0;
    case GenKind::Wind: return 1;
    case GenKind::Slack: return 2;
  }
  return 0;
}

}  // namespace

std::string write_case(const Grid& grid) {
  std::ostringstream out;
  out << "function mpc = " << grid.name << "\n";
  out << "mpc.version = '2';\n";
  out << "mpc.baseMVA = " << num(grid.base_mva) << ";\n\n";
  out << "%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\n";
  out << "mpc.bus = [\n";
  for (const auto& bus : grid.buses) {
    out << "\t" << bus.original_id << "\t" << bus_type_code(bus.kind) << "\t" << num(bus.base_load)
        << "\t0\t0\t0\t1\t1\t0\t0\t1\t1.1\t0.9;\n";
  }
  out << "];\n\n";
  out << "%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin\n";
  out << "mpc.gen = [\n";
  for (const auto& gen : grid.generators) {
    out << "\t" << grid.buses[gen.bus].original_id << "\t0\t0\t0\t0\t1\t" << num(grid.base_mva) << "\t1\t"
        << num(gen.p_max) << "\t" << num(gen.p_min) << ";\n";
  }
  out << "];\n\n";
  out << "%% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax\n";
  out << "mpc.branch = [\n";
  for (const auto& br : grid.branches) {
    const std::string rate = br.rated() ? num(br.flow_limit) : "0";
    out << "\t" << grid.buses[br.from_bus].original_id << "\t" << grid.buses[br.to_bus].original_id << "\t0\t"
        << num(br.reactance) << "\t0\t" << rate << "\t" << rate << "\t" << rate << "\t0\t0\t"
        << (br.in_service ? 1 : 0) << "\t-360\t360;\n";
  }
  out << "];\n\n";
  out << "mpc.gencost = [\n";
  for (const auto& gen : grid.generators) {
    out << "\t2\t0\t0\t2\t" << num(gen.marginal_cost) << "\t0;\n";
  }
  out << "];\n\n";
  out << "mpc.gen_kind = [";
  for (std::size_t g = 0; g < grid.generators.size(); ++g) {
    out << (g ? " " : "") << gen_kind_code(grid.generators[g].kind);
  }
  out << "];\n";
  return out.str();
}

nlohmann::json grid_to_json(const Grid& grid) {
  using nlohmann::json;
  json doc;
  doc["format"] = "gridrisk-grid";
  doc["version"] = 1;
  doc["name"] = grid.name;
  doc["base_mva"] = grid.base_mva;
  json buses = json::array();
  for (const auto& bus : grid.buses) {
    buses.push_back({{"id", bus.id}, {"original_id", bus.original_id}, {"kind", to_string(bus.kind)},
                     {"base_load", bus.base_load}});
  }
  doc["buses"] = std::move(buses);
  json branches = json::array();
  for (const auto& br : grid.branches) {
    json b = {{"from", br.from_bus}, {"to", br.to_bus}, {"reactance", br.reactance}, {"in_service", br.in_service}};
    b["flow_limit"] = br.rated() ? json(br.flow_limit) : json(nullptr);
    branches.push_back(std::move(b));
  }
  doc["branches"] = std::move(branches);
  json gens = json::array();
  for (const auto& gen : grid.generators) {
    gens.push_back({{"bus", gen.bus}, {"p_min", gen.p_min}, {"p_max", gen.p_max},
                    {"marginal_cost", gen.marginal_cost}, {"kind", to_string(gen.kind)}});
  }
  doc["generators"] = std::move(gens);
  if (grid.zones) doc["zones"] = {{"zone_of_bus", grid.zones->zone_of_bus}};
  return doc;
}

Grid grid_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("format", "") != "gridrisk-grid") throw ParseError("not a gridrisk grid document");
    Grid grid;
    grid.name = doc.at("name").get<std::string>();
    grid.base_mva = doc.at("base_mva").get<double>();
    for (const auto& b : doc.at("buses")) {
      Bus bus;
      bus.id = b.at("id").get<int>();
      bus.original_id = b.at("original_id").get<int>();
      const auto kind = b.at("kind").get<std::string>();
      bus.kind = kind == "slack" ? BusKind::Slack : kind == "PV" ? BusKind::PV : BusKind::PQ;
      bus.base_load = b.at("base_load").get<double>();
      grid.buses.push_back(bus);
    }
    for (const auto& b : doc.at("branches")) {
      Branch br;
      br.from_bus = b.at("from").get<int>();
      br.to_bus = b.at("to").get<int>();
      br.reactance = b.at("reactance").get<double>();
      br.in_service = b.at("in_service").get<bool>();
      const auto& lim = b.at("flow_limit");
      br.flow_limit = lim.is_null() ? std::numeric_limits<double>::infinity() : lim.get<double>();
      grid.branches.push_back(br);
    }
    for (const auto& g : doc.at("generators")) {
      Generator gen;
      gen.bus = g.at("bus").get<int>();
      gen.p_min = g.at("p_min").get<double>();
      gen.p_max = g.at("p_max").get<double>();
      gen.marginal_cost = g.at("marginal_cost").get<double>();
      const auto kind = g.at("kind").get<std::string>();
      gen.kind = kind == "wind" ? GenKind::Wind : kind == "slack" ? GenKind::Slack : GenKind::Dispatchable;
      grid.generators.push_back(gen);
    }
    if (doc.contains("zones")) {
      grid.zones = partition_zones(grid, doc.at("zones").at("zone_of_bus").get<std::vector<int>>());
    }
    validate(grid);
    return grid;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("grid JSON: ") + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Grid load_grid_file(const std::string& path, const ParseOptions& options) {
  const std::string text = read_text_file(path);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    try {
      return grid_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("grid JSON: ") + e.what());
    }
  }
  return parse_case(text, options);
}

}  // namespace gridrisk
