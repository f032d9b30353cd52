#include "gridrisk/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "gridrisk/errors.hpp"

namespace gridrisk {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

const char* to_string(Engine e) { return e == Engine::Opf ? "opf" : "gnn"; }

Engine engine_from_string(const std::string& s) {
  if (s == "opf") return Engine::Opf;
  if (s == "gnn") return Engine::Gnn;
  throw ValidationError("unknown engine '" + s + "' (expected opf or gnn)");
}

const char* to_string(GenMode m) { return m == GenMode::Train ? "train" : "forecast"; }

GenMode gen_mode_from_string(const std::string& s) {
  if (s == "train") return GenMode::Train;
  if (s == "forecast") return GenMode::Forecast;
  throw ValidationError("unknown dataset mode '" + s + "' (expected train or forecast)");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  const std::string text = read_text_file(path.string());
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<double> bus_dispatch(const Grid& grid, const OpfSolution& sol) {
  Record r;
  r.solution = sol;
  return head_targets(grid, Head::BusPg, r);
}

QoIEnsemble opf_ensemble(const Grid& grid, const std::vector<Record>& records, ZonalReserveMode mode) {
  QoIEnsemble e;
  e.source = "opf";
  for (const auto& rec : records) {
    if (!rec.ok()) continue;
    QoIRecord q;
    q.system = rec.qois;
    q.flows = rec.solution.flows;
    if (grid.zones) {
      q.zonal_reserve = mode == ZonalReserveMode::Scenario ? zonal_reserves(grid, rec.scenario)
                                                            : dispatch_zonal_reserves(grid, bus_dispatch(grid, rec.solution));
    }
    e.records.push_back(std::move(q));
  }
  return e;
}

QoIEnsemble gnn_ensemble(const Grid& grid, const SurrogateSet& models, const std::vector<Scenario>& scenarios,
                         ZonalReserveMode mode, double* seconds) {
  if (models.branch.head != Head::BranchPf || models.system.head != Head::System) {
    throw ValidationError("surrogate set holds the wrong heads");
  }
  const bool need_bus = grid.zones && mode == ZonalReserveMode::Dispatch;
  if (need_bus && (!models.bus || models.bus->head != Head::BusPg)) {
    throw ValidationError("dispatch-based zonal reserve needs the bus_pg model");
  }
  const auto sys = predict_batch(models.system, grid, scenarios);
  const auto flows = predict_batch(models.branch, grid, scenarios);
  double total = sys.seconds + flows.seconds;
  BatchPrediction bus;
  if (need_bus) {
    bus = predict_batch(*models.bus, grid, scenarios);
    total += bus.seconds;
  }
  QoIEnsemble e;
  e.source = "gnn";
  for (std::size_t k = 0; k < scenarios.size(); ++k) {
    QoIRecord q;
    q.system = {sys.values[k][0], sys.values[k][1], sys.values[k][2]};
    q.flows = flows.values[k];
    if (grid.zones) {
      q.zonal_reserve = need_bus ? dispatch_zonal_reserves(grid, bus.values[k]) : zonal_reserves(grid, scenarios[k]);
    }
    e.records.push_back(std::move(q));
  }
  if (seconds) *seconds = total;
  return e;
}

HeadEvaluation evaluate_head(const SurrogateModel& model, const Grid& grid, const Dataset& data,
                             const std::vector<int>& indices) {
  HeadEvaluation ev;
  ev.head = model.head;
  std::vector<Scenario> scen;
  std::vector<std::vector<double>> ref;
  for (int i : indices) {
    const Record& r = data.records.at(i);
    if (!r.ok()) continue;
    scen.push_back(r.scenario);
    ref.push_back(head_targets(grid, model.head, r));
  }
  ev.records = static_cast<int>(scen.size());
  if (scen.empty()) throw ValidationError("no solved records to evaluate");
  const auto pred = predict_batch(model, grid, scen).values;

  const int outs = model.num_outputs();
  ev.bins = {{0.1, 1.0}, {1.0, 10.0}, {10.0, std::numeric_limits<double>::infinity()}};
  if (model.head == Head::System) {
    ev.mean_rel_error.assign(outs, 0.0);
    ev.rel_error_count.assign(outs, 0);
  }
  double abs_sum = 0.0;
  for (std::size_t k = 0; k < scen.size(); ++k) {
    for (int o = 0; o < outs; ++o) {
      const double y = ref[k][o], e = std::abs(pred[k][o] - y), mag = std::abs(y);
      abs_sum += e;
      if (model.head == Head::System && mag >= 1e-6) {
        ev.mean_rel_error[o] += e / mag;
        ++ev.rel_error_count[o];
      }
      for (auto& b : ev.bins) {
        if (mag >= b.lo && mag < b.hi) {
          ++b.count;
          b.mean_rel_error += e / mag;
          b.max_rel_error = std::max(b.max_rel_error, e / mag);
        }
      }
    }
  }
  for (std::size_t o = 0; o < ev.mean_rel_error.size(); ++o) {
    if (ev.rel_error_count[o] > 0) ev.mean_rel_error[o] /= ev.rel_error_count[o];
  }
  for (auto& b : ev.bins) {
    if (b.count > 0) b.mean_rel_error /= b.count;
  }
  ev.mean_abs_error = abs_sum / (static_cast<double>(scen.size()) * outs);
  return ev;
}

json evaluation_to_json(const HeadEvaluation& e) {
  json bins = json::array();
  for (const auto& b : e.bins) {
    bins.push_back({{"lo_mw", b.lo},
                    {"hi_mw", std::isinf(b.hi) ? json("inf") : json(b.hi)},
                    {"count", b.count},
                    {"mean_rel_error", b.mean_rel_error},
                    {"max_rel_error", b.max_rel_error}});
  }
  json j = {{"head", to_string(e.head)}, {"records", e.records}, {"bins", bins}, {"mean_abs_error", e.mean_abs_error}};
  if (e.head == Head::System) {
    j["mean_rel_error"] = {{"reserve", e.mean_rel_error[0]}, {"shedding", e.mean_rel_error[1]}, {"total_cost", e.mean_rel_error[2]}};
    j["rel_error_count"] = e.rel_error_count;
  }
  return j;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionError("spearman inputs differ in length");
  if (x.size() < 2) throw ValidationError("spearman needs at least two points");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n, my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "shift,distance,mape_percent,mape_branches,max_scope_error,opf_failures,status\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6g,%.10g,%.10g,%d,%.10g,%d,", r.shift, r.distance, r.mape, r.mape_branches,
                  r.max_scope_error, r.opf_failures);
    out << buf << r.status << '\n';
  }
  return out.str();
}

namespace {

RunPaths paths_of(const RunConfig& c) { return {fs::path(c.out_dir)}; }

void freeze(const RunConfig& c, const Setup& s, const std::string& command) {
  write_json(paths_of(c).frozen_config(command), frozen_config(c, s));
}

void check_failures(const std::vector<Record>& records, double max_rate, std::ostream& log) {
  int failed = 0;
  std::string first;
  for (const auto& r : records) {
    if (!r.ok()) {
      if (first.empty()) first = "record " + std::to_string(r.index) + ": " + (r.error.empty() ? "infeasible" : r.error);
      ++failed;
    }
  }
  if (failed > 0) log << "  " << failed << " of " << records.size() << " scenarios have no OPF solution\n";
  if (!records.empty() && static_cast<double>(failed) > max_rate * static_cast<double>(records.size())) {
    throw SolverError(std::to_string(failed) + " of " + std::to_string(records.size()) +
                      " OPF solves failed, above the configured limit; first failure: " + first);
  }
}

SurrogateModel load_checked(const RunConfig& c, const Grid& grid, Head head) {
  const auto path = paths_of(c).model(head);
  if (!fs::exists(path)) throw IoError("missing model file " + path.string() + " (run train first)");
  SurrogateModel m = load_model(path.string());
  if (m.head != head) throw ValidationError(path.string() + " holds a " + to_string(m.head) + " model");
  if (m.grid_hash != grid_hash(grid)) throw ValidationError(path.string() + " was trained on a different grid");
  return m;
}

SurrogateSet load_surrogates(const RunConfig& c, const Grid& grid, bool need_bus) {
  SurrogateSet s{std::nullopt, load_checked(c, grid, Head::BranchPf), load_checked(c, grid, Head::System)};
  if (need_bus) s.bus = load_checked(c, grid, Head::BusPg);
  return s;
}

const SamplerSpec& forecast_of(const Setup& s) {
  if (s.forecast.kind != SamplerSpec::Kind::Copula) throw ValidationError("config has no copula forecast (zones and marginals)");
  return s.forecast;
}

void write_report(const RunConfig& c, const Grid& grid, const RiskReport& r, Engine e) {
  const auto p = paths_of(c);
  write_json(p.report(e), report_to_json(r));
  write_text(p.branches(e), branch_table_csv(grid, r));
  write_text(p.conditional(e), conditional_matrix_csv(r));
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

void cmd_info(const Grid& grid, std::ostream& out) {
  int rated = 0;
  for (const auto& b : grid.branches) rated += b.rated() ? 1 : 0;
  double cap = 0.0, wind = 0.0;
  for (const auto& g : grid.generators) (g.dispatchable() ? cap : wind) += g.p_max;
  out << "grid " << (grid.name.empty() ? "(unnamed)" : grid.name) << '\n'
      << "  " << grid.num_buses() << " buses, " << grid.num_branches() << " branches (" << rated << " rated), "
      << grid.num_generators() << " generators (" << grid.dispatchable_generators().size() << " dispatchable, "
      << grid.wind_generators().size() << " wind)\n"
      << "  slack bus " << grid.buses[grid.slack_bus()].original_id << '\n'
      << std::fixed << std::setprecision(1) << "  base load " << grid.total_base_load() << " MW, dispatchable capacity "
      << cap << " MW, wind capacity " << wind << " MW\n";
  if (grid.zones) {
    const auto& z = *grid.zones;
    out << "  zone  buses  load-buses  base-load-MW  capacity-MW  wind-MW  largest-unit-MW\n";
    for (int k = 0; k < z.num_zones; ++k) {
      int buses = 0;
      for (int b : z.zone_of_bus) buses += b == k + 1 ? 1 : 0;
      double zcap = 0.0, largest = 0.0;
      for (const auto& g : grid.generators) {
        if (g.dispatchable() && z.zone_of_bus[g.bus] == k + 1) {
          zcap += g.p_max;
          largest = std::max(largest, g.p_max);
        }
      }
      char line[160];
      std::snprintf(line, sizeof line, "  %4d  %5d  %10zu  %12.1f  %11.1f  %7.1f  %15.1f\n", k + 1, buses, z.load_buses[k].size(),
                    z.base_load[k], zcap, z.wind_capacity[k], largest);
      out << line;
    }
  }
  out.unsetf(std::ios::floatfield);
}

Dataset cmd_gen(const RunConfig& config, GenMode mode, std::ostream& log) {
  const Setup s = build_setup(config);
  const bool train = mode == GenMode::Train;
  const SamplerSpec& sampler = train ? s.training : forecast_of(s);
  const int n = train ? config.train_samples : config.assess_samples;
  const std::uint64_t seed = train ? config.seeds.train : config.seeds.forecast;
  freeze(config, s, std::string("gen_") + to_string(mode));
  log << "generating " << n << ' ' << to_string(mode) << " scenarios on " << s.grid.name << '\n';
  const auto t0 = Clock::now();
  Dataset ds = generate_dataset(s.grid, sampler, n, seed, config.opf);
  check_failures(ds.records, config.max_failure_rate, log);
  const auto path = paths_of(config).dataset(mode);
  write_dataset(ds, path.string());
  write_json(paths_of(config).timing(std::string("gen_") + to_string(mode)),
             {{"samples", n}, {"seconds", seconds_since(t0)}});
  log << "  wrote " << path.string() << '\n';
  return ds;
}

SurrogateModel cmd_train(const RunConfig& config, Head head, std::ostream& log) {
  const Setup s = build_setup(config);
  const auto p = paths_of(config);
  const auto data_path = p.dataset(GenMode::Train);
  if (!fs::exists(data_path)) throw IoError("missing dataset " + data_path.string() + " (run gen train first)");
  const Dataset ds = read_dataset(data_path.string());
  if (ds.provenance.grid_hash != grid_hash(s.grid)) throw ValidationError("dataset was generated on a different grid");
  for (const auto& r : ds.records) {
    if (r.ok()) (void)head_targets(s.grid, head, r);  // shape check against the head
  }
  freeze(config, s, std::string("train_") + to_string(head));

  const Split split = split_indices(static_cast<int>(ds.records.size()), config.train_fraction);
  const TrainConfig tc = config.train_config(head);
  log << "training " << to_string(head) << " on " << split.train.size() << " records (" << tc.epochs << " epochs)\n";
  TrainingReport rep;
  SurrogateModel m = train(s.grid, ds, split.train, head, tc, &rep);
  m.manifest["dataset"] = data_path.filename().string();
  m.manifest["dataset_seed"] = ds.provenance.seed;
  m.manifest["train_fraction"] = config.train_fraction;
  save_model(m, p.model(head).string());

  std::ostringstream csv;
  csv << "epoch,train_loss,validation_loss\n" << std::setprecision(10);
  for (const auto& e : rep.curve) csv << e.epoch << ',' << e.train_loss << ',' << e.validation_loss << '\n';
  write_text(p.loss_curve(head), csv.str());

  json report = {{"head", to_string(head)},
                 {"best_epoch", rep.best_epoch},
                 {"train_records", rep.train_records},
                 {"validation_records", rep.validation_records}};
  if (!split.test.empty()) {
    const HeadEvaluation ev = evaluate_head(m, s.grid, ds, split.test);
    report["test"] = evaluation_to_json(ev);
    if (head == Head::System) {
      log << "  test mean relative error: reserve " << 100.0 * ev.mean_rel_error[0] << "%, cost "
          << 100.0 * ev.mean_rel_error[2] << "%\n";
    } else {
      log << "  test max relative error for |ref| >= 10 MW: " << 100.0 * ev.bins[2].max_rel_error << "%\n";
    }
  }
  write_json(p.training(head), report);
  write_json(p.timing(std::string("train_") + to_string(head)), {{"seconds", rep.seconds}});
  log << "  wrote " << p.model(head).string() << '\n';
  return m;
}

RiskReport cmd_assess(const RunConfig& config, Engine engine, std::ostream& log) {
  const Setup s = build_setup(config);
  const auto& sampler = forecast_of(s);
  const bool need_bus = config.risk.zonal_mode == ZonalReserveMode::Dispatch;
  std::optional<SurrogateSet> models;
  if (engine == Engine::Gnn) models = load_surrogates(config, s.grid, need_bus);
  freeze(config, s, std::string("assess_") + to_string(engine));

  const int M = config.assess_samples;
  log << "assessing " << M << " forecast scenarios with " << to_string(engine) << '\n';
  const auto scenarios = draw_scenarios(s.grid, sampler, M, config.seeds.forecast);
  QoIEnsemble ens;
  double seconds = 0.0;
  if (engine == Engine::Opf) {
    const auto t0 = Clock::now();
    const auto records = label_scenarios(s.grid, scenarios, config.opf);
    seconds = seconds_since(t0);
    check_failures(records, config.max_failure_rate, log);
    ens = opf_ensemble(s.grid, records, config.risk.zonal_mode);
  } else {
    ens = gnn_ensemble(s.grid, *models, scenarios, config.risk.zonal_mode, &seconds);
  }
  RiskReport r = assess_risk(s.grid, ens, config.risk);
  r.seed = config.seeds.forecast;
  write_report(config, s.grid, r, engine);
  write_json(paths_of(config).timing(std::string("assess_") + to_string(engine)),
             {{"samples", M}, {"seconds", seconds}, {"seconds_per_sample", seconds / M}});
  for (const auto& sc : r.scopes) {
    log << "  " << sc.name << ": P_f = " << sc.prob.p << " (se " << sc.prob.std_error << "), risk " << sc.risk << '\n';
  }
  log << "  wrote " << paths_of(config).report(engine).string() << '\n';
  return r;
}

ErrorSummary cmd_compare(const fs::path& reference, const fs::path& candidate, const fs::path& out_dir, std::ostream& out) {
  const RiskReport a = report_from_json(read_json(reference));
  const RiskReport b = report_from_json(read_json(candidate));
  if (a.grid_hash != b.grid_hash) throw ValidationError("reports come from different grids");
  if (a.epsilon != b.epsilon || a.zonal_mode != b.zonal_mode) throw ValidationError("reports use different risk settings");
  const ErrorSummary s = compare_reports(a, b);
  const std::string table = scope_table(a, b);
  out << table;
  out << "max |dP_f| " << s.max_scope_error << ", branch MAPE " << s.mape << "% over " << s.mape_branches
      << " branches, max |dP_B| " << s.max_branch_error << '\n';
  json j = summary_to_json(s);
  j["reference"] = reference.filename().string();
  j["candidate"] = candidate.filename().string();
  write_json(out_dir / "comparison.json", j);
  write_text(out_dir / "comparison.txt", table);
  return s;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& config, std::ostream& log) {
  const Setup s = build_setup(config);
  if (config.sweep_shifts.empty()) throw ValidationError("sweep.shifts is empty");
  const auto p = paths_of(config);
  const auto data_path = p.dataset(GenMode::Train);
  if (!fs::exists(data_path)) throw IoError("missing dataset " + data_path.string() + " (run gen train first)");
  const Dataset ds = read_dataset(data_path.string());
  if (ds.provenance.grid_hash != grid_hash(s.grid)) throw ValidationError("dataset was generated on a different grid");
  const bool need_bus = config.risk.zonal_mode == ZonalReserveMode::Dispatch;
  const SurrogateSet models = load_surrogates(config, s.grid, need_bus);
  freeze(config, s, "sweep");

  const Split split = split_indices(static_cast<int>(ds.records.size()), config.train_fraction);
  std::vector<std::vector<double>> train_vecs;
  for (int i : split.train) train_vecs.push_back(scenario_vector(ds.records[i].scenario));

  std::vector<SweepRow> rows;
  for (double shift : config.sweep_shifts) {
    SweepRow row;
    row.shift = shift;
    try {
      const SamplerSpec sampler = forecast_sampler(config, s.grid, shift);
      const auto scen = draw_scenarios(s.grid, sampler, config.sweep_samples, config.seeds.sweep);
      std::vector<std::vector<double>> vecs;
      for (const auto& sc : scen) vecs.push_back(scenario_vector(sc));
      row.distance = ensemble_distance(train_vecs, vecs);

      const auto records = label_scenarios(s.grid, scen, config.opf);
      std::vector<Scenario> solved;
      for (const auto& r : records) {
        if (r.ok()) solved.push_back(r.scenario);
        else ++row.opf_failures;
      }
      if (solved.empty()) throw SolverError("no OPF solution in this variant");
      const RiskReport ro = assess_risk(s.grid, opf_ensemble(s.grid, records, config.risk.zonal_mode), config.risk);
      const RiskReport rg = assess_risk(s.grid, gnn_ensemble(s.grid, models, solved, config.risk.zonal_mode), config.risk);
      const ErrorSummary e = compare_reports(ro, rg);
      row.mape = e.mape;
      row.mape_branches = e.mape_branches;
      row.max_scope_error = e.max_scope_error;
    } catch (const Error& e) {
      row.status = std::string("failed: ") + e.what();
    }
    log << "  shift " << shift << ": D = " << row.distance << ", MAPE = " << row.mape << "% (" << row.status << ")\n";
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.distance < b.distance; });
  write_text(p.sweep(), sweep_csv(rows));
  log << "  wrote " << p.sweep().string() << '\n';
  return rows;
}

BenchResult cmd_bench(const RunConfig& config, std::ostream& log) {
  const Setup s = build_setup(config);
  const SurrogateSet models = load_surrogates(config, s.grid, true);
  freeze(config, s, "bench");
  const SamplerSpec& sampler = s.forecast.kind == SamplerSpec::Kind::Copula ? s.forecast : s.training;
  const auto scen = draw_scenarios(s.grid, sampler, config.bench_samples, config.seeds.bench);

  BenchResult b;
  b.samples = config.bench_samples;
  std::vector<double> opf_times;
  for (const auto& sc : scen) {
    const auto t0 = Clock::now();
    try {
      const auto sol = solve_dcopf(s.grid, sc, config.opf);
      if (sol.status == OpfStatus::Infeasible) ++b.opf_failures;
    } catch (const SolverError&) {
      ++b.opf_failures;
    }
    opf_times.push_back(seconds_since(t0));
  }
  std::vector<double> gnn_times;
  for (int rep = 0; rep < 5; ++rep) {
    double t = 0.0;
    for (const SurrogateModel* m : {&*models.bus, &models.branch, &models.system}) t += predict_batch(*m, s.grid, scen).seconds;
    gnn_times.push_back(t / static_cast<double>(scen.size()));
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  b.opf_median_seconds = median(opf_times);
  b.gnn_seconds_per_sample = median(gnn_times);
  b.speedup = b.opf_median_seconds / b.gnn_seconds_per_sample;
  write_json(paths_of(config).bench(), {{"grid", s.grid.name},
                                        {"samples", b.samples},
                                        {"opf_median_seconds", b.opf_median_seconds},
                                        {"gnn_seconds_per_sample", b.gnn_seconds_per_sample},
                                        {"speedup", b.speedup},
                                        {"opf_failures", b.opf_failures}});
  log << "OPF median " << 1e3 * b.opf_median_seconds << " ms/sample, surrogate " << 1e3 * b.gnn_seconds_per_sample
      << " ms/sample (three heads), speedup x" << b.speedup << '\n';
  return b;
}

}  // namespace gridrisk
