// gridrisk command-line front end.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gridrisk/case_io.hpp"
#include "gridrisk/config.hpp"
#include "gridrisk/errors.hpp"
#include "gridrisk/pipeline.hpp"

namespace {

using namespace gridrisk;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> samples;
};

void add_common(CLI::App* cmd, Overrides& o, bool samples) {
  cmd->add_option("--config", o.config, "run configuration (JSON)")->required();
  cmd->add_option("--seed", o.seed, "master seed; replaces every named seed in the config");
  cmd->add_option("--out", o.out, "output directory");
  if (samples) cmd->add_option("--samples", o.samples, "sample count for this command")->check(CLI::NonNegativeNumber);
}

RunConfig load_config(const Overrides& o) {
  RunConfig c = RunConfig::load(o.config);
  if (o.seed) c.seeds = Seeds::from_master(*o.seed);
  if (o.out) c.out_dir = *o.out;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid reliability and risk assessment with DC OPF and graph surrogates"};
  app.require_subcommand(1);

  Overrides o;
  std::string grid_file, mode = "train", engine = "opf", head = "all", report_a, report_b, compare_out = ".";

  auto* info = app.add_subcommand("info", "summarize a grid file or the grid of a config");
  info->add_option("grid", grid_file, "MATPOWER case or grid JSON");
  info->add_option("--config", o.config, "run configuration (zones, rating and wind applied)");

  auto* gen = app.add_subcommand("gen", "generate a labeled dataset");
  gen->add_option("mode", mode, "train (uniform box) or forecast (copula)")->check(CLI::IsMember({"train", "forecast"}));
  add_common(gen, o, true);

  auto* trn = app.add_subcommand("train", "train surrogate models on the training dataset");
  add_common(trn, o, false);
  trn->add_option("--head", head, "bus_pg, branch_pf, system or all")
      ->check(CLI::IsMember({"bus_pg", "branch_pf", "system", "all"}));

  auto* assess = app.add_subcommand("assess", "risk assessment on the copula forecast");
  add_common(assess, o, true);
  assess->add_option("--engine", engine, "opf or gnn")->check(CLI::IsMember({"opf", "gnn"}));

  auto* cmp = app.add_subcommand("compare", "compare two risk reports");
  cmp->add_option("reference", report_a, "reference report (usually OPF)")->required();
  cmp->add_option("candidate", report_b, "candidate report (usually GNN)")->required();
  cmp->add_option("--out", compare_out, "directory for comparison.json");

  auto* sweep = app.add_subcommand("sweep", "surrogate error against forecast distance");
  add_common(sweep, o, true);

  auto* bench = app.add_subcommand("bench", "time OPF against surrogate prediction");
  add_common(bench, o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (info->parsed()) {
      if (!o.config.empty()) {
        cmd_info(build_setup(RunConfig::load(o.config)).grid, std::cout);
      } else if (!grid_file.empty()) {
        cmd_info(load_grid_file(grid_file), std::cout);
      } else {
        std::cerr << "info needs a grid file or --config\n";
        return 2;
      }
    } else if (gen->parsed()) {
      RunConfig c = load_config(o);
      const GenMode m = gen_mode_from_string(mode);
      if (o.samples) (m == GenMode::Train ? c.train_samples : c.assess_samples) = *o.samples;
      cmd_gen(c, m, std::cerr);
    } else if (trn->parsed()) {
      const RunConfig c = load_config(o);
      if (head == "all") {
        for (Head h : {Head::BusPg, Head::BranchPf, Head::System}) cmd_train(c, h, std::cerr);
      } else {
        cmd_train(c, head_from_string(head), std::cerr);
      }
    } else if (assess->parsed()) {
      RunConfig c = load_config(o);
      if (o.samples) c.assess_samples = *o.samples;
      cmd_assess(c, engine_from_string(engine), std::cerr);
    } else if (cmp->parsed()) {
      cmd_compare(report_a, report_b, compare_out, std::cout);
    } else if (sweep->parsed()) {
      RunConfig c = load_config(o);
      if (o.samples) c.sweep_samples = *o.samples;
      cmd_sweep(c, std::cerr);
    } else if (bench->parsed()) {
      RunConfig c = load_config(o);
      if (o.samples) c.bench_samples = *o.samples;
      cmd_bench(c, std::cout);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const gridrisk::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
