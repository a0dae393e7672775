// ealearn: experiment runner for active learning of entity alignment.
//
//   ealearn run --config exp.conf [--set key=value]... [--output DIR] [--workers N]
//   ealearn report RUN_DIR... [--output DIR]
//   ealearn gen-data [--config exp.conf] [--set key=value]... --output DIR
//   ealearn rankings [--config exp.conf] [--set key=value]... [--kind K] --output DIR
//
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ealearn/error.h"
#include "ealearn/experiment.h"
#include "ealearn/graph_metrics.h"

namespace {

namespace fs = std::filesystem;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct SpecOptions {
  std::string config;
  std::vector<std::string> overrides;
};

void add_spec_options(CLI::App* cmd, SpecOptions& opts, bool config_required) {
  auto* c = cmd->add_option("-c,--config", opts.config,
                            "Experiment config file (key = value lines)");
  if (config_required) c->required();
  c->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", opts.overrides,
                  "Override a config key, e.g. --set simulation.budget=50")
      ->type_name("KEY=VALUE");
}

ealearn::ExperimentSpec build_spec(const SpecOptions& opts) {
  ealearn::ExperimentSpec spec =
      opts.config.empty() ? ealearn::ExperimentSpec{} : ealearn::load_spec(opts.config);
  ealearn::apply_overrides(spec, opts.overrides);
  return spec;
}

int workers_from_env(int fallback) {
  const char* env = std::getenv("EALEARN_WORKERS");
  if (env == nullptr || *env == '\0') return fallback;
  try {
    const int n = std::stoi(env);
    if (n < 1) throw std::out_of_range("");
    return n;
  } catch (const std::exception&) {
    throw ealearn::ValidationError(
        fmt::format("EALEARN_WORKERS must be a positive integer, got '{}'", env));
  }
}

int cmd_run(const SpecOptions& opts, const std::string& output, int workers,
            bool quiet) {
  ealearn::ExperimentSpec spec = build_spec(opts);
  spec.workers = workers_from_env(spec.workers);
  if (workers > 0) spec.workers = workers;
  if (!output.empty()) spec.output = output;
  ealearn::validate(spec);

  const ealearn::RunOutcome outcome =
      ealearn::run_experiment(spec, quiet ? nullptr : &std::cerr);
  if (!outcome.failures.empty()) {
    std::cerr << fmt::format("{} of {} runs failed:\n", outcome.failures.size(),
                             outcome.failures.size() + outcome.completed);
    for (const auto& f : outcome.failures) std::cerr << "  " << f << '\n';
    return kExitRuntime;
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& output) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const ealearn::Report report = ealearn::report_runs(paths, output);
  std::cout << ealearn::format_aggregate_text(report.table);
  return 0;
}

int cmd_gen_data(const SpecOptions& opts, const std::string& output) {
  ealearn::ExperimentSpec spec = build_spec(opts);
  if (spec.dataset.source != "synthetic") {
    throw ealearn::ValidationError("gen-data needs dataset.source = synthetic");
  }
  ealearn::export_synthetic(spec.dataset, output);
  std::cerr << fmt::format("wrote synthetic dataset to {}\n", output);
  return 0;
}

int cmd_rankings(const SpecOptions& opts, const std::string& kind,
                 const std::string& output) {
  const ealearn::ExperimentSpec spec = build_spec(opts);
  const ealearn::Dataset dataset = ealearn::load_dataset(spec.dataset);
  fs::create_directories(output);
  const auto& g = dataset.graphs;
  if (kind == "deg" || kind == "all") {
    ealearn::write_ranking_csv(ealearn::degree_ranking(g), g, fs::path(output) / "deg.csv");
  }
  if (kind == "betw" || kind == "all") {
    ealearn::write_ranking_csv(ealearn::betweenness_ranking(g), g,
                               fs::path(output) / "betw.csv");
  }
  if (kind == "avc" || kind == "all") {
    ealearn::write_ranking_csv(ealearn::avc_ranking(g), g, fs::path(output) / "avc.csv");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pool-based active learning for entity alignment"};
  app.require_subcommand(1);

  SpecOptions run_opts;
  std::string run_output;
  int run_workers = 0;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run every heuristic x dropout x seed cell");
  add_spec_options(run, run_opts, true);
  run->add_option("-o,--output", run_output,
                  "Output directory (default: config key 'output', \"runs\")");
  run->add_option("-j,--workers", run_workers,
                  "Parallel runs (default: $EALEARN_WORKERS, else config, else 1)")
      ->check(CLI::PositiveNumber);
  run->add_flag("-q,--quiet", quiet, "No progress output");

  std::vector<std::string> report_dirs;
  std::string report_output = ".";
  auto* report = app.add_subcommand("report", "Aggregate existing run directories");
  report->add_option("dirs", report_dirs, "Run directories or parents of them")
      ->required();
  report->add_option("-o,--output", report_output, "Where tables are written")
      ->capture_default_str();

  SpecOptions gen_opts;
  std::string gen_output;
  auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset as TSV");
  add_spec_options(gen, gen_opts, false);
  gen->add_option("-o,--output", gen_output, "Target directory")->required();

  SpecOptions rank_opts;
  std::string rank_kind = "all";
  std::string rank_output;
  auto* rankings = app.add_subcommand("rankings", "Export static node rankings as CSV");
  add_spec_options(rankings, rank_opts, false);
  rankings->add_option("-k,--kind", rank_kind, "deg, betw, avc or all")
      ->check(CLI::IsMember({"deg", "betw", "avc", "all"}))
      ->capture_default_str();
  rankings->add_option("-o,--output", rank_output, "Target directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*run) return cmd_run(run_opts, run_output, run_workers, quiet);
    if (*report) return cmd_report(report_dirs, report_output);
    if (*gen) return cmd_gen_data(gen_opts, gen_output);
    if (*rankings) return cmd_rankings(rank_opts, rank_kind, rank_output);
  } catch (const ealearn::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ealearn::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
