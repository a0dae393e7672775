#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "ealearn/analysis.h"
#include "ealearn/heuristics.h"
#include "ealearn/model.h"
#include "ealearn/simulator.h"
#include "ealearn/synthetic.h"

namespace ealearn {

struct DatasetSpec {
  // "synthetic" or "files".
  std::string source = "synthetic";
  std::string name = "synthetic";
  SyntheticParams synthetic;
  std::filesystem::path left_triples;
  std::filesystem::path right_triples;
  std::filesystem::path train_alignments;
  // Optional; when empty the train file is split by train_fraction.
  std::filesystem::path test_alignments;
  double train_fraction = 0.7;
  double validation_fraction = 0.2;
  std::uint64_t split_seed = 0;
};

// Everything needed to run a sweep over heuristics x dropout rates x seeds.
// Serialized as flat "key = value" text with '#' comments.
struct ExperimentSpec {
  DatasetSpec dataset;
  ModelConfig model;
  std::vector<double> dropout_rates{0.0, 0.2, 0.5};
  std::size_t budget = 200;
  std::size_t query_budget = 0;
  bool exclusive_removal = true;
  std::vector<std::string> heuristics{"rnd", "deg",   "betw", "avc",
                                      "cs",  "esccn", "bald", "prexp"};
  std::map<std::string, ParamMap> heuristic_params;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::filesystem::path output = "runs";
  int workers = 1;
};

// Applies one key. Unknown keys and bad values throw ValidationError.
void set_spec_value(ExperimentSpec& spec, const std::string& key,
                    const std::string& value);

// Reads "key = value" lines on top of the defaults.
ExperimentSpec parse_spec(std::istream& in, const std::string& source_name);
ExperimentSpec load_spec(const std::filesystem::path& path);
// Applies "key=value" overrides in order.
void apply_overrides(ExperimentSpec& spec, const std::vector<std::string>& overrides);

// Every key, in a stable order; parse_spec(render_spec(s)) reproduces s.
std::string render_spec(const ExperimentSpec& spec);

// Checks heuristic names and parameters, model config and dataset fields.
void validate(const ExperimentSpec& spec);

Dataset load_dataset(const DatasetSpec& spec);

// One (heuristic, dropout, seed) run of a sweep.
struct Cell {
  std::string label;  // heuristic, suffixed "@<dropout>" in a dropout sweep
  std::string heuristic;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;

  std::filesystem::path directory(const std::filesystem::path& root) const;
};

std::vector<Cell> expand_cells(const ExperimentSpec& spec);

// The single-cell spec echoed into a run directory.
ExperimentSpec cell_spec(const ExperimentSpec& spec, const Cell& cell);
SimulationConfig simulation_config(const ExperimentSpec& spec, const Cell& cell);

// Writes config.txt, metrics.csv, queries.csv and summary.json.
void write_run_artifacts(const std::filesystem::path& dir,
                         const ExperimentSpec& spec, const Cell& cell,
                         const SimulationResult& result);

struct RunOutcome {
  std::size_t completed = 0;
  std::vector<std::string> failures;  // "label seed N: message"
};

// Runs every cell (up to spec.workers in parallel), then writes the aggregate
// table and tidy curves into spec.output. Failed cells get an error.txt.
RunOutcome run_experiment(const ExperimentSpec& spec, std::ostream* log);

struct RunRecord {
  std::string label;
  std::uint64_t seed = 0;
  double total_queries = 0.0;
  std::vector<StepRecord> steps;
};

// Reads one run directory. Throws Error naming the directory when malformed.
RunRecord read_run(const std::filesystem::path& dir);

struct Report {
  AggregateTable table;
  std::vector<LearningCurve> curves;
};

// Collects run directories (searching recursively below each argument),
// recomputes AUC of queries vs test H@1, and writes aggregate.csv,
// aggregate.txt and curves.csv into `output`.
Report report_runs(const std::vector<std::filesystem::path>& dirs,
                   const std::filesystem::path& output);

// Synthetic dataset to TSV: left/right triples, all ground-truth alignments
// and a train/test split.
void export_synthetic(const DatasetSpec& spec, const std::filesystem::path& dir);

}  // namespace ealearn
