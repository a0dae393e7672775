#include "ealearn/experiment.h"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "ealearn/dataset_io.h"
#include "ealearn/error.h"
#include "text_util.h"

namespace ealearn {
namespace {

namespace fs = std::filesystem;
using detail::parse_bool;
using detail::parse_number;
using detail::trim;

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t pos = text.find(',', start);
    const std::string_view item =
        trim(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (!item.empty()) out.emplace_back(item);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string format_double(double v) { return fmt::format("{}", v); }

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(items[i]);
    } else {
      out += fmt::format("{}", items[i]);
    }
  }
  return out;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void set_spec_value(ExperimentSpec& spec, const std::string& raw_key,
                    const std::string& raw_value) {
  const std::string key(trim(raw_key));
  const std::string value(trim(raw_value));
  DatasetSpec& d = spec.dataset;
  SyntheticParams& s = d.synthetic;
  ModelConfig& m = spec.model;

  if (key == "dataset.source") {
    if (value != "synthetic" && value != "files") {
      throw ValidationError("dataset.source must be 'synthetic' or 'files'");
    }
    d.source = value;
  } else if (key == "dataset.name") {
    d.name = value;
  } else if (key == "synthetic.n_core") {
    s.n_core = parse_number<std::size_t>(value, key);
  } else if (key == "synthetic.n_exclusive_left") {
    s.n_exclusive_left = parse_number<std::size_t>(value, key);
  } else if (key == "synthetic.n_exclusive_right") {
    s.n_exclusive_right = parse_number<std::size_t>(value, key);
  } else if (key == "synthetic.n_relations") {
    s.n_relations = parse_number<std::size_t>(value, key);
  } else if (key == "synthetic.edge_factor") {
    s.edge_factor = parse_number<double>(value, key);
  } else if (key == "synthetic.perturbation") {
    s.perturbation = parse_number<double>(value, key);
  } else if (key == "synthetic.seed") {
    s.seed = parse_number<std::uint64_t>(value, key);
  } else if (key == "files.left_triples") {
    d.left_triples = value;
  } else if (key == "files.right_triples") {
    d.right_triples = value;
  } else if (key == "files.train_alignments") {
    d.train_alignments = value;
  } else if (key == "files.test_alignments") {
    d.test_alignments = value;
  } else if (key == "split.train_fraction") {
    d.train_fraction = parse_number<double>(value, key);
  } else if (key == "split.validation_fraction") {
    d.validation_fraction = parse_number<double>(value, key);
  } else if (key == "split.seed") {
    d.split_seed = parse_number<std::uint64_t>(value, key);
  } else if (key == "model.embedding_dim") {
    m.embedding_dim = parse_number<int>(value, key);
  } else if (key == "model.num_layers") {
    m.num_layers = parse_number<int>(value, key);
  } else if (key == "model.dropout_rate") {
    spec.dropout_rates.clear();
    for (const std::string& item : split_list(value)) {
      spec.dropout_rates.push_back(parse_number<double>(item, key));
    }
  } else if (key == "model.margin") {
    m.margin = parse_number<double>(value, key);
  } else if (key == "model.negatives_per_positive") {
    m.negatives_per_positive = parse_number<int>(value, key);
  } else if (key == "model.learning_rate") {
    m.learning_rate = parse_number<double>(value, key);
  } else if (key == "model.optimizer") {
    m.optimizer = parse_optimizer(value);
  } else if (key == "model.max_epochs") {
    m.max_epochs = parse_number<int>(value, key);
  } else if (key == "model.eval_every") {
    m.eval_every = parse_number<int>(value, key);
  } else if (key == "model.patience") {
    m.patience = parse_number<int>(value, key);
  } else if (key == "model.softmax_temperature") {
    m.softmax_temperature = parse_number<double>(value, key);
  } else if (key == "simulation.budget") {
    spec.budget = parse_number<std::size_t>(value, key);
  } else if (key == "simulation.query_budget") {
    spec.query_budget = parse_number<std::size_t>(value, key);
  } else if (key == "simulation.exclusive_removal") {
    spec.exclusive_removal = parse_bool(value, key);
  } else if (key == "heuristics") {
    spec.heuristics = split_list(value);
  } else if (key.starts_with("heuristic.")) {
    const std::string rest = key.substr(std::string("heuristic.").size());
    const std::size_t dot = rest.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == rest.size()) {
      throw ValidationError(fmt::format(
          "expected heuristic.<name>.<parameter>, got '{}'", key));
    }
    spec.heuristic_params[rest.substr(0, dot)][rest.substr(dot + 1)] = value;
  } else if (key == "seeds") {
    spec.seeds.clear();
    for (const std::string& item : split_list(value)) {
      spec.seeds.push_back(parse_number<std::uint64_t>(item, key));
    }
  } else if (key == "output") {
    spec.output = value;
  } else if (key == "workers") {
    spec.workers = parse_number<int>(value, key);
  } else {
    throw ValidationError(fmt::format("unknown configuration key '{}'", key));
  }
}

ExperimentSpec parse_spec(std::istream& in, const std::string& source_name) {
  ExperimentSpec spec;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(source_name, line_no, "expected 'key = value'");
    }
    try {
      set_spec_value(spec, std::string(line.substr(0, eq)),
                     std::string(line.substr(eq + 1)));
    } catch (const ValidationError& e) {
      throw ParseError(source_name, line_no, e.what());
    }
  }
  return spec;
}

ExperimentSpec load_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  ExperimentSpec spec = parse_spec(in, path.string());
  // Relative dataset paths are resolved against the config file.
  const fs::path base = path.parent_path();
  for (fs::path* p : {&spec.dataset.left_triples, &spec.dataset.right_triples,
                      &spec.dataset.train_alignments,
                      &spec.dataset.test_alignments}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return spec;
}

void apply_overrides(ExperimentSpec& spec,
                     const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(fmt::format("override '{}' is not key=value", o));
    }
    set_spec_value(spec, o.substr(0, eq), o.substr(eq + 1));
  }
}

std::string render_spec(const ExperimentSpec& spec) {
  const DatasetSpec& d = spec.dataset;
  const SyntheticParams& s = d.synthetic;
  const ModelConfig& m = spec.model;
  std::string out;
  auto put = [&out](std::string_view key, const std::string& value) {
    out += fmt::format("{} = {}\n", key, value);
  };
  out += "# dataset\n";
  put("dataset.source", d.source);
  put("dataset.name", d.name);
  if (d.source == "synthetic") {
    put("synthetic.n_core", std::to_string(s.n_core));
    put("synthetic.n_exclusive_left", std::to_string(s.n_exclusive_left));
    put("synthetic.n_exclusive_right", std::to_string(s.n_exclusive_right));
    put("synthetic.n_relations", std::to_string(s.n_relations));
    put("synthetic.edge_factor", format_double(s.edge_factor));
    put("synthetic.perturbation", format_double(s.perturbation));
    put("synthetic.seed", std::to_string(s.seed));
  } else {
    put("files.left_triples", d.left_triples.string());
    put("files.right_triples", d.right_triples.string());
    put("files.train_alignments", d.train_alignments.string());
    if (!d.test_alignments.empty()) {
      put("files.test_alignments", d.test_alignments.string());
    }
  }
  put("split.train_fraction", format_double(d.train_fraction));
  put("split.validation_fraction", format_double(d.validation_fraction));
  put("split.seed", std::to_string(d.split_seed));
  out += "\n# model\n";
  put("model.embedding_dim", std::to_string(m.embedding_dim));
  put("model.num_layers", std::to_string(m.num_layers));
  put("model.dropout_rate", join(spec.dropout_rates));
  put("model.margin", format_double(m.margin));
  put("model.negatives_per_positive", std::to_string(m.negatives_per_positive));
  put("model.learning_rate", format_double(m.learning_rate));
  put("model.optimizer", std::string(optimizer_name(m.optimizer)));
  put("model.max_epochs", std::to_string(m.max_epochs));
  put("model.eval_every", std::to_string(m.eval_every));
  put("model.patience", std::to_string(m.patience));
  put("model.softmax_temperature", format_double(m.softmax_temperature));
  out += "\n# simulation\n";
  put("simulation.budget", std::to_string(spec.budget));
  put("simulation.query_budget", std::to_string(spec.query_budget));
  put("simulation.exclusive_removal", spec.exclusive_removal ? "true" : "false");
  out += "\n# sweep\n";
  put("heuristics", join(spec.heuristics));
  for (const auto& [name, params] : spec.heuristic_params) {
    for (const auto& [k, v] : params) put(fmt::format("heuristic.{}.{}", name, k), v);
  }
  put("seeds", join(spec.seeds));
  put("workers", std::to_string(spec.workers));
  return out;
}

void validate(const ExperimentSpec& spec) {
  if (spec.heuristics.empty()) throw ValidationError("no heuristics configured");
  if (spec.seeds.empty()) throw ValidationError("no seeds configured");
  if (spec.dropout_rates.empty()) throw ValidationError("no dropout rate configured");
  if (spec.budget < 1) throw ValidationError("simulation.budget must be at least 1");
  if (spec.workers < 1) throw ValidationError("workers must be at least 1");
  for (double rate : spec.dropout_rates) {
    ModelConfig m = spec.model;
    m.dropout_rate = rate;
    validate(m);
  }
  for (const std::string& h : spec.heuristics) {
    auto it = spec.heuristic_params.find(h);
    make_selector(h, it == spec.heuristic_params.end() ? ParamMap{} : it->second);
  }
  for (const auto& [name, params] : spec.heuristic_params) {
    if (std::find(heuristic_names().begin(), heuristic_names().end(), name) ==
        heuristic_names().end()) {
      throw ValidationError(fmt::format("parameters given for unknown heuristic '{}'", name));
    }
  }
  const DatasetSpec& d = spec.dataset;
  if (d.source == "files") {
    if (d.left_triples.empty() || d.right_triples.empty() ||
        d.train_alignments.empty()) {
      throw ValidationError(
          "files datasets need files.left_triples, files.right_triples and "
          "files.train_alignments");
    }
  }
  if (!(d.validation_fraction > 0.0 && d.validation_fraction < 1.0)) {
    throw ValidationError("split.validation_fraction must be in (0, 1)");
  }
  if (!(d.train_fraction > 0.0 && d.train_fraction < 1.0)) {
    throw ValidationError("split.train_fraction must be in (0, 1)");
  }
}

Dataset load_dataset(const DatasetSpec& spec) {
  Dataset out;
  if (spec.source == "synthetic") {
    SyntheticDataset syn = generate_synthetic_pair(spec.synthetic);
    out.graphs = std::move(syn.graphs);
    out.alignments = split_alignments(std::move(syn.ground_truth),
                                      spec.train_fraction,
                                      spec.validation_fraction, spec.split_seed);
  } else {
    out.graphs.left = load_graph(spec.left_triples).graph;
    out.graphs.right = load_graph(spec.right_triples).graph;
    PairSet train = load_alignments(spec.train_alignments, out.graphs);
    if (spec.test_alignments.empty()) {
      out.alignments = split_alignments(std::move(train), spec.train_fraction,
                                        spec.validation_fraction, spec.split_seed);
    } else {
      PairSet test = load_alignments(spec.test_alignments, out.graphs);
      out.alignments = carve_validation(std::move(train), std::move(test),
                                        spec.validation_fraction, spec.split_seed);
    }
  }
  validate(out.alignments, out.graphs);
  return out;
}

fs::path Cell::directory(const fs::path& root) const {
  return root / label / fmt::format("seed-{}", seed);
}

std::vector<Cell> expand_cells(const ExperimentSpec& spec) {
  std::vector<Cell> cells;
  const bool sweep = spec.dropout_rates.size() > 1;
  for (const std::string& h : spec.heuristics) {
    for (double rate : spec.dropout_rates) {
      for (std::uint64_t seed : spec.seeds) {
        Cell c;
        c.heuristic = h;
        c.dropout_rate = rate;
        c.seed = seed;
        c.label = sweep ? fmt::format("{}@{}", h, format_double(rate)) : h;
        cells.push_back(std::move(c));
      }
    }
  }
  return cells;
}

ExperimentSpec cell_spec(const ExperimentSpec& spec, const Cell& cell) {
  ExperimentSpec out = spec;
  out.heuristics = {cell.heuristic};
  out.dropout_rates = {cell.dropout_rate};
  out.seeds = {cell.seed};
  out.heuristic_params.clear();
  if (auto it = spec.heuristic_params.find(cell.heuristic);
      it != spec.heuristic_params.end()) {
    out.heuristic_params[cell.heuristic] = it->second;
  }
  out.workers = 1;
  return out;
}

SimulationConfig simulation_config(const ExperimentSpec& spec, const Cell& cell) {
  SimulationConfig c;
  c.budget = spec.budget;
  c.query_budget = spec.query_budget;
  c.heuristic = cell.heuristic;
  if (auto it = spec.heuristic_params.find(cell.heuristic);
      it != spec.heuristic_params.end()) {
    c.heuristic_params = it->second;
  }
  c.model = spec.model;
  c.model.dropout_rate = cell.dropout_rate;
  c.seed = cell.seed;
  c.exclusive_removal = spec.exclusive_removal;
  return c;
}

void write_run_artifacts(const fs::path& dir, const ExperimentSpec& spec,
                         const Cell& cell, const SimulationResult& result) {
  fs::create_directories(dir);
  {
    auto out = open_output(dir / "config.txt");
    out << "# single-run configuration; reproduce with: ealearn run --config "
           "config.txt --output <dir>\n";
    out << render_spec(cell_spec(spec, cell));
  }
  {
    auto out = open_output(dir / "metrics.csv");
    out << "step,queries,found_alignments,found_exclusives,test_h1,val_mrr\n";
    for (const StepRecord& r : result.steps) {
      out << fmt::format("{},{},{},{},{:.17g},{:.17g}\n", r.step, r.queries,
                         r.found_alignments, r.found_exclusives, r.test_h1,
                         r.validation_mrr);
    }
  }
  {
    auto out = open_output(dir / "queries.csv");
    out << "step,side,node,outcome\n";
    for (const QueryRecord& q : result.query_log) {
      out << q.step << ',' << side_name(q.node.side) << ',' << q.node.index
          << ',' << (q.aligned ? "aligned" : "exclusive") << '\n';
    }
  }
  std::vector<CurvePoint> points;
  for (const StepRecord& r : result.steps) {
    points.push_back({static_cast<double>(r.queries), r.test_h1});
  }
  nlohmann::ordered_json summary;
  summary["label"] = cell.label;
  summary["heuristic"] = cell.heuristic;
  summary["dropout_rate"] = cell.dropout_rate;
  summary["seed"] = cell.seed;
  summary["dataset"] = spec.dataset.name;
  summary["initial_pool"] = result.initial_pool;
  summary["total_queries"] = result.total_queries;
  summary["steps"] = result.steps.size();
  if (!points.empty()) {
    summary["auc_test_h1"] =
        auc(points, static_cast<double>(result.total_queries));
    summary["final_test_h1"] = result.steps.back().test_h1;
    summary["final_found_alignments"] = result.steps.back().found_alignments;
  }
  auto out = open_output(dir / "summary.json");
  out << summary.dump(2) << '\n';
}

RunOutcome run_experiment(const ExperimentSpec& spec, std::ostream* log) {
  validate(spec);
  const Dataset dataset = load_dataset(spec.dataset);
  const std::vector<Cell> cells = expand_cells(spec);
  fs::create_directories(spec.output);

  RunOutcome outcome;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      const fs::path dir = cell.directory(spec.output);
      try {
        const SimulationResult result =
            run_simulation(dataset, simulation_config(spec, cell));
        write_run_artifacts(dir, spec, cell, result);
        std::lock_guard lock(mu);
        ++outcome.completed;
        if (log) {
          *log << fmt::format("[{}/{}] {} seed {}: {} steps\n", outcome.completed,
                              cells.size(), cell.label, cell.seed,
                              result.steps.size());
        }
      } catch (const std::exception& e) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        std::ofstream(dir / "error.txt") << e.what() << '\n';
        std::lock_guard lock(mu);
        outcome.failures.push_back(
            fmt::format("{} seed {}: {}", cell.label, cell.seed, e.what()));
        if (log) *log << "FAILED " << outcome.failures.back() << '\n';
      }
    }
  };
  const int workers =
      std::max(1, std::min<int>(spec.workers, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (outcome.completed > 0) {
    std::vector<fs::path> dirs;
    for (const Cell& c : cells) {
      if (fs::exists(c.directory(spec.output) / "summary.json")) {
        dirs.push_back(c.directory(spec.output));
      }
    }
    const Report report = report_runs(dirs, spec.output);
    if (log) *log << format_aggregate_text(report.table);
  }
  return outcome;
}

RunRecord read_run(const fs::path& dir) {
  auto fail = [&dir](const std::string& what) {
    return Error(fmt::format("malformed run directory {}: {}", dir.string(), what));
  };
  if (!fs::exists(dir / "metrics.csv")) throw fail("missing metrics.csv");
  if (!fs::exists(dir / "summary.json")) throw fail("missing summary.json");
  RunRecord run;
  try {
    const auto summary = nlohmann::json::parse(read_file(dir / "summary.json"));
    run.label = summary.at("label").get<std::string>();
    run.seed = summary.at("seed").get<std::uint64_t>();
    run.total_queries = summary.at("total_queries").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw fail(fmt::format("summary.json: {}", e.what()));
  }
  std::istringstream metrics(read_file(dir / "metrics.csv"));
  std::string line;
  std::getline(metrics, line);
  if (trim(line) != "step,queries,found_alignments,found_exclusives,test_h1,val_mrr") {
    throw fail("unexpected metrics.csv header");
  }
  std::size_t line_no = 1;
  while (std::getline(metrics, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> f = split_list(line);
    if (f.size() != 6) throw fail(fmt::format("metrics.csv line {}", line_no));
    try {
      StepRecord r;
      r.step = parse_number<int>(f[0], "step");
      r.queries = parse_number<std::size_t>(f[1], "queries");
      r.found_alignments = parse_number<std::size_t>(f[2], "found_alignments");
      r.found_exclusives = parse_number<std::size_t>(f[3], "found_exclusives");
      r.test_h1 = parse_number<double>(f[4], "test_h1");
      r.validation_mrr = parse_number<double>(f[5], "val_mrr");
      run.steps.push_back(r);
    } catch (const ValidationError& e) {
      throw fail(fmt::format("metrics.csv line {}: {}", line_no, e.what()));
    }
  }
  if (run.steps.empty()) throw fail("metrics.csv has no steps");
  return run;
}

Report report_runs(const std::vector<fs::path>& dirs, const fs::path& output) {
  if (dirs.empty()) throw ValidationError("no run directories given");
  std::vector<fs::path> runs;
  for (const fs::path& d : dirs) {
    if (!fs::is_directory(d)) {
      throw Error(fmt::format("malformed run directory {}: not a directory", d.string()));
    }
    if (fs::exists(d / "metrics.csv")) {
      runs.push_back(d);
      continue;
    }
    std::vector<fs::path> found;
    for (const auto& entry : fs::recursive_directory_iterator(d)) {
      if (entry.is_regular_file() && entry.path().filename() == "metrics.csv") {
        found.push_back(entry.path().parent_path());
      }
    }
    if (found.empty()) {
      throw Error(fmt::format("malformed run directory {}: no metrics.csv found", d.string()));
    }
    std::sort(found.begin(), found.end());
    runs.insert(runs.end(), found.begin(), found.end());
  }

  Report report;
  std::map<std::string, std::vector<double>> aucs;
  for (const fs::path& dir : runs) {
    const RunRecord run = read_run(dir);
    LearningCurve curve;
    curve.heuristic = run.label;
    curve.seed = run.seed;
    for (const StepRecord& r : run.steps) {
      curve.points.push_back({static_cast<double>(r.queries), r.test_h1});
    }
    validate(curve);
    aucs[run.label].push_back(auc(curve.points, run.total_queries));
    report.curves.push_back(std::move(curve));
  }
  report.table = aggregate(aucs);
  fs::create_directories(output);
  write_aggregate_csv(report.table, output / "aggregate.csv");
  write_curves_csv(report.curves, output / "curves.csv");
  auto text = open_output(output / "aggregate.txt");
  text << format_aggregate_text(report.table);
  return report;
}

void export_synthetic(const DatasetSpec& spec, const fs::path& dir) {
  const SyntheticDataset syn = generate_synthetic_pair(spec.synthetic);
  const AlignmentSet split = split_alignments(
      syn.ground_truth, spec.train_fraction, spec.validation_fraction,
      spec.split_seed);
  fs::create_directories(dir);
  save_graph(syn.graphs.left, dir / "left_triples.tsv");
  save_graph(syn.graphs.right, dir / "right_triples.tsv");
  save_alignments(syn.ground_truth, syn.graphs, dir / "alignments.tsv");
  // Official-style split: validation is carved later from the train file.
  PairSet train = split.train;
  train.insert(train.end(), split.validation.begin(), split.validation.end());
  normalize(train);
  save_alignments(train, syn.graphs, dir / "train_alignments.tsv");
  save_alignments(split.test, syn.graphs, dir / "test_alignments.tsv");
}

}  // namespace ealearn
