#include "holmes/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace holmes {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

long long parse_int(const std::string& s, const fs::path& file) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(file.string() + ": expected an integer, got '" + s + "'");
  }
}

double parse_real(const std::string& s, const fs::path& file) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(file.string() + ": expected a number, got '" + s + "'");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tasks

std::string TaskSpec::tag() const {
  if (kind == TaskKind::kSwitching) return "switching";
  return "compositional-L" + std::to_string(compositional.levels);
}

GeneratedTask TaskSpec::generate(std::uint64_t seed) const {
  if (kind == TaskKind::kSwitching) {
    auto spec = switching;
    spec.seed = seed;
    return generate_switching(spec);
  }
  auto spec = compositional;
  spec.seed = seed;
  return generate_compositional(spec);
}

TaskSpec TaskSpec::compositional_task(int levels) {
  TaskSpec t;
  t.kind = TaskKind::kCompositional;
  t.compositional.levels = levels;
  return t;
}

TaskSpec TaskSpec::switching_task() {
  TaskSpec t;
  t.kind = TaskKind::kSwitching;
  return t;
}

EntropyMode default_entropy_mode(TaskKind kind) {
  return kind == TaskKind::kSwitching ? EntropyMode::kRaw : EntropyMode::kNormalized;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<std::pair<std::string, double>> Evaluation::metrics() const {
  std::vector<std::pair<std::string, double>> out;
  out.emplace_back("trials", static_cast<double>(trials));
  out.emplace_back("insufficient_data", insufficient_data ? 1.0 : 0.0);
  if (trials == 0) return out;
  out.emplace_back("accuracy", accuracy);
  out.emplace_back("asymptotic_accuracy", asymptotic_accuracy);
  if (analysis_depth) out.emplace_back("analysis_depth", *analysis_depth);
  if (entropy.sufficient) {
    out.emplace_back("entropy", entropy.average);
    out.emplace_back("clusters_per_label", entropy.clusters_per_label);
    out.emplace_back("cluster_count", static_cast<double>(cluster_count));
  }
  double recall = 0.0, precision = 0.0, f1 = 0.0;
  int valid = 0;
  for (const auto& r : transfer) {
    if (!r.valid) continue;
    const std::string suffix = "_l" + std::to_string(r.level);
    out.emplace_back("transfer_recall" + suffix, r.recall);
    out.emplace_back("transfer_precision" + suffix, r.precision);
    out.emplace_back("transfer_f1" + suffix, r.f1);
    out.emplace_back("transfer_depth" + suffix, r.depth_used);
    recall += r.recall;
    precision += r.precision;
    f1 += r.f1;
    ++valid;
  }
  if (valid > 0) {
    out.emplace_back("transfer_recall", recall / valid);
    out.emplace_back("transfer_precision", precision / valid);
    out.emplace_back("transfer_f1", f1 / valid);
  }
  return out;
}

std::string_view to_string(PartitionSource source) {
  return source == PartitionSource::kOnline ? "online" : "traced";
}

PartitionSource parse_partition_source(std::string_view name) {
  if (name == "online") return PartitionSource::kOnline;
  if (name == "traced") return PartitionSource::kTraced;
  throw std::invalid_argument("unknown partition source '" + std::string(name) + "'");
}

AssignmentsByDepth assignment_table(const RunResult& run, PartitionSource source) {
  const int depth = max_path_depth(run);
  AssignmentsByDepth table;
  table.reserve(static_cast<std::size_t>(depth));
  if (source == PartitionSource::kOnline) {
    for (int d = 0; d < depth; ++d) table.push_back(online_assignments(run, d));
    return table;
  }
  const auto lineages = trace_lineages(run);
  for (int d = 0; d < depth; ++d) table.push_back(posterior_assignments(run, d, lineages));
  return table;
}

Evaluation evaluate(const RunResult& run, const GeneratedTask& task, const AssignmentsByDepth& table,
                    EntropyMode mode) {
  Evaluation eval;
  eval.trials = run.size();
  if (static_cast<Eigen::Index>(run.size()) != task.num_trials()) {
    throw std::invalid_argument("evaluate: run and task differ in trial count");
  }
  if (run.empty()) {
    eval.entropy.reason = "no trials";
    return eval;
  }
  const auto predicted = predictions(run);
  const auto outcomes = task.outcomes();
  eval.accuracy = outcome_accuracy(predicted, outcomes);
  eval.asymptotic_accuracy = outcome_accuracy(predicted, outcomes, asymptotic_window(run.size()));

  const int levels = task.kind == TaskKind::kCompositional ? task.levels : 0;
  eval.analysis_depth = select_analysis_level(table, task.kind, levels);
  if (eval.analysis_depth) {
    const auto& assignments = table[static_cast<std::size_t>(*eval.analysis_depth)];
    const auto labels = task.kind == TaskKind::kCompositional ? task.factor(task.levels)
                                                             : task.context_ids();
    eval.entropy = within_label_entropy(assignments, labels, mode);
    eval.cluster_count = cluster_count(assignments);
  } else {
    eval.entropy.reason = "no depth with enough valid assignments";
  }
  if (task.kind == TaskKind::kCompositional) {
    for (int level = 2; level <= task.levels; ++level) {
      const auto factor = task.factor(level);
      eval.transfer.push_back(one_shot_transfer(table, factor, level));
    }
  }
  eval.insufficient_data = !eval.entropy.sufficient;
  return eval;
}

Evaluation evaluate(const RunResult& run, const GeneratedTask& task) {
  return evaluate(run, task, assignment_table(run), default_entropy_mode(task.kind));
}

// ---------------------------------------------------------------------------
// Persistence

void write_task_csv(const fs::path& path, const GeneratedTask& task) {
  auto out = open_out(path);
  const Eigen::Index features = task.observations.rows() - 1;
  out << "trial";
  for (Eigen::Index f = 0; f < features; ++f) out << ",f" << f;
  out << ",outcome";
  if (task.kind == TaskKind::kCompositional) {
    for (int l = 1; l <= task.levels; ++l) out << ",level" << l;
  } else {
    out << ",context,value";
  }
  out << ",context_id\n";
  for (Eigen::Index t = 0; t < task.num_trials(); ++t) {
    const auto& truth = task.truth[static_cast<std::size_t>(t)];
    out << t;
    for (Eigen::Index f = 0; f <= features; ++f) out << ',' << int(task.observations(f, t));
    if (task.kind == TaskKind::kCompositional) {
      for (int v : truth.level_values) out << ',' << v;
    } else {
      out << ',' << truth.rule << ',' << truth.rewarded_value;
    }
    out << ',' << truth.context_id << '\n';
  }
}

GeneratedTask read_task_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty task file");
  const auto header = split(line);
  if (header.empty() || header[0] != "trial") {
    throw std::runtime_error(path.string() + ": missing 'trial' header");
  }
  const auto outcome_col = std::find(header.begin(), header.end(), "outcome") - header.begin();
  if (outcome_col == static_cast<long>(header.size())) {
    throw std::runtime_error(path.string() + ": missing 'outcome' column");
  }
  GeneratedTask task;
  const bool switching = std::find(header.begin(), header.end(), "context") != header.end();
  task.kind = switching ? TaskKind::kSwitching : TaskKind::kCompositional;
  const std::size_t features = static_cast<std::size_t>(outcome_col) - 1;
  const std::size_t truth_cols = header.size() - static_cast<std::size_t>(outcome_col) - 2;
  if (!switching) task.levels = static_cast<int>(truth_cols);
  if (header.back() != "context_id") throw std::runtime_error(path.string() + ": missing context_id");

  std::vector<std::vector<std::uint8_t>> columns;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(columns.size()) +
                               " has " + std::to_string(cells.size()) + " fields, expected " +
                               std::to_string(header.size()));
    }
    std::vector<std::uint8_t> col;
    for (std::size_t f = 0; f <= features; ++f) {
      const auto v = parse_int(cells[1 + f], path);
      if (v != 0 && v != 1) throw std::runtime_error(path.string() + ": non-binary feature value");
      col.push_back(static_cast<std::uint8_t>(v));
    }
    TrialGroundTruth truth;
    const std::size_t base = static_cast<std::size_t>(outcome_col) + 1;
    if (switching) {
      truth.rule = static_cast<int>(parse_int(cells[base], path));
      truth.rewarded_value = static_cast<int>(parse_int(cells[base + 1], path));
    } else {
      for (std::size_t l = 0; l < truth_cols; ++l) {
        truth.level_values.push_back(static_cast<int>(parse_int(cells[base + l], path)));
      }
    }
    truth.context_id = static_cast<int>(parse_int(cells.back(), path));
    truth.outcome = col.back();
    truth.outcome_clean = truth.outcome;
    task.truth.push_back(std::move(truth));
    columns.push_back(std::move(col));
  }
  task.observations.resize(static_cast<Eigen::Index>(features + 1),
                           static_cast<Eigen::Index>(columns.size()));
  for (std::size_t t = 0; t < columns.size(); ++t) {
    for (std::size_t f = 0; f <= features; ++f) {
      task.observations(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(t)) = columns[t][f];
    }
  }
  return task;
}

void write_trials_csv(const fs::path& path, const RunResult& run, const GeneratedTask& task,
                      const AssignmentsByDepth& table) {
  auto out = open_out(path);
  out << "trial,predicted,binarized,outcome,depth_used";
  for (std::size_t d = 0; d < table.size(); ++d) out << ",assign_d" << d;
  out << '\n';
  for (std::size_t t = 0; t < run.size(); ++t) {
    int depth_used = 0;
    for (const auto& level : table) depth_used += level[t] >= 0 ? 1 : 0;
    out << t << ',' << format_double(run.trials[t].predicted, "%.10f") << ','
        << run.trials[t].binarized << ',' << task.truth[t].outcome << ',' << depth_used;
    for (const auto& level : table) out << ',' << level[t];
    out << '\n';
  }
}

TrialsFile read_trials_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty trials file");
  const auto header = split(line);
  if (header.size() < 5 || header[0] != "trial" || header[1] != "predicted") {
    throw std::runtime_error(path.string() + ": not a trials file");
  }
  TrialsFile file;
  const std::size_t depths = header.size() - 5;
  file.assignments.resize(depths);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw std::runtime_error(path.string() + ": ragged row");
    file.predicted.push_back(parse_real(cells[1], path));
    file.outcome.push_back(static_cast<int>(parse_int(cells[3], path)));
    for (std::size_t d = 0; d < depths; ++d) {
      file.assignments[d].push_back(parse_int(cells[5 + d], path));
    }
  }
  return file;
}

namespace {

nlohmann::ordered_json transfer_json(const TransferReport& r) {
  nlohmann::ordered_json j;
  j["level"] = r.level;
  j["valid"] = r.valid;
  if (!r.valid) {
    j["failure"] = r.failure;
    return j;
  }
  j["depth_used"] = r.depth_used;
  j["anchor_trial"] = r.anchor_trial;
  j["anchor_cluster"] = r.anchor_cluster;
  j["recall"] = r.recall;
  j["precision"] = r.precision;
  j["f1"] = r.f1;
  j["precision_undefined"] = r.precision_undefined;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["tn"] = r.tn;
  return j;
}

}  // namespace

nlohmann::ordered_json summary_json(const TaskSpec& task, ModelKind model,
                                    const EnsembleConfig& config, const Evaluation& eval,
                                    int weight_resets, PartitionSource partition) {
  nlohmann::ordered_json j;
  j["task"] = task.tag();
  j["model"] = std::string(to_string(model));
  j["alpha"] = config.alpha;
  j["omega"] = config.omega;
  j["particles"] = config.num_particles;
  j["seed"] = config.seed;
  j["mask_outcome_in_weight"] = config.mask_outcome_in_weight;
  j["partition"] = std::string(to_string(partition));
  j["trials"] = eval.trials;
  j["insufficient_data"] = eval.insufficient_data;
  if (eval.trials > 0) {
    j["accuracy"] = eval.accuracy;
    j["asymptotic_accuracy"] = eval.asymptotic_accuracy;
  }
  if (eval.analysis_depth) {
    j["analysis_depth"] = *eval.analysis_depth;
  } else {
    j["analysis_depth"] = nullptr;
  }
  nlohmann::ordered_json entropy;
  entropy["mode"] = eval.entropy.mode == EntropyMode::kRaw ? "raw" : "normalized";
  entropy["sufficient"] = eval.entropy.sufficient;
  if (eval.entropy.sufficient) {
    entropy["average"] = eval.entropy.average;
    entropy["clusters_per_label"] = eval.entropy.clusters_per_label;
    entropy["coverage"] = eval.entropy.coverage;
    auto& labels = entropy["labels"] = nlohmann::ordered_json::array();
    for (const auto& le : eval.entropy.labels) {
      labels.push_back({{"label", le.label},
                        {"trials", le.trials},
                        {"clusters", le.clusters},
                        {"entropy", le.entropy}});
    }
  } else {
    entropy["reason"] = eval.entropy.reason;
  }
  j["entropy"] = entropy;
  j["cluster_count"] = eval.cluster_count;
  auto& transfer = j["transfer"] = nlohmann::ordered_json::array();
  for (const auto& r : eval.transfer) transfer.push_back(transfer_json(r));
  j["weight_resets"] = weight_resets;
  auto& metrics = j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [name, value] : eval.metrics()) metrics[name] = value;
  return j;
}

void write_transfer_csv(const fs::path& path, const std::vector<TransferReport>& reports) {
  auto out = open_out(path);
  out << "level,valid,depth_used,anchor_trial,anchor_cluster,recall,precision,f1,"
         "precision_undefined,tp,fp,fn,tn\n";
  for (const auto& r : reports) {
    out << r.level << ',' << (r.valid ? 1 : 0) << ',' << r.depth_used << ',' << r.anchor_trial
        << ',' << r.anchor_cluster << ',' << format_double(r.recall) << ','
        << format_double(r.precision) << ',' << format_double(r.f1) << ','
        << (r.precision_undefined ? 1 : 0) << ',' << r.tp << ',' << r.fp << ',' << r.fn << ','
        << r.tn << '\n';
  }
}

std::vector<TransferReport> transfer_from_files(const GeneratedTask& task, const TrialsFile& trials) {
  if (task.kind != TaskKind::kCompositional) {
    throw std::invalid_argument("transfer needs a compositional task");
  }
  if (trials.predicted.size() != task.truth.size()) {
    throw std::invalid_argument("trials file and task differ in trial count");
  }
  std::vector<TransferReport> reports;
  for (int level = 2; level <= task.levels; ++level) {
    const auto factor = task.factor(level);
    reports.push_back(one_shot_transfer(trials.assignments, factor, level));
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Single runs

RunOutput run_and_evaluate(const GeneratedTask& task, const TaskSpec& spec, ModelKind model,
                           const EnsembleConfig& config, PartitionSource source) {
  (void)spec;
  RunOutput out;
  out.run = run_sequence(model, config, task.observations);
  out.partition = source;
  out.table = assignment_table(out.run, source);
  out.evaluation = evaluate(out.run, task, out.table, default_entropy_mode(task.kind));
  return out;
}

void write_run_artifacts(const fs::path& dir, const RunOutput& out, const GeneratedTask& task,
                         const TaskSpec& spec, ModelKind model) {
  fs::create_directories(dir);
  write_trials_csv(dir / "trials.csv", out.run, task, out.table);
  {
    auto js = open_out(dir / "summary.json");
    js << summary_json(spec, model, out.run.config, out.evaluation, out.run.weight_resets,
                       out.partition)
              .dump(2)
       << '\n';
  }
  open_out(dir / ".done") << "ok\n";
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<ParameterPoint> sample_parameters(int count, double lo, double hi, std::uint64_t seed) {
  Rng rng = derive(seed, Stream::kSweepParameters);
  std::vector<ParameterPoint> points(static_cast<std::size_t>(std::max(count, 0)));
  for (auto& p : points) {
    p.alpha = lo + (hi - lo) * rng.uniform();
    p.omega = lo + (hi - lo) * rng.uniform();
  }
  return points;
}

std::vector<ParameterPoint> SweepSpec::points() const {
  if (!parameters.empty()) return parameters;
  return sample_parameters(combinations, param_lo, param_hi, sweep_seed);
}

std::optional<double> CellRecord::metric(const std::string& name) const {
  for (const auto& [n, v] : metrics) {
    if (n == name) return v;
  }
  return std::nullopt;
}

std::vector<MetricRow> long_rows(const std::vector<CellRecord>& cells) {
  std::vector<MetricRow> rows;
  for (const auto& c : cells) {
    if (c.failed) continue;
    for (const auto& [name, value] : c.metrics) {
      rows.push_back({c.task, std::string(to_string(c.model)), c.alpha, c.omega, c.seed, name, value});
    }
  }
  return rows;
}

Aggregates aggregate(const std::vector<MetricRow>& rows) {
  using ComboKey = std::tuple<std::string, std::string, std::string, double, double>;
  std::map<ComboKey, std::pair<double, std::size_t>> combos;
  for (const auto& r : rows) {
    auto& [sum, n] = combos[{r.task, r.model, r.metric, r.alpha, r.omega}];
    sum += r.value;
    ++n;
  }
  Aggregates out;
  using MetricKey = std::tuple<std::string, std::string, std::string>;
  std::map<MetricKey, std::vector<double>> across;
  for (const auto& [key, acc] : combos) {
    const auto& [task, model, metric, alpha, omega] = key;
    const double mean = acc.first / static_cast<double>(acc.second);
    out.per_combination.push_back({task, model, metric, alpha, omega, mean, acc.second});
    across[{task, model, metric}].push_back(mean);
  }
  for (const auto& [key, means] : across) {
    const auto& [task, model, metric] = key;
    out.across.push_back({task, model, metric, summarize(means)});
  }
  return out;
}

std::string parameter_dir(double alpha, double omega) {
  return format_double(alpha, "%.6f") + "_" + format_double(omega, "%.6f");
}

int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HOLMES_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(threads, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

namespace {

struct CellPlan {
  const TaskSpec* task = nullptr;
  ModelKind model = ModelKind::kFlat;
  ParameterPoint point;
  std::uint64_t seed = 0;
};

std::vector<std::pair<std::string, double>> metrics_from_summary(const fs::path& file) {
  auto in = open_in(file);
  const auto j = nlohmann::ordered_json::parse(in);
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [name, value] : j.at("metrics").items()) {
    out.emplace_back(name, value.get<double>());
  }
  return out;
}

}  // namespace

std::vector<CellRecord> run_sweep(const SweepSpec& spec, const std::optional<fs::path>& out_root) {
  const auto points = spec.points();
  std::vector<CellPlan> plan;
  for (const auto& task : spec.tasks) {
    for (ModelKind model : spec.models) {
      for (const auto& point : points) {
        for (int s = 0; s < spec.seeds; ++s) {
          plan.push_back({&task, model, point, spec.first_seed + static_cast<std::uint64_t>(s)});
        }
      }
    }
  }
  std::vector<CellRecord> records(plan.size());
  const auto experiment_dir = out_root ? std::optional<fs::path>(*out_root / spec.experiment)
                                       : std::nullopt;

  parallel_for(plan.size(), worker_count(spec.workers), [&](std::size_t i) {
    const CellPlan& cell = plan[i];
    CellRecord& rec = records[i];
    rec.task = cell.task->tag();
    rec.model = cell.model;
    rec.alpha = cell.point.alpha;
    rec.omega = cell.point.omega;
    rec.seed = cell.seed;
    std::optional<fs::path> dir;
    if (experiment_dir) {
      dir = *experiment_dir / rec.task / std::string(to_string(cell.model)) /
            parameter_dir(cell.point.alpha, cell.point.omega) / std::to_string(cell.seed);
    }
    try {
      if (dir && fs::exists(*dir / ".done")) {
        rec.metrics = metrics_from_summary(*dir / "summary.json");
        return;
      }
      EnsembleConfig config = spec.base;
      config.alpha = cell.point.alpha;
      config.omega = cell.point.omega;
      config.seed = cell.seed;
      const auto task = cell.task->generate(cell.seed);
      const auto out = run_and_evaluate(task, *cell.task, cell.model, config, spec.partition);
      rec.metrics = out.evaluation.metrics();
      if (dir) write_run_artifacts(*dir, out, task, *cell.task, cell.model);
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
  });

  if (experiment_dir) {
    const auto rows = long_rows(records);
    write_long_csv(*experiment_dir / "long.csv", rows);
    write_aggregates(*experiment_dir, aggregate(rows));
    auto failures = open_out(*experiment_dir / "failures.csv");
    failures << "task,model,alpha,omega,seed,error\n";
    for (const auto& r : records) {
      if (!r.failed) continue;
      std::string error = r.error;
      std::replace(error.begin(), error.end(), ',', ';');
      failures << r.task << ',' << to_string(r.model) << ',' << format_double(r.alpha) << ','
               << format_double(r.omega) << ',' << r.seed << ',' << error << '\n';
    }
  }
  return records;
}

std::optional<ParameterPoint> best_parameters(const std::vector<CellRecord>& cells,
                                              const std::string& task, ModelKind model,
                                              const std::string& metric) {
  std::map<std::pair<double, double>, std::pair<double, int>> means;
  std::vector<std::pair<double, double>> order;
  for (const auto& c : cells) {
    if (c.failed || c.task != task || c.model != model) continue;
    const auto v = c.metric(metric);
    if (!v) continue;
    const auto key = std::make_pair(c.alpha, c.omega);
    auto [it, inserted] = means.try_emplace(key, 0.0, 0);
    if (inserted) order.push_back(key);
    it->second.first += *v;
    ++it->second.second;
  }
  std::optional<ParameterPoint> best;
  double best_value = -std::numeric_limits<double>::infinity();
  for (const auto& key : order) {
    const auto& [sum, n] = means.at(key);
    const double mean = sum / n;
    if (mean > best_value) {
      best_value = mean;
      best = ParameterPoint{key.first, key.second};
    }
  }
  return best;
}

void write_long_csv(const fs::path& path, const std::vector<MetricRow>& rows) {
  auto out = open_out(path);
  out << "task,model,alpha,omega,seed,metric,value\n";
  for (const auto& r : rows) {
    out << r.task << ',' << r.model << ',' << format_double(r.alpha) << ','
        << format_double(r.omega) << ',' << r.seed << ',' << r.metric << ','
        << format_double(r.value) << '\n';
  }
}

std::vector<MetricRow> read_long_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "task,model,alpha,omega,seed,metric,value") {
    throw std::runtime_error(path.string() + ": not a long-format metrics file");
  }
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 7) throw std::runtime_error(path.string() + ": ragged row");
    rows.push_back({c[0], c[1], parse_real(c[2], path), parse_real(c[3], path),
                    static_cast<std::uint64_t>(parse_int(c[4], path)), c[5],
                    parse_real(c[6], path)});
  }
  return rows;
}

void write_aggregates(const fs::path& dir, const Aggregates& aggregates) {
  {
    auto out = open_out(dir / "aggregate_combinations.csv");
    out << "task,model,alpha,omega,metric,mean,seeds\n";
    for (const auto& c : aggregates.per_combination) {
      out << c.task << ',' << c.model << ',' << format_double(c.alpha) << ','
          << format_double(c.omega) << ',' << c.metric << ',' << format_double(c.mean) << ','
          << c.seeds << '\n';
    }
  }
  auto out = open_out(dir / "aggregate.csv");
  out << "task,model,metric,combinations,mean,sd,ci_low,ci_high\n";
  for (const auto& a : aggregates.across) {
    out << a.task << ',' << a.model << ',' << a.metric << ',' << a.stats.n << ','
        << format_double(a.stats.mean) << ',' << format_double(a.stats.sd) << ','
        << format_double(a.stats.ci_low) << ',' << format_double(a.stats.ci_high) << '\n';
  }
}

}  // namespace holmes
