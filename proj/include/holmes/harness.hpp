#ifndef HOLMES_HARNESS_HPP
#define HOLMES_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "holmes/inference.hpp"
#include "holmes/metrics.hpp"
#include "holmes/taskgen.hpp"

namespace holmes {

// ---------------------------------------------------------------------------
// Tasks

struct TaskSpec {
  TaskKind kind = TaskKind::kCompositional;
  CompositionalTaskSpec compositional;
  SwitchingTaskSpec switching;

  /// "compositional-L3" or "switching".
  [[nodiscard]] std::string tag() const;
  [[nodiscard]] GeneratedTask generate(std::uint64_t seed) const;

  static TaskSpec compositional_task(int levels);
  static TaskSpec switching_task();
};

EntropyMode default_entropy_mode(TaskKind kind);

// ---------------------------------------------------------------------------
// Evaluation of one run

struct Evaluation {
  std::size_t trials = 0;
  bool insufficient_data = true;
  double accuracy = 0.0;
  double asymptotic_accuracy = 0.0;
  std::optional<int> analysis_depth;
  EntropyReport entropy;
  std::size_t cluster_count = 0;
  std::vector<TransferReport> transfer;  // compositional levels 2..L

  /// Flattened (name, value) pairs, the unit of the long-format CSV.
  [[nodiscard]] std::vector<std::pair<std::string, double>> metrics() const;
};

/// Which per-trial partition the metrics read.
enum class PartitionSource {
  kOnline,  // majority over the resampled particles at each trial
  kTraced,  // majority over the final particles' traced histories
};

std::string_view to_string(PartitionSource source);
/// Accepts "online" and "traced". Throws std::invalid_argument.
PartitionSource parse_partition_source(std::string_view name);

/// Majority assignments, one row per path depth.
AssignmentsByDepth assignment_table(const RunResult& run,
                                    PartitionSource source = PartitionSource::kOnline);

Evaluation evaluate(const RunResult& run, const GeneratedTask& task, const AssignmentsByDepth& table,
                    EntropyMode mode);
Evaluation evaluate(const RunResult& run, const GeneratedTask& task);

// ---------------------------------------------------------------------------
// Persistence

void write_task_csv(const std::filesystem::path& path, const GeneratedTask& task);
/// Throws std::runtime_error on malformed files.
GeneratedTask read_task_csv(const std::filesystem::path& path);

void write_trials_csv(const std::filesystem::path& path, const RunResult& run,
                      const GeneratedTask& task, const AssignmentsByDepth& table);

struct TrialsFile {
  std::vector<double> predicted;
  std::vector<int> outcome;
  AssignmentsByDepth assignments;
};
TrialsFile read_trials_csv(const std::filesystem::path& path);

nlohmann::ordered_json summary_json(const TaskSpec& task, ModelKind model,
                                    const EnsembleConfig& config, const Evaluation& eval,
                                    int weight_resets,
                                    PartitionSource partition = PartitionSource::kOnline);

void write_transfer_csv(const std::filesystem::path& path, const std::vector<TransferReport>& reports);

/// Transfer at every level 2..L from saved run artifacts.
std::vector<TransferReport> transfer_from_files(const GeneratedTask& task, const TrialsFile& trials);

// ---------------------------------------------------------------------------
// Single runs

struct RunOutput {
  RunResult run;
  Evaluation evaluation;
  AssignmentsByDepth table;
  PartitionSource partition = PartitionSource::kOnline;
};

RunOutput run_and_evaluate(const GeneratedTask& task, const TaskSpec& spec, ModelKind model,
                           const EnsembleConfig& config,
                           PartitionSource source = PartitionSource::kOnline);

/// Writes trials.csv, summary.json and a .done marker into `dir`.
void write_run_artifacts(const std::filesystem::path& dir, const RunOutput& out,
                         const GeneratedTask& task, const TaskSpec& spec, ModelKind model);

// ---------------------------------------------------------------------------
// Sweeps

struct ParameterPoint {
  double alpha = 1.0;
  double omega = 1.0;
};

/// `count` points uniform on [lo, hi]^2 from a dedicated stream of `seed`.
std::vector<ParameterPoint> sample_parameters(int count, double lo, double hi, std::uint64_t seed);

struct SweepSpec {
  std::string experiment = "sweep";
  std::vector<TaskSpec> tasks;
  std::vector<ModelKind> models{ModelKind::kFlat, ModelKind::kHolmes};
  std::vector<ParameterPoint> parameters;  // filled from the fields below if empty
  int combinations = 200;
  double param_lo = 0.1;
  double param_hi = 3.0;
  std::uint64_t sweep_seed = 0;
  int seeds = 6;
  std::uint64_t first_seed = 0;
  EnsembleConfig base;  // alpha/omega/seed overwritten per cell
  PartitionSource partition = PartitionSource::kOnline;
  int workers = 0;      // 0: HOLMES_WORKERS or hardware concurrency

  [[nodiscard]] std::vector<ParameterPoint> points() const;
};

struct CellRecord {
  std::string task;
  ModelKind model = ModelKind::kFlat;
  double alpha = 0.0;
  double omega = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::vector<std::pair<std::string, double>> metrics;

  [[nodiscard]] std::optional<double> metric(const std::string& name) const;
};

/// Long-format record: one per (cell, metric).
struct MetricRow {
  std::string task;
  std::string model;
  double alpha = 0.0;
  double omega = 0.0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

std::vector<MetricRow> long_rows(const std::vector<CellRecord>& cells);

struct CombinationMean {
  std::string task, model, metric;
  double alpha = 0.0, omega = 0.0;
  double mean = 0.0;
  std::size_t seeds = 0;
};

struct CrossCombination {
  std::string task, model, metric;
  SummaryStats stats;
};

struct Aggregates {
  std::vector<CombinationMean> per_combination;
  std::vector<CrossCombination> across;
};

/// Seed means per combination, then mean and 95% CI across combinations.
Aggregates aggregate(const std::vector<MetricRow>& rows);

/// Runs every cell; with an output root, writes per-cell artifacts under
/// <root>/<experiment>/<task>/<model>/<alpha>_<omega>/<seed>/, skips cells
/// whose .done marker exists, and writes long.csv plus the aggregate files.
std::vector<CellRecord> run_sweep(const SweepSpec& spec,
                                  const std::optional<std::filesystem::path>& out_root);

/// Best (alpha, omega) for (task, model) by the combination mean of `metric`.
std::optional<ParameterPoint> best_parameters(const std::vector<CellRecord>& cells,
                                              const std::string& task, ModelKind model,
                                              const std::string& metric);

void write_long_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_long_csv(const std::filesystem::path& path);
void write_aggregates(const std::filesystem::path& dir, const Aggregates& aggregates);

/// Formats alpha_omega directory names.
std::string parameter_dir(double alpha, double omega);

int worker_count(int requested);

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace holmes

#endif  // HOLMES_HARNESS_HPP
