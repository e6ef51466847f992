// holmes: task generation, model runs, parameter sweeps and transfer analysis.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "holmes/harness.hpp"

namespace fs = std::filesystem;
using namespace holmes;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TaskOptions {
  std::string kind = "compositional";
  CompositionalTaskSpec compositional;
  SwitchingTaskSpec switching;

  void add(CLI::App* app, bool positional_kind) {
    if (positional_kind) {
      app->add_option("kind", kind, "compositional or switching")
          ->required()
          ->check(CLI::IsMember({"compositional", "switching"}));
    } else {
      app->add_option("--task-kind", kind, "compositional or switching")
          ->check(CLI::IsMember({"compositional", "switching"}))
          ->capture_default_str();
    }
    app->add_option("--levels", compositional.levels, "Compositional depth L (2-5)")
        ->check(CLI::Range(2, 5))
        ->capture_default_str();
    app->add_option("--trials-per-context", compositional.trials_per_context)
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app->add_option("--noise", compositional.noise_prob, "Observation bit-flip probability")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    app->add_option("--slow-block", switching.slow_block_trials, "Trials per rule context")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app->add_option("--fast-block", switching.fast_block_trials, "Trials per rewarded-value block")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--slow-contexts", switching.num_slow_contexts)
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app->add_option("--flip", switching.outcome_flip_prob, "Outcome flip probability")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
  }

  [[nodiscard]] TaskSpec spec() const {
    TaskSpec t;
    t.kind = kind == "switching" ? TaskKind::kSwitching : TaskKind::kCompositional;
    t.compositional = compositional;
    t.switching = switching;
    return t;
  }
};

struct ModelOptions {
  EnsembleConfig config;
  bool weight_outcome = false;
  std::string partition = "online";

  void add(CLI::App* app, bool with_params) {
    if (with_params) {
      app->add_option("--alpha", config.alpha, "Concentration")
          ->check(CLI::PositiveNumber)
          ->capture_default_str();
      app->add_option("--omega", config.omega, "Stickiness and Beta pseudocount")
          ->check(CLI::PositiveNumber)
          ->capture_default_str();
    }
    app->add_option("--particles", config.num_particles)
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--max-depth", config.max_depth)->check(CLI::Range(1, 64))->capture_default_str();
    app->add_option("--max-children", config.max_children)
        ->check(CLI::Range(1, 1 << 20))
        ->capture_default_str();
    app->add_flag("--weight-outcome", weight_outcome,
                  "Include the outcome feature in particle weights");
    app->add_flag("--flat-stickiness", config.flat_stickiness,
                  "Add the self-transition bonus to the flat model");
    app->add_option("--partition", partition,
                    "Partition used by the metrics: online (per-trial vote) or traced")
        ->check(CLI::IsMember({"online", "traced"}))
        ->capture_default_str();
  }

  [[nodiscard]] EnsembleConfig finish() const {
    EnsembleConfig c = config;
    c.mask_outcome_in_weight = !weight_outcome;
    return c;
  }
};

// ---------------------------------------------------------------------------
// generate-task

struct GenerateArgs {
  TaskOptions task;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_generate(const GenerateArgs& a) {
  const TaskSpec spec = a.task.spec();
  const GeneratedTask task = spec.generate(a.seed);
  write_task_csv(a.out, task);
  std::printf("%s: %lld trials x %lld features (+ outcome) -> %s\n", spec.tag().c_str(),
              static_cast<long long>(task.num_trials()),
              static_cast<long long>(task.observations.rows() - 1), a.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// run

struct RunArgs {
  TaskOptions task;
  ModelOptions model;
  std::string task_file;
  std::string model_name = "holmes";
  std::optional<std::uint64_t> task_seed;
  std::string out;
};

int cmd_run(const RunArgs& a) {
  const ModelKind kind = parse_model_kind(a.model_name);
  const EnsembleConfig config = a.model.finish();
  TaskSpec spec = a.task.spec();
  GeneratedTask task;
  if (!a.task_file.empty()) {
    task = read_task_csv(a.task_file);
    spec.kind = task.kind;
    if (task.kind == TaskKind::kCompositional) spec.compositional.levels = task.levels;
  } else {
    task = spec.generate(a.task_seed.value_or(config.seed));
  }
  const RunOutput out =
      run_and_evaluate(task, spec, kind, config, parse_partition_source(a.model.partition));
  const fs::path dir = a.out;
  write_run_artifacts(dir, out, task, spec, kind);
  write_transfer_csv(dir / "transfer.csv", out.evaluation.transfer);
  const auto summary =
      summary_json(spec, kind, config, out.evaluation, out.run.weight_resets, out.partition);
  std::cout << summary["metrics"].dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  TaskOptions task;
  ModelOptions model;
  std::vector<int> levels;
  std::vector<std::string> models{"flat", "holmes"};
  std::string experiment = "sweep";
  int combinations = 200;
  double param_lo = 0.1;
  double param_hi = 3.0;
  std::uint64_t sweep_seed = 0;
  int seeds = 6;
  std::uint64_t first_seed = 0;
  std::optional<double> alpha;
  std::optional<double> omega;
  int workers = 0;
  int best_runs = 0;
  std::string best_metric = "asymptotic_accuracy";
  std::uint64_t best_first_seed = 100000;
  std::string out = "out";
};

std::vector<ModelKind> parse_models(const std::vector<std::string>& names) {
  std::vector<ModelKind> kinds;
  for (const auto& n : names) kinds.push_back(parse_model_kind(n));
  return kinds;
}

void report_sweep(const std::vector<CellRecord>& records, const fs::path& dir) {
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.failed ? 1 : 0;
  std::printf("%zu cells (%zu failed) -> %s\n", records.size(), failed, dir.string().c_str());
}

int cmd_sweep(const SweepArgs& a) {
  SweepSpec spec;
  spec.experiment = a.experiment;
  spec.models = parse_models(a.models);
  const TaskSpec base_task = a.task.spec();
  if (base_task.kind == TaskKind::kSwitching) {
    spec.tasks.push_back(base_task);
  } else {
    const std::vector<int> levels = a.levels.empty() ? std::vector<int>{a.task.compositional.levels}
                                                     : a.levels;
    for (int l : levels) {
      TaskSpec t = base_task;
      t.compositional.levels = l;
      t.compositional.validate();
      spec.tasks.push_back(t);
    }
  }
  if (a.alpha.has_value() != a.omega.has_value()) {
    throw UsageError("--alpha and --omega must be given together");
  }
  if (a.alpha) spec.parameters.push_back({*a.alpha, *a.omega});
  if (a.param_lo <= 0.0 || a.param_hi < a.param_lo) throw UsageError("need 0 < param-lo <= param-hi");
  spec.combinations = a.combinations;
  spec.param_lo = a.param_lo;
  spec.param_hi = a.param_hi;
  spec.sweep_seed = a.sweep_seed;
  spec.seeds = a.seeds;
  spec.first_seed = a.first_seed;
  spec.base = a.model.finish();
  spec.base.validate();
  spec.partition = parse_partition_source(a.model.partition);
  spec.workers = a.workers;

  const fs::path root = a.out;
  const auto records = run_sweep(spec, root);
  report_sweep(records, root / spec.experiment);
  if (a.best_runs <= 0) return 0;

  for (const auto& task : spec.tasks) {
    for (ModelKind model : spec.models) {
      const auto best = best_parameters(records, task.tag(), model, a.best_metric);
      if (!best) {
        std::fprintf(stderr, "no usable cells for %s/%s; skipping best runs\n", task.tag().c_str(),
                     std::string(to_string(model)).c_str());
        continue;
      }
      SweepSpec followup = spec;
      followup.experiment = spec.experiment + "-best";
      followup.tasks = {task};
      followup.models = {model};
      followup.parameters = {*best};
      followup.seeds = a.best_runs;
      followup.first_seed = a.best_first_seed;
      std::printf("%s/%s best %s: alpha=%.6f omega=%.6f\n", task.tag().c_str(),
                  std::string(to_string(model)).c_str(), a.best_metric.c_str(), best->alpha,
                  best->omega);
      run_sweep(followup, root);
    }
  }
  // Re-aggregate over every follow-up cell written so far.
  const fs::path best_dir = root / (spec.experiment + "-best");
  std::vector<MetricRow> rows;
  for (const auto& entry : fs::recursive_directory_iterator(best_dir)) {
    if (entry.path().filename() != "summary.json") continue;
    std::ifstream in(entry.path());
    const auto j = nlohmann::json::parse(in);
    for (const auto& [name, value] : j["metrics"].items()) {
      rows.push_back({j["task"].get<std::string>(), j["model"].get<std::string>(),
                      j["alpha"].get<double>(), j["omega"].get<double>(),
                      j["seed"].get<std::uint64_t>(), name, value.get<double>()});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const MetricRow& x, const MetricRow& y) {
    return std::tie(x.task, x.model, x.alpha, x.omega, x.seed, x.metric) <
           std::tie(y.task, y.model, y.alpha, y.omega, y.seed, y.metric);
  });
  write_long_csv(best_dir / "long.csv", rows);
  write_aggregates(best_dir, aggregate(rows));
  std::printf("best-parameter runs -> %s\n", best_dir.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// transfer

struct TransferArgs {
  std::string task_file;
  std::string run_dir;
  std::string out;
};

int cmd_transfer(const TransferArgs& a) {
  const fs::path trials = fs::path(a.run_dir) / "trials.csv";
  if (!fs::exists(trials)) throw std::runtime_error("missing run artifact " + trials.string());
  const auto task = read_task_csv(a.task_file);
  const auto reports = transfer_from_files(task, read_trials_csv(trials));
  const fs::path out = a.out.empty() ? fs::path(a.run_dir) / "transfer.csv" : fs::path(a.out);
  write_transfer_csv(out, reports);
  for (const auto& r : reports) {
    if (r.valid) {
      std::printf("level %d depth %d: recall %.4f precision %.4f f1 %.4f\n", r.level, r.depth_used,
                  r.recall, r.precision, r.f1);
    } else {
      std::printf("level %d: %s\n", r.level, r.failure.c_str());
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// aggregate

struct AggregateArgs {
  std::string in;
  std::string out;
};

int cmd_aggregate(const AggregateArgs& a) {
  fs::path long_csv = a.in;
  if (fs::is_directory(long_csv)) long_csv /= "long.csv";
  if (!fs::exists(long_csv)) throw std::runtime_error("missing " + long_csv.string());
  const fs::path out = a.out.empty() ? long_csv.parent_path() : fs::path(a.out);
  fs::create_directories(out);
  const auto aggregates = aggregate(read_long_csv(long_csv));
  write_aggregates(out, aggregates);
  std::printf("%zu combination means, %zu summaries -> %s\n", aggregates.per_combination.size(),
              aggregates.across.size(), out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-cause structure learning: flat CRP and HOLMES particle filters"};
  app.set_config("--config", "", "INI config; [section] names match subcommands");
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-task", "Write a task sequence to CSV");
  gen.task.add(g, true);
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out,-o", gen.out, "Output CSV")->required();

  RunArgs run;
  auto* r = app.add_subcommand("run", "Run one model on one task");
  run.task.add(r, false);
  run.model.add(r, true);
  r->add_option("--task", run.task_file, "Task CSV from generate-task")->check(CLI::ExistingFile);
  r->add_option("--model", run.model_name, "flat or holmes")->capture_default_str();
  r->add_option("--seed", run.model.config.seed)->capture_default_str();
  r->add_option("--task-seed", run.task_seed, "Inline task seed (defaults to --seed)");
  r->add_option("--out,-o", run.out, "Output directory")->required();

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Parameter sweep over tasks, models and seeds");
  sw.task.add(s, false);
  sw.model.add(s, false);
  s->add_option("--level-list", sw.levels, "Compositional depths to sweep (overrides --levels)")
      ->delimiter(',')
      ->check(CLI::Range(2, 5));
  s->add_option("--models", sw.models)->delimiter(',')->capture_default_str();
  s->add_option("--experiment", sw.experiment)->capture_default_str();
  s->add_option("--combinations", sw.combinations)->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--param-lo", sw.param_lo)->capture_default_str();
  s->add_option("--param-hi", sw.param_hi)->capture_default_str();
  s->add_option("--sweep-seed", sw.sweep_seed)->capture_default_str();
  s->add_option("--seeds", sw.seeds)->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--first-seed", sw.first_seed)->capture_default_str();
  s->add_option("--alpha", sw.alpha, "Fixed alpha (single combination)")->check(CLI::PositiveNumber);
  s->add_option("--omega", sw.omega, "Fixed omega (single combination)")->check(CLI::PositiveNumber);
  s->add_option("--workers", sw.workers, "Worker threads (default: HOLMES_WORKERS or all cores)")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--best-runs", sw.best_runs, "Extra seeds at the best combination per task/model")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--best-metric", sw.best_metric)->capture_default_str();
  s->add_option("--best-first-seed", sw.best_first_seed)->capture_default_str();
  s->add_option("--out,-o", sw.out, "Output root")->capture_default_str();

  TransferArgs tr;
  auto* t = app.add_subcommand("transfer", "One-shot transfer from saved run artifacts");
  t->add_option("--task", tr.task_file, "Task CSV")->required()->check(CLI::ExistingFile);
  t->add_option("--run", tr.run_dir, "Run directory holding trials.csv")->required();
  t->add_option("--out,-o", tr.out, "Output CSV (default <run>/transfer.csv)");

  AggregateArgs ag;
  auto* a = app.add_subcommand("aggregate", "Recompute aggregates from a long-format CSV");
  a->add_option("--in,-i", ag.in, "long.csv or an experiment directory")->required();
  a->add_option("--out,-o", ag.out, "Output directory (default: next to the input)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (r->parsed()) return cmd_run(run);
    if (s->parsed()) return cmd_sweep(sw);
    if (t->parsed()) return cmd_transfer(tr);
    if (a->parsed()) return cmd_aggregate(ag);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
