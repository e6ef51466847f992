#ifndef HOLMES_METRICS_HPP
#define HOLMES_METRICS_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "holmes/prior.hpp"
#include "holmes/taskgen.hpp"

namespace holmes {

// ---------------------------------------------------------------------------
// Outcome accuracy

/// Half-open trial range [begin, end).
struct TrialWindow {
  std::size_t begin = 0;
  std::size_t end = 0;
  [[nodiscard]] std::size_t size() const { return end - begin; }
};

/// Final 70% of a sequence of `trials` trials.
TrialWindow asymptotic_window(std::size_t trials);

/// Mean of [predicted > 0.5] == truth over the window (all trials by default).
/// Throws std::invalid_argument for length mismatch or an empty window.
double outcome_accuracy(std::span<const double> predicted, std::span<const int> truth,
                        std::optional<TrialWindow> window = std::nullopt);

// ---------------------------------------------------------------------------
// Representational efficiency

enum class EntropyMode { kRaw, kNormalized };

inline constexpr double kMinValidCoverage = 0.10;
inline constexpr std::size_t kMinValidTrials = 5;

struct LabelEntropy {
  int label = 0;
  std::size_t trials = 0;
  std::size_t clusters = 0;
  double entropy = 0.0;
};

struct EntropyReport {
  /// False when coverage or valid-trial count is too low; no numbers then.
  bool sufficient = false;
  std::string reason;
  EntropyMode mode = EntropyMode::kNormalized;
  std::vector<LabelEntropy> labels;
  double average = 0.0;  // weighted by label frequency among valid trials
  double clusters_per_label = 0.0;
  double coverage = 0.0;
  std::size_t valid_trials = 0;
};

/// Within-label Shannon entropy (nats) of cluster assignments. Trials with
/// kInvalidNode are excluded. In normalized mode H_m is divided by log K_m,
/// and is 0 when K_m = 1.
EntropyReport within_label_entropy(std::span<const NodeId> assignments,
                                   std::span<const int> labels, EntropyMode mode);

/// Distinct valid ids.
std::size_t cluster_count(std::span<const NodeId> assignments);

/// Fraction of trials with a valid assignment.
double valid_coverage(std::span<const NodeId> assignments);

/// assignments[d][t]: majority node at path depth d for trial t.
using AssignmentsByDepth = std::vector<std::vector<NodeId>>;

/// `target_depth`, or the nearest shallower depth at which at least
/// `min_coverage` of trials are valid (and, if given, the anchor trial is
/// valid). nullopt if none qualifies.
std::optional<int> select_transfer_depth(const AssignmentsByDepth& by_depth, int target_depth,
                                         std::optional<std::size_t> anchor = std::nullopt,
                                         double min_coverage = kMinValidCoverage);

/// Deepest depth where at least `min_fraction` of trials are valid.
std::optional<int> select_deepest_depth(const AssignmentsByDepth& by_depth,
                                        double min_fraction = 0.01);

/// Analysis depth for representational metrics: compositional tasks use the
/// depth chosen for top-level transfer, the switching task the deepest level
/// holding at least 1% of trials. A single-depth (flat) table yields 0.
std::optional<int> select_analysis_level(const AssignmentsByDepth& by_depth, TaskKind kind,
                                         int task_levels);

// ---------------------------------------------------------------------------
// One-shot transfer

struct TransferReport {
  int level = 0;
  bool valid = false;
  std::string failure;
  std::size_t anchor_trial = 0;
  NodeId anchor_cluster = kInvalidNode;
  int depth_used = -1;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  /// TP + FP == 0; precision reported as 0.
  bool precision_undefined = false;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Label propagation from the first factor-0 trial through one partition.
/// The anchor itself is not scored.
TransferReport one_shot_transfer(std::span<const NodeId> assignments,
                                 std::span<const int> factor_values, int level);

/// Hierarchical variant: evaluates at depth level - 1, falling back to
/// shallower depths while coverage is below 10% or the anchor is invalid.
/// A one-depth table (flat model) always uses its single partition.
TransferReport one_shot_transfer(const AssignmentsByDepth& by_depth,
                                 std::span<const int> factor_values, int level);

// ---------------------------------------------------------------------------
// Aggregation helpers

struct SummaryStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double ci_low = 0.0;   // mean - 1.96 SE
  double ci_high = 0.0;  // mean + 1.96 SE
};

SummaryStats summarize(std::span<const double> values);

/// Pearson correlation; nullopt when either side is constant or n < 2.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

}  // namespace holmes

#endif  // HOLMES_METRICS_HPP
