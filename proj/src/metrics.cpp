#include "holmes/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace holmes {

TrialWindow asymptotic_window(std::size_t trials) {
  const auto skipped = static_cast<std::size_t>(std::floor(0.3 * static_cast<double>(trials)));
  return {skipped, trials};
}

double outcome_accuracy(std::span<const double> predicted, std::span<const int> truth,
                        std::optional<TrialWindow> window) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("outcome_accuracy: predictions and truths differ in length");
  }
  const TrialWindow w = window.value_or(TrialWindow{0, predicted.size()});
  if (w.end > predicted.size() || w.begin >= w.end) {
    throw std::invalid_argument("outcome_accuracy: empty or out-of-range window");
  }
  std::size_t correct = 0;
  for (std::size_t t = w.begin; t < w.end; ++t) {
    const int guess = predicted[t] > 0.5 ? 1 : 0;
    if (guess == truth[t]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(w.size());
}

EntropyReport within_label_entropy(std::span<const NodeId> assignments,
                                   std::span<const int> labels, EntropyMode mode) {
  if (assignments.size() != labels.size()) {
    throw std::invalid_argument("within_label_entropy: assignments and labels differ in length");
  }
  EntropyReport report;
  report.mode = mode;
  std::map<int, std::map<NodeId, std::size_t>> table;
  for (std::size_t t = 0; t < assignments.size(); ++t) {
    if (assignments[t] == kInvalidNode) continue;
    ++table[labels[t]][assignments[t]];
    ++report.valid_trials;
  }
  report.coverage = assignments.empty() ? 0.0
                                        : static_cast<double>(report.valid_trials) /
                                              static_cast<double>(assignments.size());
  if (report.valid_trials < kMinValidTrials || report.coverage < kMinValidCoverage) {
    report.reason = "insufficient valid assignments (" + std::to_string(report.valid_trials) +
                    " trials, coverage " + std::to_string(report.coverage) + ")";
    return report;
  }
  report.sufficient = true;
  double weighted = 0.0;
  double clusters = 0.0;
  for (const auto& [label, counts] : table) {
    LabelEntropy le;
    le.label = label;
    le.clusters = counts.size();
    for (const auto& [id, c] : counts) le.trials += c;
    double h = 0.0;
    for (const auto& [id, c] : counts) {
      const double p = static_cast<double>(c) / static_cast<double>(le.trials);
      h -= p * std::log(p);
    }
    if (mode == EntropyMode::kNormalized) {
      h = le.clusters > 1 ? h / std::log(static_cast<double>(le.clusters)) : 0.0;
    }
    le.entropy = std::max(h, 0.0);
    weighted += static_cast<double>(le.trials) * le.entropy;
    clusters += static_cast<double>(le.clusters);
    report.labels.push_back(le);
  }
  report.average = weighted / static_cast<double>(report.valid_trials);
  report.clusters_per_label = clusters / static_cast<double>(report.labels.size());
  return report;
}

std::size_t cluster_count(std::span<const NodeId> assignments) {
  std::set<NodeId> ids;
  for (NodeId id : assignments) {
    if (id >= 0) ids.insert(id);
  }
  return ids.size();
}

double valid_coverage(std::span<const NodeId> assignments) {
  if (assignments.empty()) return 0.0;
  const auto valid = std::count_if(assignments.begin(), assignments.end(),
                                   [](NodeId id) { return id >= 0; });
  return static_cast<double>(valid) / static_cast<double>(assignments.size());
}

std::optional<int> select_transfer_depth(const AssignmentsByDepth& by_depth, int target_depth,
                                         std::optional<std::size_t> anchor, double min_coverage) {
  if (by_depth.empty()) return std::nullopt;
  int depth = std::min(target_depth, static_cast<int>(by_depth.size()) - 1);
  for (; depth >= 0; --depth) {
    const auto& level = by_depth[static_cast<std::size_t>(depth)];
    if (valid_coverage(level) < min_coverage) continue;
    if (anchor && (*anchor >= level.size() || level[*anchor] < 0)) continue;
    return depth;
  }
  return std::nullopt;
}

std::optional<int> select_deepest_depth(const AssignmentsByDepth& by_depth, double min_fraction) {
  for (int depth = static_cast<int>(by_depth.size()) - 1; depth >= 0; --depth) {
    const auto& level = by_depth[static_cast<std::size_t>(depth)];
    if (!level.empty() && valid_coverage(level) >= min_fraction) return depth;
  }
  return std::nullopt;
}

std::optional<int> select_analysis_level(const AssignmentsByDepth& by_depth, TaskKind kind,
                                         int task_levels) {
  if (by_depth.size() == 1) return valid_coverage(by_depth[0]) > 0.0 ? std::optional<int>(0)
                                                                    : std::nullopt;
  if (kind == TaskKind::kSwitching) return select_deepest_depth(by_depth);
  return select_transfer_depth(by_depth, task_levels - 1);
}

TransferReport one_shot_transfer(std::span<const NodeId> assignments,
                                 std::span<const int> factor_values, int level) {
  if (assignments.size() != factor_values.size()) {
    throw std::invalid_argument("one_shot_transfer: assignments and factor values differ in length");
  }
  TransferReport report;
  report.level = level;
  const auto anchor = std::find(factor_values.begin(), factor_values.end(), 0);
  if (anchor == factor_values.end()) {
    report.failure = "no trial with factor value 0";
    return report;
  }
  report.anchor_trial = static_cast<std::size_t>(anchor - factor_values.begin());
  report.anchor_cluster = assignments[report.anchor_trial];
  if (report.anchor_cluster < 0) {
    report.failure = "anchor trial has no valid assignment";
    return report;
  }
  for (std::size_t t = 0; t < assignments.size(); ++t) {
    if (t == report.anchor_trial) continue;
    const bool same_cluster = assignments[t] == report.anchor_cluster;
    const bool category0 = factor_values[t] == 0;
    if (category0) {
      same_cluster ? ++report.tp : ++report.fn;
    } else {
      same_cluster ? ++report.fp : ++report.tn;
    }
  }
  report.valid = true;
  report.recall = report.tp + report.fn > 0
                      ? static_cast<double>(report.tp) / static_cast<double>(report.tp + report.fn)
                      : 0.0;
  if (report.tp + report.fp > 0) {
    report.precision = static_cast<double>(report.tp) / static_cast<double>(report.tp + report.fp);
  } else {
    report.precision_undefined = true;
  }
  const double denom = report.precision + report.recall;
  report.f1 = denom > 0.0 ? 2.0 * report.precision * report.recall / denom : 0.0;
  return report;
}

TransferReport one_shot_transfer(const AssignmentsByDepth& by_depth,
                                 std::span<const int> factor_values, int level) {
  TransferReport report;
  report.level = level;
  if (by_depth.empty()) {
    report.failure = "no assignments";
    return report;
  }
  std::optional<int> depth;
  const auto anchor = std::find(factor_values.begin(), factor_values.end(), 0);
  if (by_depth.size() == 1) {
    depth = 0;
  } else {
    std::optional<std::size_t> anchor_trial;
    if (anchor != factor_values.end()) {
      anchor_trial = static_cast<std::size_t>(anchor - factor_values.begin());
    }
    depth = select_transfer_depth(by_depth, level - 1, anchor_trial);
  }
  if (!depth) {
    report.failure = "no depth with sufficient valid assignments for the anchor";
    return report;
  }
  report = one_shot_transfer(by_depth[static_cast<std::size_t>(*depth)], factor_values, level);
  report.depth_used = *depth;
  return report;
}

SummaryStats summarize(std::span<const double> values) {
  SummaryStats s;
  s.n = values.size();
  if (s.n == 0) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  const double half = 1.96 * s.sd / std::sqrt(static_cast<double>(s.n));
  s.ci_low = s.mean - half;
  s.ci_high = s.mean + half;
  return s;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const auto sx = summarize(x);
  const auto sy = summarize(y);
  double cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) cov += (x[i] - sx.mean) * (y[i] - sy.mean);
  cov /= static_cast<double>(x.size() - 1);
  if (sx.sd == 0.0 || sy.sd == 0.0) return std::nullopt;
  return cov / (sx.sd * sy.sd);
}

}  // namespace holmes
