#ifndef HOLMES_TASKGEN_HPP
#define HOLMES_TASKGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "holmes/likelihood.hpp"

namespace holmes {

enum class TaskKind { kCompositional, kSwitching };

/// L-level compositional categorization task.
struct CompositionalTaskSpec {
  int levels = 2;
  int trials_per_context = 10;
  double noise_prob = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
  [[nodiscard]] int num_contexts() const { return 4 << (levels - 1); }
  [[nodiscard]] int num_features() const { return levels + 4; }
  [[nodiscard]] int num_trials() const { return num_contexts() * trials_per_context; }
};

/// Nested-timescale rule switching task.
struct SwitchingTaskSpec {
  int slow_block_trials = 50;
  int fast_block_trials = 12;
  int num_slow_contexts = 4;
  double outcome_flip_prob = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
  [[nodiscard]] int num_trials() const { return slow_block_trials * num_slow_contexts; }
};

/// Latent values of one compositional context: values[0] is the
/// observation-level index in {0..3}, values[l] for l >= 1 the binary value
/// of hierarchical level l + 1.
struct Context {
  std::vector<int> values;
  int id = 0;

  [[nodiscard]] int level_value(int level) const { return values[level - 1]; }
};

/// Ground truth for one generated trial.
struct TrialGroundTruth {
  /// Compositional: latent value per hierarchical level (index 0 = level 1).
  std::vector<int> level_values;
  /// Switching: 0 = shape rule, 1 = texture rule; rewarded feature value;
  /// slow-context and fast-block indices.
  int rule = -1;
  int rewarded_value = -1;
  int slow_context = -1;
  int fast_block = -1;
  /// Context id: enumeration index (compositional) or latent state
  /// 2 * rule + rewarded_value (switching).
  int context_id = 0;
  int outcome_clean = 0;  // before noise
  int outcome = 0;
};

struct GeneratedTask {
  TaskKind kind = TaskKind::kCompositional;
  int levels = 0;  // compositional only
  ObservationMatrix observations;  // (F + 1) x T, outcome last
  std::vector<TrialGroundTruth> truth;

  [[nodiscard]] Eigen::Index num_trials() const { return observations.cols(); }
  [[nodiscard]] std::vector<int> outcomes() const;
  /// Per-trial latent value at compositional level `level` (2..L).
  [[nodiscard]] std::vector<int> factor(int level) const;
  /// Per-trial label used for within-label entropy.
  [[nodiscard]] std::vector<int> context_ids() const;
};

/// All 4 * 2^(L-1) contexts in recursive enumeration order. Throws
/// std::invalid_argument for L outside [2, 5].
std::vector<Context> enumerate_contexts(int levels);

/// Feature vector of length L + 4: one bit per level above 2 (level L
/// first), the first-latent value twice, then the one-hot observation.
Observation encode_features(const Context& context, int levels);

/// Conjunctive outcome on the two highest latent levels.
int outcome_rule(int levels, const std::vector<int>& level_values);

GeneratedTask generate_compositional(const CompositionalTaskSpec& spec);
GeneratedTask generate_switching(const SwitchingTaskSpec& spec);

/// Outcome of a switching-task stimulus under (rule, rewarded value).
int switching_outcome(int rule, int rewarded_value, int shape, int texture);

}  // namespace holmes

#endif  // HOLMES_TASKGEN_HPP
