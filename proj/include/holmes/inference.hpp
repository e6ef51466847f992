#ifndef HOLMES_INFERENCE_HPP
#define HOLMES_INFERENCE_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "holmes/likelihood.hpp"
#include "holmes/prior.hpp"
#include "holmes/random.hpp"

namespace holmes {

enum class ModelKind { kFlat, kHolmes };

std::string_view to_string(ModelKind kind);
/// Accepts "flat" and "holmes" (alias "hier"). Throws std::invalid_argument.
ModelKind parse_model_kind(std::string_view name);

struct EnsembleConfig {
  int num_particles = 200;
  double alpha = 1.0;
  double omega = 1.0;
  std::uint64_t seed = 0;
  int max_depth = kDefaultMaxDepth;
  int max_children = kDefaultMaxChildren;
  /// Leave the outcome row out of the particle weights. When false, weights
  /// use the full observation after feedback; predictions are unaffected.
  bool mask_outcome_in_weight = true;
  /// Apply the Omega self-transition bonus to the flat CRP as well.
  bool flat_stickiness = false;

  void validate() const;
};

/// Per-particle paths for one trial, row-compressed.
class PathTable {
 public:
  void push(std::span<const NodeId> path);
  void clear();
  void reserve(std::size_t rows, std::size_t entries);
  [[nodiscard]] std::span<const NodeId> operator[](std::size_t row) const;
  [[nodiscard]] std::size_t size() const { return offsets_.size() - 1; }
  [[nodiscard]] bool empty() const { return size() == 0; }

  friend bool operator==(const PathTable&, const PathTable&) = default;

 private:
  std::vector<NodeId> entries_;
  std::vector<std::size_t> offsets_{0};
};

struct TrialResult {
  int trial = 0;
  /// Posterior mean outcome estimate, formed before feedback.
  double predicted = 0.5;
  int binarized = 0;
  /// Assignment each particle proposed this trial (flat: one id).
  PathTable proposals;
  /// Resampled particle j continues proposals[ancestors[j]].
  std::vector<int> ancestors;
  /// Majority vote over the resampled particles, one entry per depth.
  std::vector<NodeId> majority_by_depth;

  friend bool operator==(const TrialResult&, const TrialResult&) = default;
};

/// Raised by run_sequence with the failing trial attached.
class TrialError : public std::runtime_error {
 public:
  TrialError(int trial, const std::string& what)
      : std::runtime_error("trial " + std::to_string(trial) + ": " + what), trial_(trial) {}
  [[nodiscard]] int trial() const { return trial_; }

 private:
  int trial_;
};

// ---------------------------------------------------------------------------
// Flat CRP particle filter
// ---------------------------------------------------------------------------

/// One flat hypothesis. Cluster k of the particle is registry root k, so
/// crp.ids[k] is its global id. Assignment histories are recovered from the
/// TrialResult ancestry rather than stored per particle.
struct FlatParticle {
  CrpState crp;
  std::vector<std::shared_ptr<const FeatureStats>> stats;  // by cluster key
  std::optional<int> previous_key;
  double log_weight = 0.0;
};

class FlatEnsemble {
 public:
  FlatEnsemble(const EnsembleConfig& config, Eigen::Index num_features);

  TrialResult step(const ObservationRef& obs);

  [[nodiscard]] const EnsembleConfig& config() const { return config_; }
  [[nodiscard]] const TreeRegistry& registry() const { return registry_; }
  [[nodiscard]] std::span<const FlatParticle> particles() const { return particles_; }
  [[nodiscard]] int trials_processed() const { return trials_; }
  [[nodiscard]] int weight_resets() const { return weight_resets_; }

 private:
  EnsembleConfig config_;
  Eigen::Index num_features_;
  FeatureMask full_mask_;
  FeatureMask predict_mask_;
  FeatureStats fresh_;
  TreeRegistry registry_;
  std::vector<FlatParticle> particles_;
  int trials_ = 0;
  int weight_resets_ = 0;
};

// ---------------------------------------------------------------------------
// HOLMES: sticky nCRP particle filter
// ---------------------------------------------------------------------------

/// Particle-local tree node. Copy-on-write: particles share unchanged
/// subtrees after resampling, and an update clones only the visited path.
struct HierNode {
  NodeId id = kInvalidNode;
  int level = 0;
  LevelCounts children;
  std::vector<std::shared_ptr<const HierNode>> child_nodes;  // by branch key
  /// Set once at least one path has stopped here.
  std::shared_ptr<const FeatureStats> leaf;
  int terminal_count = 0;
};

struct HierParticle {
  LevelCounts top;  // counts over level-0 nodes
  std::vector<std::shared_ptr<const HierNode>> top_nodes;
  std::optional<PathAssignment> previous_path;
  double log_weight = 0.0;

  /// Node reached by following `keys` from the top, or nullptr if the
  /// particle has never visited it.
  [[nodiscard]] const HierNode* find(std::span<const int> keys) const;
};

class HolmesEnsemble {
 public:
  HolmesEnsemble(const EnsembleConfig& config, Eigen::Index num_features);

  TrialResult step(const ObservationRef& obs);

  [[nodiscard]] const EnsembleConfig& config() const { return config_; }
  [[nodiscard]] const TreeRegistry& registry() const { return registry_; }
  [[nodiscard]] std::span<const HierParticle> particles() const { return particles_; }
  [[nodiscard]] int trials_processed() const { return trials_; }
  [[nodiscard]] int weight_resets() const { return weight_resets_; }

 private:
  EnsembleConfig config_;
  Eigen::Index num_features_;
  FeatureMask full_mask_;
  FeatureMask predict_mask_;
  FeatureStats fresh_;
  TreeRegistry registry_;
  std::vector<HierParticle> particles_;
  int trials_ = 0;
  int weight_resets_ = 0;
};

inline TrialResult flat_step(FlatEnsemble& ensemble, const ObservationRef& obs) {
  return ensemble.step(obs);
}
inline TrialResult hier_step(HolmesEnsemble& ensemble, const ObservationRef& obs) {
  return ensemble.step(obs);
}

// ---------------------------------------------------------------------------
// Shared filter machinery
// ---------------------------------------------------------------------------

/// Normalizes log weights in place (log-sum-exp) and returns linear weights.
/// If no weight is finite the ensemble is reset to uniform and *reset is set.
std::vector<double> normalize_log_weights(std::span<double> log_weights, bool* reset = nullptr);

/// Systematic resampling: one uniform offset, P evenly spaced positions.
/// Weights must be normalized. Returns the ancestor index for each slot.
std::vector<int> resample(std::span<const double> weights, Rng& rng);
/// Same, with the offset u in [0, 1) given explicitly.
std::vector<int> resample_with_offset(std::span<const double> weights, double u);

/// Plurality vote. kInvalidNode entries are a candidate of their own;
/// ties go to the smaller id, so an invalid tie wins.
NodeId majority_assignment(std::span<const NodeId> assignments);

struct RunResult {
  ModelKind kind = ModelKind::kFlat;
  EnsembleConfig config;
  Eigen::Index num_features = 0;
  std::vector<TrialResult> trials;
  TreeRegistry registry;
  int weight_resets = 0;

  [[nodiscard]] std::size_t size() const { return trials.size(); }
  [[nodiscard]] bool empty() const { return trials.empty(); }
};

/// Runs one forward pass over the columns of `observations`.
RunResult run_sequence(ModelKind kind, const EnsembleConfig& config,
                       const ObservationMatrix& observations);

/// For each trial, the proposal row each final particle's lineage used.
/// result[t][j] indexes run.trials[t].proposals.
std::vector<std::vector<int>> trace_lineages(const RunResult& run);

/// Deepest path length seen in any proposal.
int max_path_depth(const RunResult& run);

/// Per-trial majority at `depth` over the final particles' histories: the
/// post-training partition used for evaluation.
std::vector<NodeId> posterior_assignments(const RunResult& run, int depth);
std::vector<NodeId> posterior_assignments(const RunResult& run, int depth,
                                          const std::vector<std::vector<int>>& lineages);

/// Per-trial majority at `depth` over the resampled particles of that step.
std::vector<NodeId> online_assignments(const RunResult& run, int depth);

std::vector<double> predictions(const RunResult& run);

}  // namespace holmes

#endif  // HOLMES_INFERENCE_HPP
