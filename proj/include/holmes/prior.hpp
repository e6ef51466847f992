#ifndef HOLMES_PRIOR_HPP
#define HOLMES_PRIOR_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "holmes/random.hpp"

namespace holmes {

/// Global identity of a cluster (flat model) or tree node (hierarchical model).
using NodeId = std::int64_t;
inline constexpr NodeId kInvalidNode = -1;

inline constexpr int kDefaultMaxDepth = 20;
inline constexpr int kDefaultMaxChildren = 20;

// ---------------------------------------------------------------------------
// Chinese restaurant process
// ---------------------------------------------------------------------------

/// Occupancy of the tables of one restaurant. Stored as a flat map: ids[k]
/// has counts[k] customers.
struct CrpState {
  std::vector<NodeId> ids;
  std::vector<int> counts;
  int total = 0;
  double alpha = 1.0;

  void seat(NodeId id);
  [[nodiscard]] std::optional<std::size_t> find(NodeId id) const;
};

struct CrpProbabilities {
  std::vector<std::pair<NodeId, double>> existing;
  double new_cluster = 1.0;
};

/// n_k / (total + alpha) for each table, alpha / (total + alpha) for a new one.
CrpProbabilities crp_probabilities(const CrpState& state);

// ---------------------------------------------------------------------------
// Depth-decayed sticky nested CRP
// ---------------------------------------------------------------------------

/// Level-specific concentration alpha * exp(-alpha * level).
double depth_alpha(double alpha, int level);

/// Probability that a path stops after choosing a branch at a level whose
/// concentration is alpha_level.
double stop_probability(double alpha_level);

/// Child occupancy under one parent within one particle. Branch keys are
/// dense: child k has count counts[k].
struct LevelCounts {
  std::vector<int> counts;

  [[nodiscard]] int total() const;
  [[nodiscard]] int num_children() const { return static_cast<int>(counts.size()); }
};

struct BranchProbabilities {
  Eigen::ArrayXd existing;  // indexed by branch key
  double new_branch = 0.0;

  [[nodiscard]] double sum() const { return existing.sum() + new_branch; }
};

/// Sticky CRP over the children of one node. `previous_branch` is the key the
/// particle took under this same node on the previous trial, if any; Omega
/// enters numerator and denominator only then. Throws std::invalid_argument
/// for negative omega or a previous branch that does not exist.
BranchProbabilities sticky_branch_probabilities(const LevelCounts& level,
                                                std::optional<int> previous_branch, double omega,
                                                double alpha_level);

// ---------------------------------------------------------------------------
// Global node registry
// ---------------------------------------------------------------------------

struct TreeNode {
  NodeId global_id = kInvalidNode;
  std::optional<NodeId> parent;
  int level = 0;
  std::vector<NodeId> children;  // child with branch key k is children[k]
};

/// Canonical node identities shared by all particles of one model instance.
///
/// A node is identified by (parent, branch key). Top-level nodes have no
/// parent. Ids are handed out in creation order and never reused, so a
/// replayed seeded run rebuilds the same registry.
class TreeRegistry {
 public:
  /// max_roots = 0 leaves the number of top-level nodes unbounded.
  explicit TreeRegistry(int max_children = kDefaultMaxChildren, int max_roots = 0);

  /// Existing id for (parent, key), or a freshly allocated one. Keys are
  /// dense per parent, so key may be at most the current child count.
  /// Throws std::length_error past the child cap, std::invalid_argument for
  /// an unknown parent or a key that skips ahead.
  NodeId canonical_node(std::optional<NodeId> parent, int branch_key);

  [[nodiscard]] std::optional<NodeId> find(std::optional<NodeId> parent, int branch_key) const;
  [[nodiscard]] const TreeNode& node(NodeId id) const;
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] std::span<const NodeId> roots() const { return roots_; }
  [[nodiscard]] int child_count(std::optional<NodeId> parent) const;
  [[nodiscard]] int capacity(std::optional<NodeId> parent) const;
  [[nodiscard]] int max_children() const { return max_children_; }
  [[nodiscard]] const std::vector<TreeNode>& nodes() const { return nodes_; }

  friend bool operator==(const TreeRegistry&, const TreeRegistry&);

 private:
  int max_children_;
  int max_roots_;
  std::vector<TreeNode> nodes_;
  std::vector<NodeId> roots_;
};

bool operator==(const TreeNode& a, const TreeNode& b);

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

/// Root-to-node path: node_ids[l] is the node chosen at level l and
/// branch_keys[l] its key under the level-(l-1) node.
struct PathAssignment {
  std::vector<NodeId> node_ids;
  std::vector<int> branch_keys;

  /// Level at which traversal stopped.
  [[nodiscard]] int stop_level() const { return static_cast<int>(node_ids.size()) - 1; }
  [[nodiscard]] std::size_t depth() const { return node_ids.size(); }
  [[nodiscard]] NodeId leaf() const { return node_ids.back(); }

  friend bool operator==(const PathAssignment&, const PathAssignment&) = default;
};

/// True when every element is a child of its predecessor in `registry` and
/// the path respects max_depth.
bool validate_path(const PathAssignment& path, const TreeRegistry& registry,
                   int max_depth = kDefaultMaxDepth);

struct PathPrior {
  double alpha = 1.0;
  double omega = 1.0;
  int max_depth = kDefaultMaxDepth;
  bool sticky = true;
};

/// Draws one branch: inverse CDF over existing children in key order, then
/// "new". When the node is at capacity the new-branch mass is dropped and
/// the rest renormalized. Returns the chosen key (== num_children for new).
int sample_branch(const BranchProbabilities& probs, bool allow_new, Rng& rng);

/// Samples a path through the particle-local tree.
///
/// `children_of(depth, keys)` must return the particle's LevelCounts for the
/// node reached by following `keys` (keys.size() == depth) from the top; an
/// empty LevelCounts stands for an unvisited node. New branches are
/// registered in `registry` as they are taken.
template <typename ChildrenOf>
PathAssignment sample_path(ChildrenOf&& children_of, const PathAssignment* previous,
                           const PathPrior& prior, TreeRegistry& registry, Rng& rng) {
  PathAssignment path;
  std::optional<NodeId> parent;
  bool on_previous = previous != nullptr && prior.sticky;
  for (int level = 0; level < prior.max_depth; ++level) {
    const LevelCounts& counts =
        children_of(static_cast<std::size_t>(level), std::span<const int>(path.branch_keys));
    const double alpha_level = depth_alpha(prior.alpha, level);
    std::optional<int> previous_branch;
    if (on_previous && static_cast<int>(previous->branch_keys.size()) > level) {
      previous_branch = previous->branch_keys[static_cast<std::size_t>(level)];
    }
    const auto probs = sticky_branch_probabilities(counts, previous_branch,
                                                   previous_branch ? prior.omega : 0.0,
                                                   alpha_level);
    const bool allow_new = counts.num_children() < registry.capacity(parent);
    const int key = sample_branch(probs, allow_new, rng);
    const NodeId id = registry.canonical_node(parent, key);
    path.node_ids.push_back(id);
    path.branch_keys.push_back(key);
    on_previous = on_previous && previous_branch && *previous_branch == key;
    parent = id;
    if (level + 1 >= prior.max_depth) break;
    if (level >= 1 && rng.bernoulli(stop_probability(alpha_level))) break;
  }
  return path;
}

}  // namespace holmes

#endif  // HOLMES_PRIOR_HPP
