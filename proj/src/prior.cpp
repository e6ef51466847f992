#include "holmes/prior.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace holmes {

void CrpState::seat(NodeId id) {
  if (auto k = find(id)) {
    ++counts[*k];
  } else {
    ids.push_back(id);
    counts.push_back(1);
  }
  ++total;
}

std::optional<std::size_t> CrpState::find(NodeId id) const {
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] == id) return k;
  }
  return std::nullopt;
}

CrpProbabilities crp_probabilities(const CrpState& state) {
  CrpProbabilities out;
  const double denom = static_cast<double>(state.total) + state.alpha;
  out.existing.reserve(state.ids.size());
  for (std::size_t k = 0; k < state.ids.size(); ++k) {
    out.existing.emplace_back(state.ids[k], state.counts[k] / denom);
  }
  out.new_cluster = state.alpha / denom;
  return out;
}

double depth_alpha(double alpha, int level) {
  return alpha * std::exp(-alpha * static_cast<double>(level));
}

double stop_probability(double alpha_level) { return 1.0 / (1.0 + alpha_level); }

int LevelCounts::total() const { return std::accumulate(counts.begin(), counts.end(), 0); }

BranchProbabilities sticky_branch_probabilities(const LevelCounts& level,
                                                std::optional<int> previous_branch, double omega,
                                                double alpha_level) {
  if (omega < 0.0) throw std::invalid_argument("sticky_branch_probabilities: negative omega");
  if (previous_branch && (*previous_branch < 0 || *previous_branch >= level.num_children())) {
    throw std::invalid_argument("sticky_branch_probabilities: previous branch " +
                                std::to_string(*previous_branch) + " does not exist");
  }
  const double bonus = previous_branch ? omega : 0.0;
  const double denom = static_cast<double>(level.total()) + alpha_level + bonus;
  BranchProbabilities out;
  out.existing.resize(level.num_children());
  for (int k = 0; k < level.num_children(); ++k) {
    out.existing[k] = static_cast<double>(level.counts[static_cast<std::size_t>(k)]);
  }
  if (previous_branch) out.existing[*previous_branch] += bonus;
  out.existing /= denom;
  out.new_branch = alpha_level / denom;
  return out;
}

int sample_branch(const BranchProbabilities& probs, bool allow_new, Rng& rng) {
  const auto n = static_cast<std::size_t>(probs.existing.size());
  std::vector<double> weights(probs.existing.data(), probs.existing.data() + n);
  if (allow_new || n == 0) weights.push_back(probs.new_branch);
  return static_cast<int>(rng.categorical(weights));
}

TreeRegistry::TreeRegistry(int max_children, int max_roots)
    : max_children_(max_children), max_roots_(max_roots) {
  if (max_children < 1) throw std::invalid_argument("TreeRegistry: max_children must be >= 1");
  if (max_roots < 0) throw std::invalid_argument("TreeRegistry: max_roots must be >= 0");
}

int TreeRegistry::capacity(std::optional<NodeId> parent) const {
  if (parent) return max_children_;
  return max_roots_ == 0 ? std::numeric_limits<int>::max() : max_roots_;
}

int TreeRegistry::child_count(std::optional<NodeId> parent) const {
  if (!parent) return static_cast<int>(roots_.size());
  return static_cast<int>(node(*parent).children.size());
}

std::optional<NodeId> TreeRegistry::find(std::optional<NodeId> parent, int branch_key) const {
  const auto& siblings = parent ? node(*parent).children : roots_;
  if (branch_key < 0 || branch_key >= static_cast<int>(siblings.size())) return std::nullopt;
  return siblings[static_cast<std::size_t>(branch_key)];
}

const TreeNode& TreeRegistry::node(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
    throw std::invalid_argument("TreeRegistry: unknown node " + std::to_string(id));
  }
  return nodes_[static_cast<std::size_t>(id)];
}

NodeId TreeRegistry::canonical_node(std::optional<NodeId> parent, int branch_key) {
  if (auto existing = find(parent, branch_key)) return *existing;
  const int present = child_count(parent);  // validates parent
  if (branch_key != present) {
    throw std::invalid_argument("TreeRegistry: branch key " + std::to_string(branch_key) +
                                " skips ahead of " + std::to_string(present) + " children");
  }
  if (branch_key >= capacity(parent)) {
    throw std::length_error("TreeRegistry: node already has the maximum of " +
                            std::to_string(capacity(parent)) + " children");
  }
  TreeNode fresh;
  fresh.global_id = static_cast<NodeId>(nodes_.size());
  fresh.parent = parent;
  fresh.level = parent ? node(*parent).level + 1 : 0;
  if (parent) {
    nodes_[static_cast<std::size_t>(*parent)].children.push_back(fresh.global_id);
  } else {
    roots_.push_back(fresh.global_id);
  }
  nodes_.push_back(std::move(fresh));
  return nodes_.back().global_id;
}

bool operator==(const TreeNode& a, const TreeNode& b) {
  return a.global_id == b.global_id && a.parent == b.parent && a.level == b.level &&
         a.children == b.children;
}

bool operator==(const TreeRegistry& a, const TreeRegistry& b) {
  return a.max_children_ == b.max_children_ && a.max_roots_ == b.max_roots_ &&
         a.nodes_ == b.nodes_ && a.roots_ == b.roots_;
}

bool validate_path(const PathAssignment& path, const TreeRegistry& registry, int max_depth) {
  if (path.node_ids.empty() || path.node_ids.size() != path.branch_keys.size()) return false;
  if (static_cast<int>(path.node_ids.size()) > max_depth) return false;
  std::optional<NodeId> parent;
  for (std::size_t l = 0; l < path.node_ids.size(); ++l) {
    const auto expected = registry.find(parent, path.branch_keys[l]);
    if (!expected || *expected != path.node_ids[l]) return false;
    if (registry.node(*expected).level != static_cast<int>(l)) return false;
    parent = *expected;
  }
  return true;
}

}  // namespace holmes
