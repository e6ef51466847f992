#include "holmes/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace holmes {

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::kFlat ? "flat" : "holmes";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "flat") return ModelKind::kFlat;
  if (name == "holmes" || name == "hier" || name == "hierarchical") return ModelKind::kHolmes;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

void EnsembleConfig::validate() const {
  if (num_particles < 1) throw std::invalid_argument("num_particles must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be > 0");
  if (!(omega > 0.0) || !std::isfinite(omega)) throw std::invalid_argument("omega must be > 0");
  if (max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
  if (max_children < 1) throw std::invalid_argument("max_children must be >= 1");
}

// ---------------------------------------------------------------------------
// PathTable

void PathTable::push(std::span<const NodeId> path) {
  entries_.insert(entries_.end(), path.begin(), path.end());
  offsets_.push_back(entries_.size());
}

void PathTable::clear() {
  entries_.clear();
  offsets_.assign(1, 0);
}

void PathTable::reserve(std::size_t rows, std::size_t entries) {
  offsets_.reserve(rows + 1);
  entries_.reserve(entries);
}

std::span<const NodeId> PathTable::operator[](std::size_t row) const {
  return std::span<const NodeId>(entries_).subspan(offsets_[row],
                                                   offsets_[row + 1] - offsets_[row]);
}

// ---------------------------------------------------------------------------
// Filter machinery

std::vector<double> normalize_log_weights(std::span<double> log_weights, bool* reset) {
  if (reset) *reset = false;
  std::vector<double> weights(log_weights.size());
  if (log_weights.empty()) return weights;
  double peak = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) {
    if (!std::isnan(lw)) peak = std::max(peak, lw);
  }
  if (!std::isfinite(peak)) {
    const double uniform = 1.0 / static_cast<double>(log_weights.size());
    std::fill(weights.begin(), weights.end(), uniform);
    std::fill(log_weights.begin(), log_weights.end(), std::log(uniform));
    if (reset) *reset = true;
    return weights;
  }
  double total = 0.0;
  for (std::size_t p = 0; p < log_weights.size(); ++p) {
    weights[p] = std::isnan(log_weights[p]) ? 0.0 : std::exp(log_weights[p] - peak);
    total += weights[p];
  }
  const double log_total = std::log(total) + peak;
  for (std::size_t p = 0; p < log_weights.size(); ++p) {
    weights[p] /= total;
    log_weights[p] -= log_total;
  }
  return weights;
}

std::vector<int> resample_with_offset(std::span<const double> weights, double u) {
  const std::size_t n = weights.size();
  std::vector<int> ancestors(n);
  if (n == 0) return ancestors;
  double cumulative = weights[0];
  std::size_t k = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double position = (static_cast<double>(j) + u) / static_cast<double>(n);
    while (position >= cumulative && k + 1 < n) {
      ++k;
      cumulative += weights[k];
    }
    // Skip trailing zero-weight particles reached through rounding.
    std::size_t pick = k;
    while (weights[pick] <= 0.0 && pick > 0) --pick;
    ancestors[j] = static_cast<int>(pick);
  }
  return ancestors;
}

std::vector<int> resample(std::span<const double> weights, Rng& rng) {
  return resample_with_offset(weights, rng.uniform());
}

NodeId majority_assignment(std::span<const NodeId> assignments) {
  if (assignments.empty()) return kInvalidNode;
  std::vector<NodeId> sorted(assignments.begin(), assignments.end());
  std::sort(sorted.begin(), sorted.end());
  NodeId best = sorted.front();
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    // Ascending scan with strict '>' keeps the smaller id on ties.
    if (j - i > best_count) {
      best_count = j - i;
      best = sorted[i];
    }
    i = j;
  }
  return best < 0 ? kInvalidNode : best;
}

namespace {

struct Proposal {
  double predicted = 0.5;
  double log_features = 0.0;  // outcome row excluded
  double log_outcome = 0.0;
};

struct Weighed {
  double predicted = 0.5;
  std::vector<int> ancestors;
  bool reset = false;
};

template <typename Particle>
Weighed weigh_and_resample(std::vector<Particle>& particles, std::span<const Proposal> proposals,
                           bool mask_outcome, Rng& rng) {
  const std::size_t n = particles.size();
  Weighed out;

  // Prediction: feature-only posterior over the fresh proposals.
  std::vector<double> log_w(n);
  for (std::size_t p = 0; p < n; ++p) log_w[p] = particles[p].log_weight + proposals[p].log_features;
  const auto predictive = normalize_log_weights(log_w);
  double lo = 1.0, hi = 0.0, total = 0.0, offset = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    lo = std::min(lo, proposals[p].predicted);
    hi = std::max(hi, proposals[p].predicted);
  }
  // Offsets from the smallest mean keep identical proposals exact.
  for (std::size_t p = 0; p < n; ++p) {
    total += predictive[p];
    offset += predictive[p] * (proposals[p].predicted - lo);
  }
  out.predicted = n == 0 ? 0.5 : std::clamp(lo + offset / total, lo, hi);

  for (std::size_t p = 0; p < n; ++p) {
    particles[p].log_weight += proposals[p].log_features;
    if (!mask_outcome) particles[p].log_weight += proposals[p].log_outcome;
    log_w[p] = particles[p].log_weight;
  }
  const auto weights = normalize_log_weights(log_w, &out.reset);
  out.ancestors = resample(weights, rng);
  return out;
}

/// particles <- particles[ancestors], moving the final copy of each source.
template <typename Particle>
void reorder(std::vector<Particle>& particles, std::span<const int> ancestors) {
  std::vector<int> remaining(particles.size(), 0);
  for (int a : ancestors) ++remaining[static_cast<std::size_t>(a)];
  std::vector<Particle> next;
  next.reserve(ancestors.size());
  for (int a : ancestors) {
    auto& src = particles[static_cast<std::size_t>(a)];
    if (--remaining[static_cast<std::size_t>(a)] == 0) {
      next.push_back(std::move(src));
    } else {
      next.push_back(src);
    }
    next.back().log_weight = 0.0;
  }
  particles = std::move(next);
}

std::vector<NodeId> vote_by_depth(const PathTable& proposals, std::span<const int> rows) {
  std::size_t depth = 0;
  for (int r : rows) depth = std::max(depth, proposals[static_cast<std::size_t>(r)].size());
  std::vector<NodeId> out(depth, kInvalidNode);
  std::vector<NodeId> votes(rows.size());
  for (std::size_t d = 0; d < depth; ++d) {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const auto path = proposals[static_cast<std::size_t>(rows[j])];
      votes[j] = d < path.size() ? path[d] : kInvalidNode;
    }
    out[d] = majority_assignment(votes);
  }
  return out;
}

void check_observation(const ObservationRef& obs, Eigen::Index expected) {
  if (obs.size() != expected) {
    throw std::invalid_argument("observation has " + std::to_string(obs.size()) +
                                " features, expected " + std::to_string(expected));
  }
  require_binary(obs);
}

std::shared_ptr<const FeatureStats> updated_stats(const std::shared_ptr<const FeatureStats>& old,
                                                  const FeatureStats& fresh,
                                                  const ObservationRef& obs,
                                                  const FeatureMask& mask) {
  auto next = std::make_shared<FeatureStats>(old ? *old : fresh);
  next->update(obs, mask);
  return next;
}

}  // namespace

// ---------------------------------------------------------------------------
// Flat

FlatEnsemble::FlatEnsemble(const EnsembleConfig& config, Eigen::Index num_features)
    : config_(config),
      num_features_(num_features),
      full_mask_(FeatureMask::all(num_features)),
      predict_mask_(FeatureMask::without_outcome(num_features)),
      fresh_(num_features, config.omega),
      registry_(config.max_children, 0) {
  config_.validate();
  particles_.resize(static_cast<std::size_t>(config_.num_particles));
  for (auto& p : particles_) p.crp.alpha = config_.alpha;
}

TrialResult FlatEnsemble::step(const ObservationRef& obs) {
  check_observation(obs, num_features_);
  Rng rng = derive(config_.seed, Stream::kModelTrial, static_cast<std::uint64_t>(trials_));
  const std::size_t n = particles_.size();
  const Eigen::Index outcome = num_features_ - 1;

  TrialResult result;
  result.trial = trials_;
  result.proposals.reserve(n, n);
  std::vector<int> keys(n);
  std::vector<NodeId> ids(n);
  std::vector<Proposal> proposals(n);
  std::vector<double> prior;

  for (std::size_t p = 0; p < n; ++p) {
    FlatParticle& part = particles_[p];
    prior.clear();
    if (config_.flat_stickiness && part.previous_key) {
      const auto probs = sticky_branch_probabilities(LevelCounts{part.crp.counts},
                                                     part.previous_key, config_.omega,
                                                     config_.alpha);
      prior.assign(probs.existing.data(), probs.existing.data() + probs.existing.size());
      prior.push_back(probs.new_branch);
    } else {
      const auto probs = crp_probabilities(part.crp);
      for (const auto& [id, pr] : probs.existing) prior.push_back(pr);
      prior.push_back(probs.new_cluster);
    }
    const int key = static_cast<int>(rng.categorical(prior));
    keys[p] = key;
    ids[p] = registry_.canonical_node(std::nullopt, key);
    const FeatureStats& stats =
        key < static_cast<int>(part.stats.size()) ? *part.stats[static_cast<std::size_t>(key)]
                                                  : fresh_;
    proposals[p].predicted = stats.predictive_mean(outcome);
    proposals[p].log_features = stats.log_likelihood(obs, predict_mask_);
    proposals[p].log_outcome = stats.log_feature(outcome, obs(outcome) != 0);
    result.proposals.push(std::span<const NodeId>(&ids[p], 1));
  }

  auto weighed = weigh_and_resample(particles_, proposals, config_.mask_outcome_in_weight, rng);
  if (weighed.reset) ++weight_resets_;

  for (std::size_t p = 0; p < n; ++p) {
    FlatParticle& part = particles_[p];
    const auto key = static_cast<std::size_t>(keys[p]);
    part.crp.seat(ids[p]);
    if (key == part.stats.size()) part.stats.emplace_back();
    part.stats[key] = updated_stats(part.stats[key], fresh_, obs, full_mask_);
    part.previous_key = keys[p];
  }
  reorder(particles_, weighed.ancestors);

  result.predicted = weighed.predicted;
  result.binarized = weighed.predicted > 0.5 ? 1 : 0;
  result.majority_by_depth = vote_by_depth(result.proposals, weighed.ancestors);
  result.ancestors = std::move(weighed.ancestors);
  ++trials_;
  return result;
}

// ---------------------------------------------------------------------------
// HOLMES

const HierNode* HierParticle::find(std::span<const int> keys) const {
  if (keys.empty()) return nullptr;
  const auto first = static_cast<std::size_t>(keys[0]);
  if (first >= top_nodes.size()) return nullptr;
  const HierNode* node = top_nodes[first].get();
  for (std::size_t l = 1; l < keys.size() && node != nullptr; ++l) {
    const auto k = static_cast<std::size_t>(keys[l]);
    node = k < node->child_nodes.size() ? node->child_nodes[k].get() : nullptr;
  }
  return node;
}

namespace {

const LevelCounts kUnvisited{};

/// Path-copying update of one subtree along `path` from `level` down.
std::shared_ptr<const HierNode> extend(const std::shared_ptr<const HierNode>& node,
                                       const PathAssignment& path, std::size_t level,
                                       const ObservationRef& obs, const FeatureStats& fresh,
                                       const FeatureMask& mask) {
  auto next = node ? std::make_shared<HierNode>(*node) : std::make_shared<HierNode>();
  next->id = path.node_ids[level];
  next->level = static_cast<int>(level);
  if (level + 1 == path.depth()) {
    next->leaf = updated_stats(next->leaf, fresh, obs, mask);
    ++next->terminal_count;
    return next;
  }
  const auto key = static_cast<std::size_t>(path.branch_keys[level + 1]);
  if (key == next->child_nodes.size()) {
    next->children.counts.push_back(0);
    next->child_nodes.emplace_back();
  }
  ++next->children.counts[key];
  next->child_nodes[key] = extend(next->child_nodes[key], path, level + 1, obs, fresh, mask);
  return next;
}

}  // namespace

HolmesEnsemble::HolmesEnsemble(const EnsembleConfig& config, Eigen::Index num_features)
    : config_(config),
      num_features_(num_features),
      full_mask_(FeatureMask::all(num_features)),
      predict_mask_(FeatureMask::without_outcome(num_features)),
      fresh_(num_features, config.omega),
      registry_(config.max_children, config.max_children) {
  config_.validate();
  particles_.resize(static_cast<std::size_t>(config_.num_particles));
}

TrialResult HolmesEnsemble::step(const ObservationRef& obs) {
  check_observation(obs, num_features_);
  Rng rng = derive(config_.seed, Stream::kModelTrial, static_cast<std::uint64_t>(trials_));
  const std::size_t n = particles_.size();
  const Eigen::Index outcome = num_features_ - 1;
  const PathPrior prior{config_.alpha, config_.omega, config_.max_depth, true};

  TrialResult result;
  result.trial = trials_;
  result.proposals.reserve(n, 3 * n);
  std::vector<PathAssignment> paths(n);
  std::vector<Proposal> proposals(n);

  for (std::size_t p = 0; p < n; ++p) {
    const HierParticle& part = particles_[p];
    auto children_of = [&part](std::size_t depth, std::span<const int> keys) -> const LevelCounts& {
      if (depth == 0) return part.top;
      const HierNode* node = part.find(keys);
      return node ? node->children : kUnvisited;
    };
    const PathAssignment* previous = part.previous_path ? &*part.previous_path : nullptr;
    paths[p] = sample_path(children_of, previous, prior, registry_, rng);

    const HierNode* leaf_node = part.find(paths[p].branch_keys);
    const FeatureStats& stats = leaf_node && leaf_node->leaf ? *leaf_node->leaf : fresh_;
    proposals[p].predicted = stats.predictive_mean(outcome);
    proposals[p].log_features = stats.log_likelihood(obs, predict_mask_);
    proposals[p].log_outcome = stats.log_feature(outcome, obs(outcome) != 0);
    result.proposals.push(paths[p].node_ids);
  }

  auto weighed = weigh_and_resample(particles_, proposals, config_.mask_outcome_in_weight, rng);
  if (weighed.reset) ++weight_resets_;

  for (std::size_t p = 0; p < n; ++p) {
    HierParticle& part = particles_[p];
    const PathAssignment& path = paths[p];
    const auto key = static_cast<std::size_t>(path.branch_keys[0]);
    if (key == part.top_nodes.size()) {
      part.top.counts.push_back(0);
      part.top_nodes.emplace_back();
    }
    ++part.top.counts[key];
    part.top_nodes[key] = extend(part.top_nodes[key], path, 0, obs, fresh_, full_mask_);
    part.previous_path = std::move(paths[p]);
  }
  reorder(particles_, weighed.ancestors);

  result.predicted = weighed.predicted;
  result.binarized = weighed.predicted > 0.5 ? 1 : 0;
  result.majority_by_depth = vote_by_depth(result.proposals, weighed.ancestors);
  result.ancestors = std::move(weighed.ancestors);
  ++trials_;
  return result;
}

// ---------------------------------------------------------------------------
// Runs

namespace {

template <typename Ensemble>
RunResult run_with(Ensemble ensemble, ModelKind kind, const ObservationMatrix& observations) {
  RunResult run{kind, ensemble.config(), observations.rows(), {}, ensemble.registry(), 0};
  run.trials.reserve(static_cast<std::size_t>(observations.cols()));
  for (Eigen::Index t = 0; t < observations.cols(); ++t) {
    try {
      run.trials.push_back(ensemble.step(observations.col(t)));
    } catch (const std::exception& e) {
      throw TrialError(static_cast<int>(t), e.what());
    }
  }
  run.registry = ensemble.registry();
  run.weight_resets = ensemble.weight_resets();
  return run;
}

}  // namespace

RunResult run_sequence(ModelKind kind, const EnsembleConfig& config,
                       const ObservationMatrix& observations) {
  if (observations.rows() < 1) throw std::invalid_argument("observation matrix has no rows");
  if (kind == ModelKind::kFlat) {
    return run_with(FlatEnsemble(config, observations.rows()), kind, observations);
  }
  return run_with(HolmesEnsemble(config, observations.rows()), kind, observations);
}

std::vector<std::vector<int>> trace_lineages(const RunResult& run) {
  std::vector<std::vector<int>> lineage(run.trials.size());
  if (run.trials.empty()) return lineage;
  const std::size_t n = run.trials.back().ancestors.size();
  std::vector<int> index(n);
  std::iota(index.begin(), index.end(), 0);
  for (std::size_t t = run.trials.size(); t-- > 0;) {
    const auto& ancestors = run.trials[t].ancestors;
    lineage[t].resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const int row = ancestors[static_cast<std::size_t>(index[j])];
      lineage[t][j] = row;
      index[j] = row;
    }
  }
  return lineage;
}

int max_path_depth(const RunResult& run) {
  std::size_t depth = 0;
  for (const auto& trial : run.trials) {
    for (std::size_t p = 0; p < trial.proposals.size(); ++p) {
      depth = std::max(depth, trial.proposals[p].size());
    }
  }
  return static_cast<int>(depth);
}

namespace {

std::vector<NodeId> vote_at_depth(const RunResult& run, int depth,
                                  const std::vector<std::vector<int>>& rows) {
  std::vector<NodeId> out(run.trials.size(), kInvalidNode);
  std::vector<NodeId> votes;
  for (std::size_t t = 0; t < run.trials.size(); ++t) {
    const auto& proposals = run.trials[t].proposals;
    votes.clear();
    for (int r : rows[t]) {
      const auto path = proposals[static_cast<std::size_t>(r)];
      votes.push_back(depth < static_cast<int>(path.size()) ? path[static_cast<std::size_t>(depth)]
                                                            : kInvalidNode);
    }
    out[t] = majority_assignment(votes);
  }
  return out;
}

}  // namespace

std::vector<NodeId> posterior_assignments(const RunResult& run, int depth) {
  return posterior_assignments(run, depth, trace_lineages(run));
}

std::vector<NodeId> posterior_assignments(const RunResult& run, int depth,
                                          const std::vector<std::vector<int>>& lineages) {
  return vote_at_depth(run, depth, lineages);
}

std::vector<NodeId> online_assignments(const RunResult& run, int depth) {
  std::vector<std::vector<int>> rows(run.trials.size());
  for (std::size_t t = 0; t < run.trials.size(); ++t) rows[t] = run.trials[t].ancestors;
  return vote_at_depth(run, depth, rows);
}

std::vector<double> predictions(const RunResult& run) {
  std::vector<double> out;
  out.reserve(run.trials.size());
  for (const auto& t : run.trials) out.push_back(t.predicted);
  return out;
}

}  // namespace holmes
