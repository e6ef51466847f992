#include "holmes/taskgen.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "holmes/random.hpp"

namespace holmes {

void CompositionalTaskSpec::validate() const {
  if (levels < 2 || levels > 5) {
    throw std::invalid_argument("compositional task needs 2 <= levels <= 5, got " +
                                std::to_string(levels));
  }
  if (trials_per_context < 0) throw std::invalid_argument("trials_per_context must be >= 0");
  if (noise_prob < 0.0 || noise_prob > 1.0) throw std::invalid_argument("noise_prob not in [0,1]");
}

void SwitchingTaskSpec::validate() const {
  if (slow_block_trials < 0 || fast_block_trials < 1 || num_slow_contexts < 0) {
    throw std::invalid_argument("switching task block sizes must be positive");
  }
  if (outcome_flip_prob < 0.0 || outcome_flip_prob > 1.0) {
    throw std::invalid_argument("outcome_flip_prob not in [0,1]");
  }
}

std::vector<int> GeneratedTask::outcomes() const {
  std::vector<int> out;
  out.reserve(truth.size());
  for (const auto& t : truth) out.push_back(t.outcome);
  return out;
}

std::vector<int> GeneratedTask::factor(int level) const {
  if (kind != TaskKind::kCompositional || level < 1 || level > levels) {
    throw std::invalid_argument("no compositional factor at level " + std::to_string(level));
  }
  std::vector<int> out;
  out.reserve(truth.size());
  for (const auto& t : truth) out.push_back(t.level_values[static_cast<std::size_t>(level - 1)]);
  return out;
}

std::vector<int> GeneratedTask::context_ids() const {
  std::vector<int> out;
  out.reserve(truth.size());
  for (const auto& t : truth) out.push_back(t.context_id);
  return out;
}

std::vector<Context> enumerate_contexts(int levels) {
  if (levels < 2 || levels > 5) {
    throw std::invalid_argument("enumerate_contexts: levels must be in [2, 5], got " +
                                std::to_string(levels));
  }
  std::vector<std::vector<int>> current;
  for (int o = 0; o < 4; ++o) current.push_back({o});
  for (int level = 2; level <= levels; ++level) {
    std::vector<std::vector<int>> next;
    next.reserve(current.size() * 2);
    for (const auto& sub : current) {
      for (int v = 0; v < 2; ++v) {
        auto ctx = sub;
        ctx.push_back(v);
        next.push_back(std::move(ctx));
      }
    }
    current = std::move(next);
  }
  std::vector<Context> out;
  out.reserve(current.size());
  for (std::size_t i = 0; i < current.size(); ++i) {
    out.push_back(Context{std::move(current[i]), static_cast<int>(i)});
  }
  return out;
}

Observation encode_features(const Context& context, int levels) {
  Observation f = Observation::Zero(levels + 4);
  Eigen::Index i = 0;
  for (int level = levels; level >= 3; --level) {
    f(i++) = static_cast<std::uint8_t>(context.level_value(level));
  }
  const auto first = static_cast<std::uint8_t>(context.level_value(2));
  f(i++) = first;
  f(i++) = first;
  f(i + context.level_value(1)) = 1;
  return f;
}

int outcome_rule(int levels, const std::vector<int>& level_values) {
  if (static_cast<int>(level_values.size()) < levels) {
    throw std::invalid_argument("outcome_rule: missing latent values");
  }
  const auto value = [&](int level) { return level_values[static_cast<std::size_t>(level - 1)]; };
  if (levels == 2) return value(2) == 0 ? 1 : 0;
  return value(levels) == 0 && value(levels - 1) == 0 ? 1 : 0;
}

GeneratedTask generate_compositional(const CompositionalTaskSpec& spec) {
  spec.validate();
  const auto contexts = enumerate_contexts(spec.levels);
  const int features = spec.num_features();
  const int obs_offset = features - 4;  // start of the one-hot block

  Rng noise = derive(spec.seed, Stream::kTaskNoise);
  Rng shuffler = derive(spec.seed, Stream::kTaskShuffle);

  struct Draft {
    Observation features;
    TrialGroundTruth truth;
  };
  std::vector<Draft> drafts;
  drafts.reserve(contexts.size() * static_cast<std::size_t>(spec.trials_per_context));
  for (const auto& ctx : contexts) {
    const Observation prototype = encode_features(ctx, spec.levels);
    TrialGroundTruth truth;
    truth.level_values = ctx.values;
    truth.context_id = ctx.id;
    truth.outcome_clean = outcome_rule(spec.levels, ctx.values);
    truth.outcome = truth.outcome_clean;
    for (int r = 0; r < spec.trials_per_context; ++r) {
      Draft d{prototype, truth};
      if (noise.bernoulli(spec.noise_prob)) {
        const auto bit = obs_offset + static_cast<Eigen::Index>(noise.index(4));
        d.features(bit) = static_cast<std::uint8_t>(1 - d.features(bit));
      }
      drafts.push_back(std::move(d));
    }
  }
  shuffler.shuffle(drafts);

  GeneratedTask task;
  task.kind = TaskKind::kCompositional;
  task.levels = spec.levels;
  task.observations.resize(features + 1, static_cast<Eigen::Index>(drafts.size()));
  task.truth.reserve(drafts.size());
  for (std::size_t t = 0; t < drafts.size(); ++t) {
    const auto col = static_cast<Eigen::Index>(t);
    task.observations.col(col).head(features) = drafts[t].features;
    task.observations(features, col) = static_cast<std::uint8_t>(drafts[t].truth.outcome);
    task.truth.push_back(std::move(drafts[t].truth));
  }
  return task;
}

int switching_outcome(int rule, int rewarded_value, int shape, int texture) {
  const int relevant = rule == 0 ? shape : texture;
  return relevant == rewarded_value ? 1 : 0;
}

GeneratedTask generate_switching(const SwitchingTaskSpec& spec) {
  spec.validate();
  Rng shuffler = derive(spec.seed, Stream::kTaskShuffle);
  Rng noise = derive(spec.seed, Stream::kTaskNoise);

  GeneratedTask task;
  task.kind = TaskKind::kSwitching;
  task.observations.resize(3, spec.num_trials());
  task.truth.reserve(static_cast<std::size_t>(spec.num_trials()));

  Eigen::Index t = 0;
  for (int slow = 0; slow < spec.num_slow_contexts; ++slow) {
    const int rule = slow % 2;
    int remaining = spec.slow_block_trials;
    for (int block = 0; remaining > 0; ++block) {
      const int rewarded = block % 2;
      std::vector<int> stimuli(static_cast<std::size_t>(spec.fast_block_trials));
      for (std::size_t i = 0; i < stimuli.size(); ++i) stimuli[i] = static_cast<int>(i % 4);
      shuffler.shuffle(stimuli);
      const int take = std::min(remaining, spec.fast_block_trials);
      for (int i = 0; i < take; ++i) {
        const int stimulus = stimuli[static_cast<std::size_t>(i)];
        const int shape = stimulus >> 1;
        const int texture = stimulus & 1;
        TrialGroundTruth truth;
        truth.rule = rule;
        truth.rewarded_value = rewarded;
        truth.slow_context = slow;
        truth.fast_block = block;
        truth.context_id = 2 * rule + rewarded;
        truth.outcome_clean = switching_outcome(rule, rewarded, shape, texture);
        truth.outcome = noise.bernoulli(spec.outcome_flip_prob) ? 1 - truth.outcome_clean
                                                                 : truth.outcome_clean;
        task.observations(0, t) = static_cast<std::uint8_t>(shape);
        task.observations(1, t) = static_cast<std::uint8_t>(texture);
        task.observations(2, t) = static_cast<std::uint8_t>(truth.outcome);
        task.truth.push_back(std::move(truth));
        ++t;
      }
      remaining -= take;
    }
  }
  return task;
}

}  // namespace holmes
