#ifndef HOLMES_LIKELIHOOD_HPP
#define HOLMES_LIKELIHOOD_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Core>

namespace holmes {

/// One trial: binary feature column, outcome in the final row.
using Observation = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;
/// Features x trials, entries in {0, 1}.
using ObservationMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

using ObservationRef = Eigen::Ref<const Observation>;

/// Subset of feature rows that take part in a likelihood or update.
class FeatureMask {
 public:
  FeatureMask() = default;
  explicit FeatureMask(Eigen::Array<bool, Eigen::Dynamic, 1> include)
      : include_(std::move(include)) {}

  static FeatureMask all(Eigen::Index n) {
    return FeatureMask(Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, true));
  }
  /// Every feature except the final (outcome) row.
  static FeatureMask without_outcome(Eigen::Index n) {
    auto m = all(n);
    if (n > 0) m.include_(n - 1) = false;
    return m;
  }

  [[nodiscard]] Eigen::Index size() const { return include_.size(); }
  [[nodiscard]] bool contains(Eigen::Index f) const { return include_(f); }
  void set(Eigen::Index f, bool on) { include_(f) = on; }
  [[nodiscard]] const Eigen::Array<bool, Eigen::Dynamic, 1>& array() const { return include_; }

 private:
  Eigen::Array<bool, Eigen::Dynamic, 1> include_;
};

/// Beta-Bernoulli sufficient statistics for one cluster or leaf.
///
/// present(f) and absent(f) start at the pseudocount omega and grow by one
/// per observed presence or absence. Log predictive probabilities are cached
/// per feature and refreshed on update.
template <typename Scalar>
class BetaBernoulliStats {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  BetaBernoulliStats() = default;

  BetaBernoulliStats(Eigen::Index num_features, Scalar omega)
      : present_(Array::Constant(num_features, omega)),
        absent_(Array::Constant(num_features, omega)),
        omega_(omega) {
    if (num_features < 1) throw std::invalid_argument("BetaBernoulliStats: need >= 1 feature");
    if (!(omega > Scalar(0))) throw std::invalid_argument("BetaBernoulliStats: omega must be > 0");
    refresh();
  }

  [[nodiscard]] Eigen::Index num_features() const { return present_.size(); }
  [[nodiscard]] Scalar omega() const { return omega_; }
  [[nodiscard]] const Array& present() const { return present_; }
  [[nodiscard]] const Array& absent() const { return absent_; }

  /// Sum over masked features of log P(d_f | counts).
  [[nodiscard]] Scalar log_likelihood(const ObservationRef& obs, const FeatureMask& mask) const {
    check_shape(obs, mask);
    Scalar total(0);
    for (Eigen::Index f = 0; f < present_.size(); ++f) {
      if (mask.contains(f)) total += obs(f) ? log_p1_(f) : log_p0_(f);
    }
    return total;
  }

  /// log P(d_f | counts) for a single feature.
  [[nodiscard]] Scalar log_feature(Eigen::Index f, bool value) const {
    return value ? log_p1_(f) : log_p0_(f);
  }

  void update(const ObservationRef& obs, const FeatureMask& mask) {
    check_shape(obs, mask);
    for (Eigen::Index f = 0; f < present_.size(); ++f) {
      if (!mask.contains(f)) continue;
      if (obs(f)) {
        present_(f) += Scalar(1);
      } else {
        absent_(f) += Scalar(1);
      }
      refresh(f);
    }
  }

  /// P(feature present) = n_f / (n_f + b_f).
  [[nodiscard]] Scalar predictive_mean(Eigen::Index f) const {
    if (f < 0 || f >= present_.size()) {
      throw std::out_of_range("BetaBernoulliStats: feature index out of range");
    }
    return present_(f) / (present_(f) + absent_(f));
  }

  /// Number of update calls recorded on feature f.
  [[nodiscard]] Scalar observations(Eigen::Index f) const {
    return present_(f) + absent_(f) - Scalar(2) * omega_;
  }

  friend bool operator==(const BetaBernoulliStats& a, const BetaBernoulliStats& b) {
    return a.omega_ == b.omega_ && (a.present_ == b.present_).all() &&
           (a.absent_ == b.absent_).all();
  }

 private:
  void check_shape(const ObservationRef& obs, const FeatureMask& mask) const {
    if (obs.size() != present_.size() || mask.size() != present_.size()) {
      throw std::invalid_argument("BetaBernoulliStats: observation/mask length mismatch");
    }
  }
  void refresh() {
    log_p1_.resize(present_.size());
    log_p0_.resize(present_.size());
    for (Eigen::Index f = 0; f < present_.size(); ++f) refresh(f);
  }
  void refresh(Eigen::Index f) {
    using std::log;
    const Scalar log_total = log(present_(f) + absent_(f));
    log_p1_(f) = log(present_(f)) - log_total;
    log_p0_(f) = log(absent_(f)) - log_total;
  }

  Array present_;
  Array absent_;
  Array log_p1_;
  Array log_p0_;
  Scalar omega_ = Scalar(1);
};

using FeatureStats = BetaBernoulliStats<double>;

inline FeatureStats init_stats(Eigen::Index num_features, double omega) {
  return FeatureStats(num_features, omega);
}

/// Throws std::invalid_argument unless every entry is 0 or 1.
void require_binary(const ObservationRef& obs);

}  // namespace holmes

#endif  // HOLMES_LIKELIHOOD_HPP
