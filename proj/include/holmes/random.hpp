#ifndef HOLMES_RANDOM_HPP
#define HOLMES_RANDOM_HPP

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace holmes {

/// Seeded random source with platform-stable draws.
///
/// The standard distributions are implementation-defined, so every draw is
/// built directly from the raw output of std::mt19937_64, whose sequence is
/// fixed by the standard. Identical seeds give identical draws on every
/// conforming toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for (root, stream tag, index), e.g. one per trial.
  static Rng derive(std::uint64_t root, std::uint64_t stream, std::uint64_t index);

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();

  /// Uniform integer on [0, n). n must be positive.
  std::size_t index(std::size_t n);

  bool bernoulli(double p) { return uniform() < p; }

  /// Inverse-CDF draw from unnormalized non-negative weights, scanned in
  /// order. Zero-weight bins are never returned.
  std::size_t categorical(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Stream tags used with Rng::derive so that independent consumers of one
/// root seed never share a sequence.
enum class Stream : std::uint64_t {
  kTaskShuffle = 1,
  kTaskNoise = 2,
  kModelTrial = 3,
  kSweepParameters = 4,
  kModelSeed = 5,
};

inline Rng derive(std::uint64_t root, Stream stream, std::uint64_t index = 0) {
  return Rng::derive(root, static_cast<std::uint64_t>(stream), index);
}

}  // namespace holmes

#endif  // HOLMES_RANDOM_HPP
