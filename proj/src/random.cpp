#include "holmes/random.hpp"

#include <stdexcept>

namespace holmes {

Rng Rng::derive(std::uint64_t root, std::uint64_t stream, std::uint64_t index) {
  // seed_seq consumes 32-bit words.
  std::seed_seq seq{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint64_t words[2];
  std::uint32_t raw[4];
  seq.generate(raw, raw + 4);
  words[0] = (static_cast<std::uint64_t>(raw[0]) << 32) | raw[1];
  words[1] = (static_cast<std::uint64_t>(raw[2]) << 32) | raw[3];
  return Rng(words[0] ^ (words[1] * 0x9E3779B97F4A7C15ULL));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::index: empty range");
  const unsigned __int128 wide = static_cast<unsigned __int128>(engine_()) * n;
  return static_cast<std::size_t>(wide >> 64);
}

std::size_t Rng::categorical(std::span<const double> weights) {
  if (weights.empty()) throw std::invalid_argument("Rng::categorical: no outcomes");
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("Rng::categorical: weights sum to zero");
  const double target = uniform() * total;
  double cumulative = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    cumulative += weights[k];
    if (target < cumulative) return k;
  }
  // Rounding can leave target marginally past the last edge; fall back to
  // the last bin with positive mass.
  for (std::size_t k = weights.size(); k-- > 0;) {
    if (weights[k] > 0.0) return k;
  }
  return weights.size() - 1;
}

}  // namespace holmes
