// Deterministic random streams. Every consumer takes an explicit seed and all
// draw algorithms are spelled out here, so runs reproduce bit-for-bit across
// standard library implementations.
#pragma once

#include <cstdint>
#include <random>

namespace sigp {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Derive an independent stream seed from a root seed, a stream tag and an
/// index (agent number, cycle number, ...).
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  std::uint64_t s = root ^ (stream * 0x9e3779b97f4a7c15ull);
  std::uint64_t h = splitmix64(s);
  s ^= index + 0x2545f4914f6cdd1dull;
  h ^= splitmix64(s);
  return h;
}

// Stream tags.
inline constexpr std::uint64_t kStreamSample = 0x53414d50;   // basis sampling, per agent
inline constexpr std::uint64_t kStreamSbmp = 0x53424d50;     // trajectory sampling, per agent
inline constexpr std::uint64_t kStreamCycle = 0x4359434c;    // per-cycle planner seed
inline constexpr std::uint64_t kStreamDropout = 0x44524f50;  // observation dropout
inline constexpr std::uint64_t kStreamNoise = 0x4e4f4953;    // observation noise

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (pairwise, cached spare).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sigp
