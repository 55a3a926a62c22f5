#pragma once

// Deterministic random number utilities.
//
// Every stochastic component of the library draws from a named stream derived
// from a single 64-bit master seed, so that consuming one stream never shifts
// another (drawing sampling masks does not perturb weight initialization).
// Stream seeds are derived by chaining splitmix64 over the master seed and a
// purpose tag; sub-streams (per epoch, per sweep cell, per run) chain further
// words through mix_seed. Draws come from std::mt19937_64, whose output
// sequence is fixed by the C++ standard, and are converted to doubles with
// explicit bit arithmetic rather than std::*_distribution, so sequences are
// identical across standard library implementations.

#include <cmath>
#include <cstdint>
#include <random>

namespace gcnlab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Purpose tags, one independent stream per purpose.
enum class Stream : std::uint64_t {
  graph_gen = 1,
  init = 2,
  sampling = 3,
  dropout = 4,
};

inline std::uint64_t mix_seed(std::uint64_t seed) { return splitmix64(seed); }

// Fold extra words (purpose, epoch index, cell index, ...) into a seed.
template <class... Rest>
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t word, Rest... rest) {
  return mix_seed(splitmix64(seed ^ splitmix64(word)), rest...);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t master_seed, Stream purpose) {
    return Rng(mix_seed(master_seed, static_cast<std::uint64_t>(purpose)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via Box-Muller; keeps the spare draw.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double two_pi = 6.283185307179586476925286766559;
    double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(two_pi * u2);
    has_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gcnlab
