#pragma once

// Reproducible random streams for Monte Carlo replicas.
//
// Every replica and every time step gets its own statelessly derived
// generator: the stream for (seed, replica, step) is a xoshiro256++ state
// seeded through splitmix64 from the three values. This makes runs
// resumable and replayable without serializing generator state, and makes
// results independent of worker count (replica r always consumes the same
// numbers no matter which thread runs it).

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace spde {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Xoshiro256pp {
 public:
  Xoshiro256pp() : Xoshiro256pp(0) {}

  explicit Xoshiro256pp(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in (0, 1]; never returns 0 so logs are safe.
  double next_unit() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform double in [-1, 1).
  double next_symmetric() {
    return static_cast<double>(static_cast<std::int64_t>(next() >> 10)) * 0x1.0p-53 - 1.0;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
};

// Derivation rule for replica/step streams. Documented so that checkpoint
// replay and resumption can re-create the exact same draws.
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t replica,
                                        std::uint64_t step) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s = a ^ (replica * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL);
  std::uint64_t b = splitmix64(s);
  s = b ^ (step * 0xbf58476d1ce4e5b9ULL + 0x1ce4e5b9ULL);
  return splitmix64(s);
}

// Standard normal draws via the Marsaglia polar method on a xoshiro stream.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t stream_seed) : rng_(stream_seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, q;
    do {
      u = rng_.next_symmetric();
      v = rng_.next_symmetric();
      q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    const double f = std::sqrt(-2.0 * std::log(q) / q);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  void fill(std::span<double> out) {
    for (auto& x : out) x = next();
  }

 private:
  Xoshiro256pp rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Convenience: the per-step noise stream used by the SDE integrator.
inline GaussianStream step_stream(std::uint64_t seed, std::uint64_t replica,
                                  std::uint64_t step) {
  return GaussianStream(derive_stream_seed(seed, replica, step));
}

}  // namespace spde
