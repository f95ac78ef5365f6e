#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <tuple>

namespace spde {

// Integer mode index on the 2*pi-periodic torus. The zero vector is not a
// valid mode (fields have zero mean), so the Stokes eigenvalue |k|^2 is
// strictly positive for every retained mode.
struct WaveVector {
  int x = 0;
  int y = 0;
  int z = 0;

  constexpr int norm_sq() const { return x * x + y * y + z * z; }

  constexpr int sup_norm() const {
    int a = x < 0 ? -x : x;
    int b = y < 0 ? -y : y;
    int c = z < 0 ? -z : z;
    int m = a > b ? a : b;
    return m > c ? m : c;
  }

  constexpr bool is_zero() const { return x == 0 && y == 0 && z == 0; }

  // One of {k, -k} is the representative of the conjugate pair: the one
  // whose first nonzero component is positive.
  constexpr bool is_representative() const {
    if (x != 0) return x > 0;
    if (y != 0) return y > 0;
    return z > 0;
  }

  constexpr WaveVector operator-() const { return {-x, -y, -z}; }

  friend constexpr WaveVector operator+(WaveVector a, WaveVector b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend constexpr WaveVector operator-(WaveVector a, WaveVector b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend constexpr bool operator==(WaveVector a, WaveVector b) {
    return a.x == b.x && a.y == b.y && a.z == b.z;
  }
  friend constexpr bool operator!=(WaveVector a, WaveVector b) { return !(a == b); }

  // Mode ordering: by eigenvalue |k|^2, ties broken lexicographically, so
  // "the first m eigenvectors" is reproducible across runs.
  friend constexpr bool operator<(WaveVector a, WaveVector b) {
    return std::make_tuple(a.norm_sq(), a.x, a.y, a.z) <
           std::make_tuple(b.norm_sq(), b.x, b.y, b.z);
  }
};

struct WaveVectorHash {
  std::size_t operator()(const WaveVector& k) const {
    // Components stay tiny (|k| <= cutoff), pack then mix.
    std::uint64_t v = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.x)) << 42) ^
                      (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.y)) << 21) ^
                      static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.z));
    v ^= v >> 33;
    v *= 0xff51afd7ed558ccdULL;
    v ^= v >> 33;
    return static_cast<std::size_t>(v);
  }
};

}  // namespace spde
