#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>

namespace se3dif {

// splitmix64 finalizer; good enough to whiten seed material and derive streams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic RNG with explicit stream derivation. Gaussian draws use
// Box-Muller on 53-bit uniforms so the byte stream is identical across
// platforms and thread counts (std::normal_distribution is not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix64(seed)), eng_(mix64(key_ ^ 0x6a09e667f3bcc909ull)) {}

  // Independent child stream addressed by (a, b); depends only on the seed
  // path, never on how many draws were taken from the parent.
  Rng derive(std::uint64_t a, std::uint64_t b = 0) const {
    return Rng(mix64(key_ ^ mix64(a ^ mix64(b))));
  }

  std::uint64_t bits() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in {0, ..., n-1}, rejection sampled (no modulo bias)
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t mask = ~0ull >> __builtin_clzll(n - 1 | 1);
    std::uint64_t x;
    do {
      x = eng_() & mask;
    } while (x >= n);
    return x;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd normal_vec(int n) {
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) out(i) = normal();
    return out;
  }

  Eigen::Vector3d normal3() {
    Eigen::Vector3d out;
    for (int i = 0; i < 3; ++i) out(i) = normal();
    return out;
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace se3dif
