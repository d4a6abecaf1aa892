#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

namespace ringdsq {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a root seed and a stream index.
inline std::uint64_t mix_seed(std::uint64_t root, std::uint64_t stream) {
  return splitmix64(root + 0x9E3779B97F4A7C15ull * (stream + 1));
}

/// mt19937_64 with the distributions implemented locally, so that draw
/// sequences do not depend on standard-library distribution internals and the
/// engine state is the whole serialization surface.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform on [0, 1).
  double uniform() { return (gen_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Uniform on {0, ..., n-1}; unbiased via rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t rem = (UINT64_MAX % n + 1) % n;  // 2^64 mod n
    const std::uint64_t limit = UINT64_MAX - rem;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x > limit);
    return x % n;
  }

  /// One Box-Muller draw per call (no cached second value).
  double normal(double mean, double sd) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) *
                      std::cos(2.0 * std::numbers::pi * u2);
  }

  std::string save() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void restore(const std::string& state) {
    std::istringstream is(state);
    is >> gen_;
  }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::mt19937_64 gen_;
};

}  // namespace ringdsq
