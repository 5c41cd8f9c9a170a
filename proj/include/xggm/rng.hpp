#pragma once

#include <cmath>
#include <cstdint>

#include "xggm/matrix.hpp"

namespace xggm {

/// Deterministic splittable generator. A (seed, stream) pair is hashed into the
/// starting state, so substreams are mutually independent and the sequence for
/// a given pair is identical across runs and platforms (pure 64-bit integer
/// arithmetic plus IEEE sqrt/log).
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix(mix(seed ^ 0x6a09e667f3bcc909ull) ^
                   (0x94d049bb133111ebull * (stream + 0x9e3779b97f4a7c15ull)))) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (-1, 1) excluding exact 0 only with measure zero.
  double uniform_signed() { return 2.0 * uniform() - 1.0; }

  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection-free modulo is fine here: n is tiny relative to 2^64.
    return next_u64() % n;
  }

  /// Standard normal via the Marsaglia polar method, second deviate cached.
  double standard_normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u, v, s;
    do {
      u = uniform_signed();
      v = uniform_signed();
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * f;
    has_cached_ = true;
    return u * f;
  }

  double gaussian(double mean, double sigma) {
    if (sigma < 0.0) throw ParameterError("gaussian: sigma < 0");
    return mean + sigma * standard_normal();
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

inline Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double mean,
                              double sigma) {
  if (sigma < 0.0) throw ParameterError("gaussian_matrix: sigma < 0");
  Matrix out(rows, cols);
  for (std::size_t k = 0; k < out.size(); ++k) out.at(k) = mean + sigma * rng.standard_normal();
  return out;
}

}  // namespace xggm
