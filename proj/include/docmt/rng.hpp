#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace docmt {

/// Deterministic RNG used everywhere seeds matter. A thin wrapper around
/// std::mt19937_64 with explicit, implementation-independent helpers so that
/// splits, batches and dropout masks reproduce bit-for-bit across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  /// Uniform integer in [0, n) without std::uniform_int_distribution
  /// (whose output is implementation-defined).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling on the top bits keeps the draw unbiased.
    std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
      std::uint64_t r = gen_();
      if (r >= threshold) return r % n;
    }
  }

  /// Uniform real in [0, 1).
  double real() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform real in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * real(); }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = real(), u2 = real();
    while (u1 <= 1e-300) u1 = real();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  bool coin() { return (gen_() >> 63) != 0; }

  /// In-place Fisher-Yates shuffle, deterministic given the seed.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Derives an independent stream (for per-parameter init, per-epoch order).
  Rng fork(std::uint64_t salt) {
    return Rng(gen_() ^ (salt * 0x9e3779b97f4a7c15ULL));
  }

 private:
  std::mt19937_64 gen_;
};

/// FNV-1a, used for config hashes in run manifests.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace docmt
