#pragma once

#include <cassert>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <vector>

namespace unidial {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

// 64-bit FNV-1a. Used for seed derivation and config fingerprints; the
// byte-level definition keeps hashes identical across platforms.
class Fnv1a {
 public:
  Fnv1a& byte(std::uint8_t b) {
    hash_ = (hash_ ^ b) * kFnvPrime;
    return *this;
  }
  Fnv1a& u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) byte(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }
  Fnv1a& str(std::string_view s) {
    u64(s.size());
    for (char c : s) byte(static_cast<std::uint8_t>(c));
    return *this;
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = kFnvOffset;
};

// Deterministic RNG. mt19937_64 output is fully specified by the standard;
// bounded draws are done here by rejection because
// std::uniform_int_distribution is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Unbiased draw in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    assert(n > 0);
    std::uint64_t m = (std::numeric_limits<std::uint64_t>::max() % n) + 1;
    if (m == n) m = 0;  // n divides 2^64
    if (m == 0) return next() % n;
    const std::uint64_t cutoff = std::numeric_limits<std::uint64_t>::max() - m + 1;
    for (;;) {
      const std::uint64_t x = next();
      if (x < cutoff) return x % n;
    }
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Per-record seed: hash of (global seed, dataset, ordinal) plus a free-form
// tag so independent consumers of the same record get independent streams.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view dataset,
                                 std::uint64_t ordinal, std::string_view tag = {}) {
  return Fnv1a{}.u64(global_seed).str(dataset).u64(ordinal).str(tag).value();
}

}  // namespace unidial
