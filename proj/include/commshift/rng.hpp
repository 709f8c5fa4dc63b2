#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace commshift {

// FNV-1a, also used for container checksums and seed derivation.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(s.data(), s.size(), h);
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Stage seeds are derived, never reused across stages: hash(global seed, tag, extra).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t extra = 0) {
  std::uint64_t h = fnv1a(&base, sizeof(base));
  h = fnv1a(tag, h);
  h = fnv1a(&extra, sizeof(extra), h);
  // one mixing round so consecutive extras don't give correlated streams
  return splitmix64(h);
}

// Deterministic generator with identical output on every platform.
// std::uniform_* distributions are implementation-defined, so draws are hand-rolled.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    next();
    next();
  }

  std::uint64_t next() { return splitmix64(state_); }

  // uniform in [0, n), unbiased via rejection
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % n;
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal, Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // geometric number of trials (>= 1) with success probability p
  std::uint64_t geometric(double p) {
    if (p >= 1.0) return 1;
    if (p <= 0.0) return 1;
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    double v = std::floor(std::log(u) / std::log1p(-p));
    return 1 + static_cast<std::uint64_t>(v);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace commshift
