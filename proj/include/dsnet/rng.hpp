#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>

namespace dsnet {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t hash_str(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  return splitmix64(s);
}

// xoshiro256++ seeded via splitmix64. Self-contained so that streams are
// identical across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // 32-bit bounded integer, bias negligible for our ranges.
  uint32_t next_below(uint32_t n) { return static_cast<uint32_t>(next_u64() % n); }

  bool bernoulli(double p = 0.5) { return uniform() < p; }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Normal(0, sigma^2) with samples outside +-2 sigma redrawn.
  double truncated_normal(double sigma) {
    for (;;) {
      const double x = normal() * sigma;
      if (std::fabs(x) <= 2.0 * sigma) return x;
    }
  }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<int64_t>(last - first);
    for (int64_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<int64_t>(next_u64() % static_cast<uint64_t>(i + 1));
      std::swap(first[i], first[j]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4]{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Truncated-normal initialization with std sqrt(2 / fan_in), cut at two
// standard deviations.
inline void init_he_normal(std::span<float> w, int64_t fan_in, Rng& rng) {
  if (fan_in < 1) throw std::invalid_argument("init_he_normal: fan_in must be >= 1");
  const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : w) v = static_cast<float>(rng.truncated_normal(sigma));
}

inline void init_he_normal(std::span<float> w, int64_t fan_in, uint64_t seed) {
  Rng rng(seed);
  init_he_normal(w, fan_in, rng);
}

}  // namespace dsnet
