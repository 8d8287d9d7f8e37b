#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace recurnas {

inline uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ULL) {
  uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string to_hex(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// Engine draws are wrapped so every sample path is ours; std::*_distribution
// output is implementation-defined and would break cross-platform replay.
class Rng {
public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Unbiased integer in [0, n).
  uint64_t below(uint64_t n) {
    if (n == 0) return 0;
    uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n);
    uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return v % n;
  }

  int below_int(int n) { return static_cast<int>(below(static_cast<uint64_t>(n))); }

  // Uniform in [0, 1).
  double real01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * real01(); }

  bool bernoulli(double p) { return real01() < p; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * real01() - 1.0;
      v = 2.0 * real01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double mul = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * mul;
    has_spare_ = true;
    return u * mul;
  }

  // Index sampled from unnormalized non-negative weights.
  size_t weighted(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    double r = real01() * total;
    double acc = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (r < acc) return i;
    }
    return w.empty() ? 0 : w.size() - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), order of first draw.
  std::vector<int> sample_distinct(int n, int k) {
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    std::vector<int> out;
    out.reserve(k);
    for (int i = 0; i < k && !pool.empty(); ++i) {
      size_t j = below(pool.size());
      out.push_back(pool[j]);
      pool[j] = pool.back();
      pool.pop_back();
    }
    return out;
  }

private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream separation for derived seeds (per-architecture, per-trial, ...).
inline uint64_t mix_seed(uint64_t seed, std::string_view tag) {
  return fnv1a64(tag, seed ^ 0x9e3779b97f4a7c15ULL);
}

}  // namespace recurnas
