#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "tailseq/errors.hpp"

namespace tailseq {

// Deterministic counter-based randomness. Every draw site derives its own
// stream from (seed, purpose, indices...), so adding or removing a consumer
// never shifts the values seen by another one. This is what makes checkpoint
// resume and cross-run reproducibility exact.
enum class Stream : std::uint64_t {
  init = 1,
  synth_lengths,
  synth_items,
  user_shuffle,
  item_shuffle,
  negatives,
  user_r,
  item_k,
  item_subseq,
  dropout,
  eval_negatives,
};

class Rng {
 public:
  explicit Rng(std::uint64_t state) : state_(state) {}

  // splitmix64
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, n) via rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw NumericError("Rng::below called with n = 0");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

  // Inclusive range.
  int range(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), uniform without replacement.
  std::vector<int> sample_indices(int n, int k) {
    if (k < 0 || k > n) throw DataError("sample_indices: k out of range");
    std::vector<int> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
      int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
  }

 private:
  std::uint64_t state_;
};

namespace detail {
inline std::uint64_t absorb(std::uint64_t h, std::uint64_t v) {
  h ^= v * 0x9E3779B97F4A7C15ULL + 0xBF58476D1CE4E5B9ULL + (h << 6) + (h >> 2);
  std::uint64_t z = h;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

inline Rng derive_rng(std::uint64_t seed, Stream purpose, std::uint64_t a = 0,
                      std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = detail::absorb(seed, static_cast<std::uint64_t>(purpose));
  h = detail::absorb(h, a);
  h = detail::absorb(h, b);
  h = detail::absorb(h, c);
  return Rng(h);
}

}  // namespace tailseq
