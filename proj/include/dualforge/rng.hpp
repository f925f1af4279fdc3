#ifndef DUALFORGE_RNG_HPP
#define DUALFORGE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace dualforge {

// Deterministic, portable random streams.
//
// Stream seeds are derived by folding 64-bit keys through the splitmix64
// finalizer (Steele et al. 2014); draws come from xoshiro256** (Blackman &
// Vigna 2018). Both algorithms are fully specified below, so identical
// (seed, keys) produce identical draws on every platform and build.

constexpr std::uint64_t kGolden64 = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += kGolden64;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) {
      word = splitmix64(sm);
      sm = word;
    }
    // xoshiro must not start from the all-zero state.
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = kGolden64;
  }

  // Derives an independent stream from a key chain, e.g. {base_seed,
  // worker_id, round}. Keys are folded left to right.
  static Rng stream(std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = 0;
    for (std::uint64_t k : keys) h = splitmix64(h ^ (k + kGolden64));
    return Rng(h);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, bound). Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
      while (lo < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal via Box-Muller; two uniforms per draw, no cached state.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  // Partial Fisher-Yates: after the call the first `take` slots hold a
  // uniform without-replacement sample of v, already in random visit order.
  template <typename T>
  void partial_shuffle(std::vector<T>& v, std::size_t take) {
    const std::size_t n = v.size();
    if (take > n) take = n;
    for (std::size_t i = 0; i + 1 < n && i < take; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(v[i], v[j]);
    }
  }

 private:
  static constexpr double kTwoPi = 6.28318530717958647692;
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t state_[4];
};

// Key-chain tags for the fixed top-level streams.
constexpr std::uint64_t kStreamPartition = 0x7061727469ULL;
constexpr std::uint64_t kStreamSynthetic = 0x73796e7468ULL;

}  // namespace dualforge

#endif  // DUALFORGE_RNG_HPP
