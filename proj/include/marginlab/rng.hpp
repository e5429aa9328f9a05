#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace marginlab {

// splitmix64 finalizer; the seed/stream mixer used everywhere keys are derived.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Philox4x32-10 counter-based generator (Salmon et al. 2011).  Streams are
// cheap to derive and never overlap, which is what the sweep harness relies
// on: every dataset, initializer and Monte-Carlo shard owns a substream keyed
// by (seed, purpose, index).
class PhiloxRng {
 public:
  using result_type = std::uint64_t;

  PhiloxRng() : PhiloxRng(0, 0) {}

  PhiloxRng(std::uint64_t seed, std::uint64_t stream) {
    const std::uint64_t key64 = mix64(seed ^ mix64(stream ^ 0x1d8af66d25f5ef5full));
    key_ = {static_cast<std::uint32_t>(key64), static_cast<std::uint32_t>(key64 >> 32)};
    counter_ = {0, 0, 0, 0};
    block_pos_ = 2;  // force refill on first draw
    has_cached_normal_ = false;
    cached_normal_ = 0.0;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    if (block_pos_ >= 2) refill();
    const int i = 2 * block_pos_++;
    return static_cast<std::uint64_t>(block_[i]) | (static_cast<std::uint64_t>(block_[i + 1]) << 32);
  }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t r = (*this)();
      if (r >= threshold) return r % bound;
    }
  }

  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Standard normal via the Marsaglia polar method (second value cached).
  double normal() {
    if (has_cached_normal_) {
      has_cached_normal_ = false;
      return cached_normal_;
    }
    for (;;) {
      const double u = 2.0 * uniform01() - 1.0;
      const double v = 2.0 * uniform01() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) {
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        cached_normal_ = v * f;
        has_cached_normal_ = true;
        return u * f;
      }
    }
  }

  // Raw single-block evaluation, exposed so tests can pin the generator to
  // the published Philox4x32-10 test vectors.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = 0xD2511F53ull * ctr[0];
      const std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

 private:
  void refill() {
    block_ = block(counter_, key_);
    // 128-bit counter increment
    if (++counter_[0] == 0 && ++counter_[1] == 0 && ++counter_[2] == 0) ++counter_[3];
    block_pos_ = 0;
  }

  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> block_;
  int block_pos_;
  bool has_cached_normal_;
  double cached_normal_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Substream for a named purpose.  Same (seed, purpose, index) always yields
// the same stream; distinct tuples yield independent streams.
inline PhiloxRng substream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0) {
  const std::uint64_t stream = fnv1a64(purpose) ^ (0x9E3779B97F4A7C15ull * (index + 1));
  return PhiloxRng(seed, stream);
}

}  // namespace marginlab
