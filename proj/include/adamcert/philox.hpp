#pragma once

#include <array>
#include <cstdint>

namespace adamcert {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// The algorithm is pinned here so that implementations in other languages can
/// reproduce every sampled integer bit-exactly:
///
///   state: counter c = (c0, c1, c2, c3) of uint32, key k = (k0, k1) of uint32.
///   one round:
///     lo0, hi0 = low/high 32 bits of 0xD2511F53 * c0
///     lo1, hi1 = low/high 32 bits of 0xCD9E8D57 * c2
///     c <- (hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0)
///   after each of the first 9 rounds the key is bumped:
///     k0 += 0x9E3779B9, k1 += 0xBB67AE85
///   the output block is the counter after 10 rounds.
///
/// Known-answer vectors (checked in tests/test_philox.cpp):
///   counter = (0,0,0,0), key = (0,0)
///     -> (0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8)
///   counter = (0xffffffff x4), key = (0xffffffff x2)
///     -> (0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd)
///   counter = (0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344),
///   key     = (0xa4093822, 0x299f31d0)
///     -> (0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1)
///
/// Floating-point conversion rule: two lanes form a uint64 (hi << 32 | lo) and
/// u = (x >> 11) * 2^-53, giving a uniform double in [0, 1).
struct philox4x32 {
  static constexpr std::uint32_t kMulA = 0xD2511F53u;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> c,
                                            std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * c[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * c[2];
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
      if (round < 9) {
        k[0] += kWeylA;
        k[1] += kWeylB;
      }
    }
    return c;
  }
};

inline std::uint64_t philox_u64(std::uint32_t hi, std::uint32_t lo) {
  return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

/// Uniform double in [0, 1) from the top 53 bits of a uint64.
inline double uniform53(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Uniform double addressed by (seed, w3, w2, w1, j): counter words are
/// (c0, c1, c2, c3) = (j >> 1, w1, w2, w3), key = seed split into 32-bit
/// halves (low word first), and lane pair j & 1 of the block is consumed.
/// Draws with distinct (seed, w3, w2, w1, j) are independent.
inline double philox_u53(std::uint64_t seed, std::uint32_t w3, std::uint32_t w2,
                         std::uint32_t w1, std::uint32_t j) {
  const std::array<std::uint32_t, 2> key = {
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const auto out = philox4x32::block({j >> 1, w1, w2, w3}, key);
  const int lane = static_cast<int>(j & 1u) * 2;
  return uniform53(philox_u64(out[lane], out[lane + 1]));
}

}  // namespace adamcert
