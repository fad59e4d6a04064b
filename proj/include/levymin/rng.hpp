#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "levymin/common.hpp"

namespace levymin {

// Counter-based generator: Philox4x32-10 (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3"). Substreams are keyed by (seed, stream);
// blocks are a pure function of (key, counter), so draws from different
// streams are order-independent and reproducible.
inline constexpr const char* kGeneratorName = "philox4x32-10";

inline std::array<std::uint32_t, 4> philox4x32_block(
    std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  std::uint32_t next_u32() {
    if (have_ == 0) {
      buf_ = philox4x32_block(
          {static_cast<std::uint32_t>(stream_),
           static_cast<std::uint32_t>(stream_ >> 32),
           static_cast<std::uint32_t>(block_),
           static_cast<std::uint32_t>(block_ >> 32)},
          key_);
      ++block_;
      have_ = 4;
    }
    return buf_[4 - have_--];
  }

  // uniform on the open interval (0,1); 53 significant bits
  double uniform01() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  // standard normal via Box-Muller (rejection-free: fixed draw count)
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // exact Poisson count by inversion (product of uniforms); large means are
  // split additively so the running product never underflows
  std::uint64_t poisson(double mean) {
    if (!(mean >= 0.0)) throw DomainError("poisson: mean must be >= 0");
    std::uint64_t total = 0;
    while (mean > 500.0) {
      total += poisson_chunk(500.0);
      mean -= 500.0;
    }
    return total + poisson_chunk(mean);
  }

 private:
  std::uint64_t poisson_chunk(double mean) {
    if (mean == 0.0) return 0;
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = uniform01();
    while (p > limit) {
      ++k;
      p *= uniform01();
    }
    return k;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int have_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace levymin
