#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace bbm {

// Philox4x32-10 counter-based generator.
// Key = master seed, counter = (block, stream index). Two streams with
// different indices never share a counter, so no splitting scheme is needed.
class Philox4x32 {
 public:
  using ctr_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  static ctr_type apply(ctr_type c, key_type k) noexcept {
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k[0] += w0;
        k[1] += w1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * c[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * c[2];
      c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }
    return c;
  }
};

// Ziggurat tables for the normal sampler (128 layers, 56-bit magnitudes).
extern const std::array<std::uint64_t, 128> zig_k;
extern const std::array<double, 128> zig_w;
extern const std::array<double, 128> zig_f;

class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t master_seed, std::uint64_t stream_index) noexcept;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (pos_ == 2) refill();
    return buf_[pos_++];
  }

  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }
  double normal() noexcept {
    const std::uint64_t u = (*this)();
    const int layer = static_cast<int>(u & 127u);
    const std::uint64_t mag = u >> 8;
    if (mag < zig_k[layer]) {
      const double x = static_cast<double>(mag) * zig_w[layer];
      return (u & 128u) ? -x : x;
    }
    return normal_tail(u, layer);
  }
  double exponential() noexcept { return -std::log(uniform()); }

  std::uint64_t master_seed() const noexcept { return seed_; }
  std::uint64_t stream_index() const noexcept { return stream_; }

 private:
  void refill() noexcept {
    const Philox4x32::ctr_type ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                   static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    const Philox4x32::key_type key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    const auto out = Philox4x32::apply(ctr, key);
    buf_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    buf_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    ++block_;
    pos_ = 0;
  }
  double normal_tail(std::uint64_t u, int layer) noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int pos_ = 2;
};

inline Rng stream(std::uint64_t master_seed, std::uint64_t replicate_index) {
  return Rng(master_seed, replicate_index);
}

}  // namespace bbm
