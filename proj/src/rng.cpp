#include "bbm/rng.hpp"

namespace bbm {

namespace {

constexpr double kZigR = 3.442619855899;
constexpr double kZigScale = 72057594037927936.0;  // 2^56
constexpr double kZigArea = 9.91256303526217e-3;

struct ZigTables {
  std::array<std::uint64_t, 128> k{};
  std::array<double, 128> w{};
  std::array<double, 128> f{};

  ZigTables() {
    double dn = kZigR, tn = dn;
    const double q = kZigArea / std::exp(-0.5 * dn * dn);
    k[0] = static_cast<std::uint64_t>((dn / q) * kZigScale);
    k[1] = 0;
    w[0] = q / kZigScale;
    w[127] = dn / kZigScale;
    f[0] = 1.0;
    f[127] = std::exp(-0.5 * dn * dn);
    for (int i = 126; i >= 1; --i) {
      dn = std::sqrt(-2.0 * std::log(kZigArea / dn + std::exp(-0.5 * dn * dn)));
      k[i + 1] = static_cast<std::uint64_t>((dn / tn) * kZigScale);
      tn = dn;
      f[i] = std::exp(-0.5 * dn * dn);
      w[i] = dn / kZigScale;
    }
  }
};

const ZigTables kTables;

}  // namespace

const std::array<std::uint64_t, 128> zig_k = kTables.k;
const std::array<double, 128> zig_w = kTables.w;
const std::array<double, 128> zig_f = kTables.f;

Rng::Rng(std::uint64_t master_seed, std::uint64_t stream_index) noexcept
    : seed_(master_seed), stream_(stream_index) {}

double Rng::normal_tail(std::uint64_t u, int layer) noexcept {
  for (;;) {
    const bool neg = (u & 128u) != 0;
    const double x = static_cast<double>(u >> 8) * zig_w[layer];
    if (layer == 0) {
      double a, b;
      do {
        a = -std::log(uniform()) / kZigR;
        b = -std::log(uniform());
      } while (b + b < a * a);
      return neg ? -(kZigR + a) : kZigR + a;
    }
    if (zig_f[layer] + uniform() * (zig_f[layer - 1] - zig_f[layer]) < std::exp(-0.5 * x * x)) return neg ? -x : x;
    u = (*this)();
    layer = static_cast<int>(u & 127u);
    const std::uint64_t mag = u >> 8;
    if (mag < zig_k[layer]) {
      const double y = static_cast<double>(mag) * zig_w[layer];
      return (u & 128u) ? -y : y;
    }
  }
}

}  // namespace bbm
