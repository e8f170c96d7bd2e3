#include "bbm/bessel.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "bbm/model.hpp"
#include "bbm/stable.hpp"
#include "bbm/stats.hpp"

namespace bbm {

namespace {

const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * kPi);

}  // namespace

double bessel3_density(double x, double t, double z) {
  if (!(t > 0) || !(x >= 0)) throw ConfigError("bessel3_density needs t > 0 and x >= 0");
  if (!(z > 0)) return 0.0;
  if (x == 0) return kInvSqrt2Pi * std::exp(-z * z / (2 * t)) * 2 * z * z / std::pow(t, 1.5);
  // (1 - e^{-2xz/t}) via expm1 keeps the x -> 0 limit accurate.
  return kInvSqrt2Pi * std::exp(-(z - x) * (z - x) / (2 * t)) * z / (x * std::sqrt(t)) *
         -std::expm1(-2 * x * z / t);
}

double bessel3_cdf(double x, double t, double z) {
  if (!(z > 0)) return 0.0;
  auto f = [&](double u) { return bessel3_density(x, t, u); };
  return std::min(1.0, boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, z, 15, 1e-13));
}

double sample_bessel3(double x, double t, Rng& rng) {
  if (!(t >= 0)) throw ConfigError("sample_bessel3 needs t >= 0");
  if (t == 0) return x;
  const double s = std::sqrt(t);
  const double a = x + s * rng.normal(), b = s * rng.normal(), c = s * rng.normal();
  return std::sqrt(a * a + b * b + c * c);
}

double bm_hit_time_density(double x, double s) {
  if (!(x > 0) || !(s > 0)) throw ConfigError("bm_hit_time_density needs x, s > 0");
  return x * kInvSqrt2Pi * std::pow(s, -1.5) * std::exp(-x * x / (2 * s));
}

double bm_hit_time_probability(double x, double lo, double hi) {
  auto f = [&](double s) { return s > 0 ? bm_hit_time_density(x, s) : 0.0; };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, std::max(lo, 0.0), hi, 15, 1e-13);
}

double F_gauss(double y) {
  if (y < 0) throw ConfigError("F_gauss needs y >= 0");
  return std::erf(y / std::sqrt(2.0));
}

ImhofReport imhof_check(double x, double t, const PathFunctional& f, std::size_t n, std::uint64_t seed,
                        std::size_t steps) {
  if (!(x > 0) || !(t > 0) || n < 2 || steps == 0) throw ConfigError("imhof_check needs x, t > 0, n >= 2");
  const double h = t / static_cast<double>(steps);
  const double sh = std::sqrt(h);
  RunningStat left, right;
  for (std::size_t i = 0; i < n; ++i) {
    {
      Rng rng(seed, 2 * i);
      double b = x, weight = 1.0, grid_min = x;
      for (std::size_t k = 0; k < steps && weight > 0; ++k) {
        const double nb = b + sh * rng.normal();
        weight *= nb <= 0 ? 0.0 : -std::expm1(-2.0 * b * nb / h);
        b = nb;
        grid_min = std::min(grid_min, b);
      }
      PathSummary s{b, weight > 0, false, grid_min};
      left.add(weight > 0 ? weight * f(s) : 0.0);
    }
    {
      Rng rng(seed, 2 * i + 1);
      double p[3] = {x, 0.0, 0.0};
      double r = x, grid_min = x;
      for (std::size_t k = 0; k < steps; ++k) {
        for (double& c : p) c += sh * rng.normal();
        r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        grid_min = std::min(grid_min, r);
      }
      PathSummary s{r, true, false, grid_min};
      right.add(x / r * f(s));
    }
  }
  ImhofReport rep;
  rep.lhs = left.mean();
  rep.lhs_se = left.se();
  rep.rhs = right.mean();
  rep.rhs_se = right.se();
  rep.combined_se = std::hypot(rep.lhs_se, rep.rhs_se);
  rep.pass = std::abs(rep.lhs - rep.rhs) <= 3 * rep.combined_se;
  rep.variance_blowup = rep.lhs_se > 0.5 * std::abs(rep.lhs) || rep.rhs_se > 0.5 * std::abs(rep.rhs);
  return rep;
}

}  // namespace bbm
