#pragma once

#include <cstddef>
#include <cstdint>

#include "bbm/functional.hpp"
#include "bbm/rng.hpp"

namespace bbm {

// Transition density of the 3-dimensional Bessel process from x >= 0 at time t.
double bessel3_density(double x, double t, double z);
double bessel3_cdf(double x, double t, double z);  // by quadrature of the density
double sample_bessel3(double x, double t, Rng& rng);

// First hitting time density of 0 for standard BM started at x > 0.
double bm_hit_time_density(double x, double s);
double bm_hit_time_probability(double x, double lo, double hi);  // by quadrature

// F(y) = P(|B_1| <= y).
double F_gauss(double y);

struct ImhofReport {
  double lhs = 0;  // E_x[F(B) 1{min > 0}]
  double lhs_se = 0;
  double rhs = 0;  // E_x[(x / R_t) F(R)]
  double rhs_se = 0;
  double combined_se = 0;
  bool pass = false;
  bool variance_blowup = false;
};

// Monte Carlo of both sides on a grid of `steps` points. Positivity of B is
// handled by the exact bridge survival weight between grid points.
ImhofReport imhof_check(double x, double t, const PathFunctional& f, std::size_t n, std::uint64_t seed,
                        std::size_t steps = 64);

}  // namespace bbm
