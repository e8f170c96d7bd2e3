#pragma once

#include <complex>
#include <vector>

#include "bbm/rng.hpp"

namespace bbm {

using cplx = std::complex<double>;

inline constexpr double kEulerGamma = 0.5772156649015329;
inline constexpr double kPi = 3.14159265358979323846;

// Spectrally positive 1-stable law with exponent
//   psi(l) = sigma |l| (1 + i (2/pi) sign(l) log|l|) - i mu l,
// i.e. S_1(sigma, beta = 1, mu) in the Samorodnitsky-Taqqu convention.
struct StableParams {
  double sigma = 1;
  double mu = 0;
};

struct CFGrid {
  std::vector<double> lambdas;
  std::vector<cplx> values;
};

struct LevyPath {
  std::vector<double> times;
  std::vector<double> values;
};

cplx psi(const StableParams& p, double lambda);
cplx cf_levy(const StableParams& p, double t, double lambda);
CFGrid cf_grid(const StableParams& p, double t, const std::vector<double>& lambdas);

struct ScaleIdentity {
  cplx lhs;
  cplx rhs;
  double abs_error;
  StableParams rhs_params;
};

// Psi_{sigma,mu}(lambda x) against Psi_{x sigma, x(mu - sigma (2/pi) log x)}(lambda).
ScaleIdentity scale_identity_check(const StableParams& p, double x, double lambda);

// Chambers-Mallows-Stuck draw of S_1(1, 1, 0), mapped to (sigma, mu) by
// sigma X + (2/pi) sigma log sigma + mu.
double sample_standard_stable(Rng& rng);
double sample_stable(const StableParams& p, Rng& rng);

LevyPath sample_levy_path(const StableParams& p, const std::vector<double>& times, Rng& rng);

struct CdfValue {
  double value;
  double error_bound;
};

// Gil-Pelaez inversion, truncated where |CF| < 1e-12.
CdfValue cdf_by_inversion(const StableParams& p, double x);
// Evaluates on a grid and clamps to a non-decreasing sequence in x order.
std::vector<double> cdf_grid(const StableParams& p, const std::vector<double>& xs);
double quantile_by_inversion(const StableParams& p, double prob);

cplx cf_asymptotic_target(double c, double lambda);
cplx exp_integral_E1(cplx z);

// E[e^{i l Z}] for P(Z > x) = min(1, 1/x), via E1 and via Fourier quadrature.
cplx pareto_cf_exact(double lambda);
cplx pareto_cf_quadrature(double lambda);

struct AsymptoticRow {
  double lambda;
  cplx exact;
  cplx quadrature;
  cplx target;
  double scaled_error;          // |exact - target| / |lambda|
  double scaled_modulus_error;  // ||exact| - e^{-(pi/2)|lambda|}| / |lambda|
};

struct AsymptoticReport {
  std::vector<AsymptoticRow> rows;  // ordered by decreasing |lambda|
  bool strictly_decreasing = false;
  double max_quadrature_gap = 0;
};

AsymptoticReport verify_cf_asymptotic_pareto(std::vector<double> lambdas);

}  // namespace bbm
