#include "bbm/stable.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <stdexcept>

#include "bbm/model.hpp"

namespace bbm {

namespace {

constexpr double kTwoOverPi = 2.0 / kPi;
// Truncation point of the inversion integral for the standardized law:
// |CF(l)| = e^{-l} < 1e-12 beyond it.
constexpr double kLambdaMax = 27.631021115928547;
constexpr double kLeftCut = -6.0;
constexpr double kRightAsymptotic = 1.0e4;

void check_params(const StableParams& p) {
  if (!(p.sigma > 0) || !std::isfinite(p.sigma) || !std::isfinite(p.mu))
    throw ConfigError("stable params need finite sigma > 0 and finite mu");
}

// P(S <= y) for S ~ S_1(1, 1, 0).
CdfValue standard_cdf(double y) {
  if (y < kLeftCut) return {0.0, 1e-300};
  if (y > kRightAsymptotic) {
    // One-sided 1/y tail with its log correction; error below 1e-9 here.
    const double tail = kTwoOverPi / y + (4.0 / (kPi * kPi)) * (std::log(y) - 1.0 + kEulerGamma) / (y * y);
    return {1.0 - tail, 1e-9};
  }
  auto f = [y](double l) {
    if (l <= 0) return 0.0;
    return std::exp(-l) * std::sin(l * y + kTwoOverPi * l * std::log(l)) / l;
  };
  const double w = std::min(0.25, kPi / (std::abs(y) + 4.0));
  double total = 0, err = 0;
  {
    boost::math::quadrature::tanh_sinh<double> ts;
    double e = 0;
    total += ts.integrate(f, 0.0, w, 1e-14, &e);
    err += e * std::max(1.0, std::abs(total));
  }
  for (double a = w; a < kLambdaMax; a += w) {
    const double b = std::min(a + w, kLambdaMax);
    double e = 0;
    total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 5, 1e-14, &e);
    err += e;
  }
  err += std::exp(-kLambdaMax) / kLambdaMax;
  const double v = 0.5 + total / kPi;
  return {std::clamp(v, 0.0, 1.0), err / kPi};
}

}  // namespace

cplx psi(const StableParams& p, double lambda) {
  if (lambda == 0) return {0.0, 0.0};
  const double a = std::abs(lambda);
  return {p.sigma * a, p.sigma * kTwoOverPi * lambda * std::log(a) - p.mu * lambda};
}

cplx cf_levy(const StableParams& p, double t, double lambda) {
  if (t < 0) throw ConfigError("cf_levy needs t >= 0");
  if (t == 0 || lambda == 0) return {1.0, 0.0};
  return std::exp(-t * psi(p, lambda));
}

CFGrid cf_grid(const StableParams& p, double t, const std::vector<double>& lambdas) {
  CFGrid g;
  g.lambdas = lambdas;
  for (double l : lambdas) g.values.push_back(cf_levy(p, t, l));
  return g;
}

ScaleIdentity scale_identity_check(const StableParams& p, double x, double lambda) {
  if (!(x > 0)) throw ConfigError("scale identity needs x > 0");
  ScaleIdentity r;
  r.lhs = cf_levy(p, 1.0, lambda * x);
  r.rhs_params = {x * p.sigma, x * (p.mu - p.sigma * kTwoOverPi * std::log(x))};
  r.rhs = cf_levy(r.rhs_params, 1.0, lambda);
  r.abs_error = std::abs(r.lhs - r.rhs);
  return r;
}

double sample_standard_stable(Rng& rng) {
  for (;;) {
    const double u = kPi * (rng.uniform() - 0.5);
    const double w = rng.exponential();
    const double a = 0.5 * kPi + u;
    const double x = kTwoOverPi * (a * std::tan(u) - std::log(0.5 * kPi * w * std::cos(u) / a));
    if (std::isfinite(x)) return x;
  }
}

double sample_stable(const StableParams& p, Rng& rng) {
  return p.sigma * sample_standard_stable(rng) + kTwoOverPi * p.sigma * std::log(p.sigma) + p.mu;
}

LevyPath sample_levy_path(const StableParams& p, const std::vector<double>& times, Rng& rng) {
  check_params(p);
  if (!std::is_sorted(times.begin(), times.end())) throw ConfigError("levy path times must be sorted");
  LevyPath path;
  double prev = 0, value = 0;
  for (double t : times) {
    if (t < 0) throw ConfigError("levy path times must be non-negative");
    const double d = t - prev;
    if (d > 0) value += sample_stable({d * p.sigma, d * p.mu}, rng);
    path.times.push_back(t);
    path.values.push_back(value);
    prev = t;
  }
  return path;
}

CdfValue cdf_by_inversion(const StableParams& p, double x) {
  check_params(p);
  if (!(std::abs(x) < 1e300)) throw ConfigError("cdf argument out of range");
  const double y = (x - p.mu - kTwoOverPi * p.sigma * std::log(p.sigma)) / p.sigma;
  return standard_cdf(y);
}

std::vector<double> cdf_grid(const StableParams& p, const std::vector<double>& xs) {
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> out(xs.size());
  double run = 0;
  for (std::size_t i : order) {
    run = std::max(run, cdf_by_inversion(p, xs[i]).value);
    out[i] = run;
  }
  return out;
}

double quantile_by_inversion(const StableParams& p, double prob) {
  if (!(prob > 0 && prob < 1)) throw ConfigError("quantile needs prob in (0, 1)");
  double lo = kLeftCut, hi = 10.0;
  while (standard_cdf(hi).value < prob) hi *= 2;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * (1 + std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (standard_cdf(mid).value < prob ? lo : hi) = mid;
  }
  return p.sigma * 0.5 * (lo + hi) + kTwoOverPi * p.sigma * std::log(p.sigma) + p.mu;
}

cplx cf_asymptotic_target(double c, double lambda) {
  if (lambda == 0) throw ConfigError("cf_asymptotic_target needs lambda != 0");
  const double a = std::abs(lambda);
  return std::exp(cplx(-0.5 * kPi * a, lambda * (-std::log(a) + c - kEulerGamma)));
}

cplx exp_integral_E1(cplx z) {
  if (z == cplx(0, 0) || (z.imag() == 0 && z.real() < 0)) throw ConfigError("E1 domain: z on the branch cut");
  const double r = std::abs(z);
  const bool use_cf = r > 4.0 && (z.real() > 0 || std::abs(z.imag()) > 1.0);
  if (!use_cf) {
    // -gamma - log z - sum_{k>=1} (-z)^k / (k k!)
    cplx term(1.0, 0.0), sum(0.0, 0.0);
    for (int k = 1; k < 500; ++k) {
      term *= -z / static_cast<double>(k);
      const cplx add = term / static_cast<double>(k);
      sum += add;
      if (std::abs(add) < 1e-17 * std::abs(sum)) break;
    }
    return -kEulerGamma - std::log(z) - sum;
  }
  // Modified Lentz evaluation of e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...))).
  const double tiny = 1e-300;
  cplx b = z + 1.0;
  cplx c = 1.0 / tiny;
  cplx d = 1.0 / b;
  cplx h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const cplx del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-z);
}

cplx pareto_cf_exact(double lambda) {
  if (lambda == 0) return {1.0, 0.0};
  const double a = std::abs(lambda);
  const cplx v = std::exp(cplx(0, a)) + cplx(0, a) * exp_integral_E1(cplx(0, -a));
  return lambda > 0 ? v : std::conj(v);
}

cplx pareto_cf_quadrature(double lambda) {
  if (lambda == 0) return {1.0, 0.0};
  const double a = std::abs(lambda);
  auto f = [](double t) { return 1.0 / ((1.0 + t) * (1.0 + t)); };
  boost::math::quadrature::ooura_fourier_cos<double> fc;
  boost::math::quadrature::ooura_fourier_sin<double> fs;
  const double c = fc.integrate(f, a).first;
  const double s = fs.integrate(f, a).first;
  const cplx v = std::exp(cplx(0, a)) * cplx(c, s);
  return lambda > 0 ? v : std::conj(v);
}

AsymptoticReport verify_cf_asymptotic_pareto(std::vector<double> lambdas) {
  std::sort(lambdas.begin(), lambdas.end(), [](double a, double b) { return std::abs(a) > std::abs(b); });
  AsymptoticReport rep;
  for (double l : lambdas) {
    if (l == 0) throw ConfigError("lambda grid must exclude 0");
    AsymptoticRow row;
    row.lambda = l;
    row.exact = pareto_cf_exact(l);
    row.quadrature = pareto_cf_quadrature(l);
    row.target = cf_asymptotic_target(1.0, l);
    row.scaled_error = std::abs(row.exact - row.target) / std::abs(l);
    row.scaled_modulus_error = std::abs(std::abs(row.exact) - std::exp(-0.5 * kPi * std::abs(l))) / std::abs(l);
    if (!std::isfinite(row.scaled_error)) throw std::runtime_error("pareto CF evaluation failed");
    rep.max_quadrature_gap = std::max(rep.max_quadrature_gap, std::abs(row.exact - row.quadrature));
    rep.rows.push_back(row);
  }
  rep.strictly_decreasing = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    if (!(rep.rows[i].scaled_error < rep.rows[i - 1].scaled_error)) rep.strictly_decreasing = false;
  return rep;
}

}  // namespace bbm
