#include "bbm/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>

#include "bbm/model.hpp"

namespace bbm {

void RunningStat::add(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

void RunningStat::merge(const RunningStat& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double n = static_cast<double>(n_ + o.n_);
  const double d = o.mean_ - mean_;
  mean_ += d * static_cast<double>(o.n_) / n;
  m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
  n_ += o.n_;
}

double RunningStat::variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

double RunningStat::se() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double z_test_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

Interval wilson_interval(std::size_t k, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double den = 1 + z * z / nn;
  const double centre = (p + z * z / (2 * nn)) / den;
  const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / den;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

Interval clopper_pearson(std::size_t k, std::size_t n, double alpha) {
  if (n == 0) return {0.0, 1.0};
  const double kk = static_cast<double>(k), nn = static_cast<double>(n);
  const double lo = k == 0 ? 0.0 : boost::math::ibeta_inv(kk, nn - kk + 1, alpha / 2);
  const double hi = k == n ? 1.0 : boost::math::ibeta_inv(kk + 1, nn - kk, 1 - alpha / 2);
  return {lo, hi};
}

ChiSquare chi_square_gof(const std::vector<std::size_t>& observed, const std::vector<double>& probs,
                         double min_expected) {
  if (observed.size() != probs.size() || observed.empty()) throw ConfigError("chi-square: size mismatch");
  const double n = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::size_t{0}));
  std::vector<double> obs, expct;
  double o_acc = 0, e_acc = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o_acc += static_cast<double>(observed[i]);
    e_acc += probs[i] * n;
    if (e_acc >= min_expected) {
      obs.push_back(o_acc);
      expct.push_back(e_acc);
      o_acc = e_acc = 0;
    }
  }
  if (e_acc > 0 || o_acc > 0) {
    if (obs.empty()) {
      obs.push_back(o_acc);
      expct.push_back(e_acc);
    } else {
      obs.back() += o_acc;
      expct.back() += e_acc;
    }
  }
  double stat = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (expct[i] <= 0) continue;
    stat += (obs[i] - expct[i]) * (obs[i] - expct[i]) / expct[i];
  }
  const int df = static_cast<int>(obs.size()) - 1;
  const double p = df > 0 ? boost::math::gamma_q(0.5 * df, 0.5 * stat) : 1.0;
  return {stat, df, p};
}

double ks_statistic(std::vector<double> s, const std::function<double(double)>& cdf) {
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_p_value(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  if (lam < 0.2) return 1.0;
  double sum = 0;
  for (int j = 1; j < 200; ++j) {
    const double term = 2 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lam * lam);
    sum += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw ConfigError("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

namespace {

long long kendall_s(const std::vector<double>& x, const std::vector<double>& y, const std::vector<int>& perm) {
  long long s = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[j] - x[i], dy = y[perm[j]] - y[perm[i]];
      s += ((dx > 0) - (dx < 0)) * ((dy > 0) - (dy < 0));
    }
  return s;
}

}  // namespace

KendallResult kendall_increasing(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("kendall: need two equal-length samples");
  if (x.size() > 10) throw ConfigError("kendall: exact enumeration limited to n <= 10");
  std::vector<int> perm(x.size());
  std::iota(perm.begin(), perm.end(), 0);
  const long long s_obs = kendall_s(x, y, perm);
  std::size_t ge = 0, total = 0;
  do {
    ++total;
    if (kendall_s(x, y, perm) >= s_obs) ++ge;
  } while (std::next_permutation(perm.begin(), perm.end()));
  long long tx = 0, ty = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      tx += x[i] != x[j];
      ty += y[i] != y[j];
    }
  const double denom = std::sqrt(static_cast<double>(tx) * static_cast<double>(ty));
  return {denom > 0 ? static_cast<double>(s_obs) / denom : 0.0, s_obs,
          static_cast<double>(ge) / static_cast<double>(total)};
}

std::complex<double> ecf(std::span<const double> samples, double lambda) {
  double re = 0, im = 0;
  for (double v : samples) {
    re += std::cos(lambda * v);
    im += std::sin(lambda * v);
  }
  const double n = static_cast<double>(samples.size());
  return {re / n, im / n};
}

}  // namespace bbm
