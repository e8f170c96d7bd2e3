#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace bbm {

// Welford accumulator; merge() makes aggregation order-independent up to
// rounding, and callers merge in replicate order for bit-identical output.
class RunningStat {
 public:
  void add(double x);
  void merge(const RunningStat& o);
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const;
  double se() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0;
  double m2_ = 0;
};

struct Interval {
  double lo;
  double hi;
};

double normal_cdf(double z);
double normal_quantile(double p);
// Two-sided p-value of a z statistic.
double z_test_p(double z);

Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054);
Interval clopper_pearson(std::size_t successes, std::size_t n, double alpha = 0.05);

struct ChiSquare {
  double statistic;
  int df;
  double p_value;
};

// Categories with expected count below min_expected are pooled into their neighbour.
ChiSquare chi_square_gof(const std::vector<std::size_t>& observed, const std::vector<double>& probs,
                         double min_expected = 5.0);

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
// Asymptotic Kolmogorov p-value for statistic d with n samples.
double ks_p_value(double d, std::size_t n);

double quantile(std::vector<double> v, double p);
double median(std::vector<double> v);

struct KendallResult {
  double tau;
  long long s;          // sum of sign(dx) sign(dy)
  double p_increasing;  // exact permutation P(S >= s_obs)
};

// Exact permutation test of an increasing association; feasible up to n = 10.
KendallResult kendall_increasing(const std::vector<double>& x, const std::vector<double>& y);

std::complex<double> ecf(std::span<const double> samples, double lambda);

}  // namespace bbm
