#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bbm/engine.hpp"
#include "bbm/model.hpp"
#include "bbm/stable.hpp"
#include "bbm/stats.hpp"

namespace bbm {

// A block of replicate streams (seed, first .. first + count - 1).
struct SeedPool {
  std::string name;
  std::uint64_t seed = 0;
  std::uint64_t first = 0;
  std::uint64_t count = 0;
};

struct SeedPoolOverlap : ConfigError {
  using ConfigError::ConfigError;
};

bool pools_overlap(const SeedPool& a, const SeedPool& b);
void require_disjoint(const SeedPool& a, const SeedPool& b);

// Runs every replicate of the pool; results are ordered by replicate index.
std::vector<ReplicateResult> run_pool(const SimConfig& config, const SeedPool& pool, unsigned threads = 0);

// Finds the record at time t (within 1e-9) or throws.
const MartingaleRecord& record_at(const ReplicateResult& r, double t);

struct ZinfFitRow {
  double t;
  double delta;  // (1 - p) quantile of |Z_T - Z_t|
  double C;      // p delta sqrt(t) / (log t)^2
};

struct ZinfErrorBudget {
  double p = 0.1;
  double C = 0;      // largest fitted constant
  double delta = 0;  // C (log T)^2 / (p sqrt(T))
  std::vector<ZinfFitRow> fit;
};

// Proxies Z_T for Z_inf. Deliberately has no mean(): the limit has infinite mean.
class ZinfSamples {
 public:
  ZinfSamples() = default;
  ZinfSamples(std::vector<double> values, double horizon, SeedPool pool, double frozen_fraction, double frozen_budget,
              ZinfErrorBudget budget);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double horizon() const { return horizon_; }
  const SeedPool& pool() const { return pool_; }
  // mean frozen Z over median |Z_T|
  double frozen_fraction() const { return frozen_fraction_; }
  bool budget_exceeded() const { return frozen_fraction_ > frozen_budget_; }
  double positive_fraction() const;
  double median() const;
  double quantile(double p) const;
  const ZinfErrorBudget& error_budget() const { return budget_; }

 private:
  std::vector<double> values_;
  double horizon_ = 0;
  SeedPool pool_;
  double frozen_fraction_ = 0;
  double frozen_budget_ = 1e-3;
  ZinfErrorBudget budget_;
};

// Fit grid for the error budget: T/8, T/4, T/2 restricted to t >= 2.
std::vector<double> zinf_fit_times(double T);
ZinfSamples zinf_from_runs(const std::vector<ReplicateResult>& runs, double T, const SeedPool& pool,
                           double frozen_budget = 1e-3, double p = 0.1);
// Adds T and the fit grid to the observation times, then runs the pool.
ZinfSamples estimate_Zinf(SimConfig config, double T, const SeedPool& pool, unsigned threads = 0,
                          double frozen_budget = 1e-3);

struct Window {
  double lo;
  double hi;
};

struct TailRow {
  double x;
  std::size_t exceed;
  double value;  // x * P(Z > x)
  Interval ci;   // Wilson, scaled by x
};

struct TailTable {
  Window window;
  std::size_t n = 0;
  std::vector<TailRow> rows;
  double band_lo = 0.8;
  double band_hi = 1.2;
  bool pass = false;  // every point estimate inside the band
};

TailTable tail_check(std::span<const double> samples, Window window, std::size_t points = 12, double band_lo = 0.8,
                     double band_hi = 1.2);

struct MuZRow {
  double x;
  double c;            // E[min(Z, x)] - log x
  double c_truncated;  // E[Z 1{Z <= x}] - log x
};

struct MuZEstimate {
  Window window;
  double c_hat = 0;
  double c_se = 0;
  double mu_hat = 0;  // c_hat - Euler gamma
  double slope = 0;   // least-squares slope of c(x) against log x
  bool plateau = false;
  double c_truncated = 0;  // same plateau for the truncated mean
  std::vector<MuZRow> rows;
};

MuZEstimate estimate_mu_Z(std::span<const double> samples, Window window, std::size_t points = 16,
                          double slope_threshold = 0.1);

struct FluctuationSample {
  std::uint64_t replicate = 0;
  double t = 0;
  double a = 0;
  double Z_at = 0;
  double W_at = 0;
  double zinf = 0;
  double theorem = 0;  // sqrt(t) (Zinf - Z_at + log t / sqrt(2 pi a t) Zinf)
  double bis = 0;      // sqrt(t) (Zinf - Z_at + (log t / 2) W_at)
};

FluctuationSample fluctuation_point(double t, double a, double Z_at, double W_at, double zinf,
                                    std::uint64_t replicate = 0);
// theorem - bis computed from the closed form of the difference.
double coupling_gap(const FluctuationSample& s);

// Rows ordered by replicate, then t, then a. The proxy is each run's own Z_T.
std::vector<FluctuationSample> fluctuation_statistics(const std::vector<ReplicateResult>& runs,
                                                      const std::vector<double>& ts, const std::vector<double>& as,
                                                      double T);
std::vector<double> select_statistic(const std::vector<FluctuationSample>& s, double t, double a, bool theorem = true);

// Target law parameters (sqrt(pi/2), mu_Z sqrt(2/pi)).
StableParams limit_params(double mu_Z);
CFGrid mixed_stable_target_cf(std::span<const double> zinf, double a, const std::vector<double>& lambdas,
                              double mu_Z);
// E[exp(i l1 S_{Z/sqrt(a1)} + i l2 S_{Z/sqrt(a2)})] for a1 <= a2.
cplx mixed_stable_target_pair(std::span<const double> zinf, double a1, double a2, double l1, double l2, double mu_Z);

struct EcfRow {
  double lambda1;
  double lambda2;  // 0 for one-dimensional comparisons
  cplx ecf;
  cplx target;
  double distance;
  Interval ci;  // bootstrap interval for |ECF - target|
};

struct EcfComparison {
  std::size_t n = 0;
  std::vector<EcfRow> rows;
  double sup_distance = 0;
  Interval sup_ci{0, 0};
  double noise_floor = 0;  // median bootstrap sup |ECF* - ECF|
};

EcfComparison ecf_compare(std::span<const double> samples, const CFGrid& target, std::size_t bootstrap = 200,
                          std::uint64_t seed = 0x5eed, double level = 0.95);
EcfComparison ecf_compare_joint(std::span<const double> x1, std::span<const double> x2,
                                const std::vector<std::pair<double, double>>& lambdas,
                                const std::vector<cplx>& target, std::size_t bootstrap = 200,
                                std::uint64_t seed = 0x5eed, double level = 0.95);

struct ProbabilityRow {
  double t;
  double delta;
  std::size_t exceed;
  std::size_t n;
  double p_hat;
  Interval ci;
};

struct WtReport {
  double theta = 0;
  std::vector<ProbabilityRow> rows;  // delta = t^{-theta}
  bool non_increasing = false;
};

// P(|sqrt(t) W_t - sqrt(2/pi) Zinf| >= t^{-theta}), Zinf = Z_T.
WtReport wt_convergence_check(const std::vector<ReplicateResult>& runs, const std::vector<double>& ts, double theta,
                              double T);

struct SpeedRow {
  ProbabilityRow cell;
  double C_hat;  // p_hat delta sqrt(t) / (log t)^2
};

struct SpeedReport {
  std::vector<SpeedRow> rows;
  double C_max = 0;
  KendallResult kendall{};
  bool pass = false;  // no increasing trend in t at level 0.05
};

SpeedReport speed_bound_check(const std::vector<ReplicateResult>& runs, const std::vector<double>& ts,
                              const std::vector<double>& deltas, double T);

struct NGoodConfig {
  OffspringLaw offspring = OffspringLaw::binary();
  std::optional<double> beta;  // pinned beta; default beta_t = log(t) / 2
  double eps = 1e-4;
  double dt = 0.5;
  double extra_time = 20;  // simulated time after the barrier starts
  std::size_t max_particles = 10'000'000;
};

double ngood_beta(const NGoodConfig& c, double t);
double ngood_gamma(const NGoodConfig& c, double t);  // beta_t + log(t) / 2

struct NGoodSample {
  std::uint64_t replicate = 0;
  double t = 0;
  double a = 0;
  double beta = 0;
  std::size_t good = 0;
  std::size_t bad = 0;
  double residual_good = 0;    // expected further good hits of frozen and surviving particles
  double residual_bad = 0;
  double residual_early = 0;   // part of the residual frozen before the barrier started
  double lhs = 0;              // e^{-beta} (good + residual_good)
  double rhs = 0;              // sqrt(t) W_{at}
};

NGoodSample ngood_replicate(const NGoodConfig& c, double t, double a, std::uint64_t seed, std::uint64_t replicate);

struct NGoodRow {
  double t;
  double a;
  std::size_t n;
  double median_ratio;  // median of lhs / rhs
  Interval ratio_ci;
  double median_gap;    // median of beta |lhs - rhs|
  double bad_fraction;  // pooled bad hits over all hits
  double residual_fraction;
};

struct NGoodReport {
  std::vector<NGoodRow> rows;
  bool ratio_trend = false;  // median |ratio - 1| non-increasing in t for every a
  bool bad_trend = false;    // bad fraction non-increasing in t for every a
};

NGoodReport n_good_scaling_check(const std::vector<NGoodSample>& samples);
std::vector<NGoodSample> run_ngood(const NGoodConfig& c, const std::vector<double>& ts, const std::vector<double>& as,
                                   const SeedPool& pool, unsigned threads = 0);

// Distribution-free interval for the median from order statistics.
Interval median_ci(std::vector<double> v, double level = 0.95);

}  // namespace bbm
