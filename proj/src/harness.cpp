#include "bbm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bbm/parallel.hpp"

namespace bbm {

namespace {

constexpr double kTimeMatch = 1e-9;

std::vector<double> log_grid(Window w, std::size_t points) {
  std::vector<double> xs(points);
  if (points == 1) {
    xs[0] = w.lo;
    return xs;
  }
  const double l0 = std::log(w.lo), l1 = std::log(w.hi);
  for (std::size_t k = 0; k < points; ++k) xs[k] = std::exp(l0 + (l1 - l0) * static_cast<double>(k) / static_cast<double>(points - 1));
  xs.back() = w.hi;
  return xs;
}

void check_window(Window w) {
  if (!(w.lo > 0) || !(w.lo < w.hi) || !std::isfinite(w.hi)) throw ConfigError("window needs 0 < lo < hi");
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

}  // namespace

bool pools_overlap(const SeedPool& a, const SeedPool& b) {
  if (a.seed != b.seed || a.count == 0 || b.count == 0) return false;
  return a.first < b.first + b.count && b.first < a.first + a.count;
}

void require_disjoint(const SeedPool& a, const SeedPool& b) {
  if (pools_overlap(a, b))
    throw SeedPoolOverlap("seed pools '" + a.name + "' and '" + b.name + "' share replicate streams");
}

std::vector<ReplicateResult> run_pool(const SimConfig& config, const SeedPool& pool, unsigned threads) {
  config.validate();
  return parallel_map(pool.count, threads,
                      [&](std::size_t i) { return simulate(config, pool.seed, pool.first + i); });
}

const MartingaleRecord& record_at(const ReplicateResult& r, double t) {
  for (const auto& rec : r.records)
    if (std::abs(rec.time - t) <= kTimeMatch) return rec;
  throw ConfigError("missing observation time " + std::to_string(t) + " in replicate " + std::to_string(r.replicate));
}

ZinfSamples::ZinfSamples(std::vector<double> values, double horizon, SeedPool pool, double frozen_fraction,
                         double frozen_budget, ZinfErrorBudget budget)
    : values_(std::move(values)),
      horizon_(horizon),
      pool_(std::move(pool)),
      frozen_fraction_(frozen_fraction),
      frozen_budget_(frozen_budget),
      budget_(std::move(budget)) {}

double ZinfSamples::positive_fraction() const {
  if (values_.empty()) return 0.0;
  const auto pos = std::count_if(values_.begin(), values_.end(), [](double v) { return v > 0; });
  return static_cast<double>(pos) / static_cast<double>(values_.size());
}

double ZinfSamples::median() const { return bbm::median(values_); }

double ZinfSamples::quantile(double p) const { return bbm::quantile(values_, p); }

std::vector<double> zinf_fit_times(double T) {
  std::vector<double> ts;
  for (double f : {0.125, 0.25, 0.5})
    if (T * f >= 2) ts.push_back(T * f);
  return ts;
}

ZinfSamples zinf_from_runs(const std::vector<ReplicateResult>& runs, double T, const SeedPool& pool,
                           double frozen_budget, double p) {
  if (runs.empty()) throw ConfigError("no replicates");
  std::vector<double> z(runs.size()), az(runs.size());
  double frozen = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& rec = record_at(runs[i], T);
    z[i] = rec.Z;
    az[i] = std::abs(rec.Z);
    frozen += std::abs(rec.frozen_Z);
  }
  const double med = bbm::median(az);
  const double fraction = med > 0 ? frozen / static_cast<double>(runs.size()) / med : 0.0;

  ZinfErrorBudget budget;
  budget.p = p;
  for (double t : zinf_fit_times(T)) {
    std::vector<double> d(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) d[i] = std::abs(z[i] - record_at(runs[i], t).Z);
    const double delta = bbm::quantile(d, 1 - p);
    const double lt = std::log(t);
    budget.fit.push_back({t, delta, p * delta * std::sqrt(t) / (lt * lt)});
    budget.C = std::max(budget.C, budget.fit.back().C);
  }
  const double lT = std::log(T);
  budget.delta = budget.C * lT * lT / (p * std::sqrt(T));
  return ZinfSamples(std::move(z), T, pool, fraction, frozen_budget, std::move(budget));
}

ZinfSamples estimate_Zinf(SimConfig config, double T, const SeedPool& pool, unsigned threads, double frozen_budget) {
  if (!(T >= 2)) throw ConfigError("Z_inf proxy needs T >= 2");
  config.horizon = T;
  auto& obs = config.observation_times;
  for (double t : zinf_fit_times(T)) obs.push_back(t);
  obs.push_back(T);
  std::sort(obs.begin(), obs.end());
  obs.erase(std::unique(obs.begin(), obs.end(), [](double a, double b) { return std::abs(a - b) <= kTimeMatch; }),
            obs.end());
  obs.erase(std::remove_if(obs.begin(), obs.end(), [&](double t) { return t > T; }), obs.end());
  return zinf_from_runs(run_pool(config, pool, threads), T, pool, frozen_budget);
}

TailTable tail_check(std::span<const double> samples, Window window, std::size_t points, double band_lo,
                     double band_hi) {
  if (samples.size() < 10'000) throw ConfigError("tail check needs at least 1e4 samples");
  check_window(window);
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  if (window.hi > s.back()) throw ConfigError("tail window outside sample support");
  TailTable tab;
  tab.window = window;
  tab.n = s.size();
  tab.band_lo = band_lo;
  tab.band_hi = band_hi;
  tab.pass = true;
  for (double x : log_grid(window, std::max<std::size_t>(points, 2))) {
    const auto exceed = static_cast<std::size_t>(s.end() - std::upper_bound(s.begin(), s.end(), x));
    const Interval w = wilson_interval(exceed, s.size());
    const double value = x * static_cast<double>(exceed) / static_cast<double>(s.size());
    tab.rows.push_back({x, exceed, value, {x * w.lo, x * w.hi}});
    tab.pass = tab.pass && value >= band_lo && value <= band_hi;
  }
  return tab;
}

MuZEstimate estimate_mu_Z(std::span<const double> samples, Window window, std::size_t points,
                          double slope_threshold) {
  if (samples.size() < 100'000) throw ConfigError("mu_Z estimate needs at least 1e5 samples");
  check_window(window);
  const auto xs = log_grid(window, std::max<std::size_t>(points, 2));
  const double n = static_cast<double>(samples.size());
  const double k = static_cast<double>(xs.size());
  MuZEstimate est;
  est.window = window;

  // Per-sample plateau average of min(Z, x) gives the estimate and its SE in one pass.
  RunningStat g;
  std::vector<double> sum_min(xs.size(), 0.0), sum_trunc(xs.size(), 0.0);
  for (double z : samples) {
    double acc = 0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const double m = std::min(z, xs[j]);
      acc += m;
      sum_min[j] += m;
      if (z <= xs[j]) sum_trunc[j] += z;
    }
    g.add(acc / k);
  }
  double mean_log = 0, c_tr = 0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double lx = std::log(xs[j]);
    est.rows.push_back({xs[j], sum_min[j] / n - lx, sum_trunc[j] / n - lx});
    mean_log += lx / k;
    c_tr += est.rows.back().c_truncated / k;
  }
  est.c_hat = g.mean() - mean_log;
  est.c_se = g.se();
  est.mu_hat = est.c_hat - kEulerGamma;
  est.c_truncated = c_tr;

  double sxy = 0, sxx = 0, cbar = 0;
  for (const auto& r : est.rows) cbar += r.c / k;
  for (const auto& r : est.rows) {
    const double dx = std::log(r.x) - mean_log;
    sxy += dx * (r.c - cbar);
    sxx += dx * dx;
  }
  est.slope = sxx > 0 ? sxy / sxx : 0.0;
  est.plateau = std::abs(est.slope) <= slope_threshold;
  return est;
}

FluctuationSample fluctuation_point(double t, double a, double Z_at, double W_at, double zinf,
                                    std::uint64_t replicate) {
  FluctuationSample s;
  s.replicate = replicate;
  s.t = t;
  s.a = a;
  s.Z_at = Z_at;
  s.W_at = W_at;
  s.zinf = zinf;
  const double st = std::sqrt(t), lt = std::log(t);
  s.theorem = st * (zinf - Z_at + lt / std::sqrt(2 * kPi * a * t) * zinf);
  s.bis = st * (zinf - Z_at + 0.5 * lt * W_at);
  return s;
}

double coupling_gap(const FluctuationSample& s) {
  return std::sqrt(s.t) * std::log(s.t) * (s.zinf / std::sqrt(2 * kPi * s.a * s.t) - 0.5 * s.W_at);
}

std::vector<FluctuationSample> fluctuation_statistics(const std::vector<ReplicateResult>& runs,
                                                      const std::vector<double>& ts, const std::vector<double>& as,
                                                      double T) {
  for (double a : as)
    if (!(a >= 1)) throw ConfigError("fluctuation statistics need a >= 1");
  for (double t : ts)
    for (double a : as)
      if (!(t > 0) || a * t > T + kTimeMatch) throw ConfigError("fluctuation statistics need 0 < a t <= T");
  std::vector<FluctuationSample> out;
  out.reserve(runs.size() * ts.size() * as.size());
  for (const auto& r : runs) {
    const double zinf = record_at(r, T).Z;
    for (double t : ts)
      for (double a : as) {
        const auto& rec = record_at(r, a * t);
        out.push_back(fluctuation_point(t, a, rec.Z, rec.W, zinf, r.replicate));
      }
  }
  return out;
}

std::vector<double> select_statistic(const std::vector<FluctuationSample>& s, double t, double a, bool theorem) {
  std::vector<double> v;
  for (const auto& x : s)
    if (std::abs(x.t - t) <= kTimeMatch && std::abs(x.a - a) <= kTimeMatch) v.push_back(theorem ? x.theorem : x.bis);
  return v;
}

StableParams limit_params(double mu_Z) { return {std::sqrt(kPi / 2), mu_Z * std::sqrt(2 / kPi)}; }

CFGrid mixed_stable_target_cf(std::span<const double> zinf, double a, const std::vector<double>& lambdas,
                              double mu_Z) {
  if (zinf.empty() || !(a > 0)) throw ConfigError("mixed target needs samples and a > 0");
  const StableParams p = limit_params(mu_Z);
  CFGrid g;
  g.lambdas = lambdas;
  const double sa = std::sqrt(a);
  for (double l : lambdas) {
    const cplx ps = psi(p, l);
    cplx acc = 0;
    // A Levy time cannot be negative; slightly negative proxies are clamped.
    for (double z : zinf) acc += std::exp(-(std::max(z, 0.0) / sa) * ps);
    g.values.push_back(acc / static_cast<double>(zinf.size()));
  }
  return g;
}

cplx mixed_stable_target_pair(std::span<const double> zinf, double a1, double a2, double l1, double l2,
                              double mu_Z) {
  if (zinf.empty() || !(a1 > 0) || !(a1 <= a2)) throw ConfigError("pair target needs 0 < a1 <= a2");
  const StableParams p = limit_params(mu_Z);
  const cplx p12 = psi(p, l1 + l2), p1 = psi(p, l1);
  const double r2 = 1 / std::sqrt(a2), r12 = 1 / std::sqrt(a1) - 1 / std::sqrt(a2);
  cplx acc = 0;
  for (double z : zinf) {
    const double zz = std::max(z, 0.0);
    acc += std::exp(-zz * r2 * p12 - zz * r12 * p1);
  }
  return acc / static_cast<double>(zinf.size());
}

namespace {

EcfComparison ecf_core(std::span<const double> x1, std::span<const double> x2,
                       const std::vector<std::pair<double, double>>& lambdas, const std::vector<cplx>& target,
                       std::size_t bootstrap, std::uint64_t seed, double level) {
  const std::size_t n = x1.size();
  if (n < 10'000) throw ConfigError("ECF comparison needs at least 1e4 samples");
  if (lambdas.size() != target.size() || lambdas.empty()) throw ConfigError("ECF grid and target differ in size");
  const std::size_t L = lambdas.size();
  std::vector<double> c(L * n), s(L * n);
  EcfComparison out;
  out.n = n;
  for (std::size_t k = 0; k < L; ++k) {
    double re = 0, im = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ph = lambdas[k].first * x1[i] + (x2.empty() ? 0.0 : lambdas[k].second * x2[i]);
      c[k * n + i] = std::cos(ph);
      s[k * n + i] = std::sin(ph);
      re += c[k * n + i];
      im += s[k * n + i];
    }
    const cplx e(re / static_cast<double>(n), im / static_cast<double>(n));
    out.rows.push_back({lambdas[k].first, lambdas[k].second, e, target[k], std::abs(e - target[k]), {0, 0}});
    out.sup_distance = std::max(out.sup_distance, out.rows.back().distance);
  }
  if (bootstrap == 0) {
    out.sup_ci = {out.sup_distance, out.sup_distance};
    return out;
  }
  std::vector<double> sups(bootstrap), floors(bootstrap);
  std::vector<std::vector<double>> per(L, std::vector<double>(bootstrap));
  std::vector<std::size_t> idx(n);
  for (std::size_t b = 0; b < bootstrap; ++b) {
    Rng rng(seed, b);
    for (auto& i : idx) i = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
    double sup = 0, fl = 0;
    for (std::size_t k = 0; k < L; ++k) {
      double re = 0, im = 0;
      for (std::size_t i : idx) {
        re += c[k * n + i];
        im += s[k * n + i];
      }
      const cplx e(re / static_cast<double>(n), im / static_cast<double>(n));
      per[k][b] = std::abs(e - target[k]);
      sup = std::max(sup, per[k][b]);
      fl = std::max(fl, std::abs(e - out.rows[k].ecf));
    }
    sups[b] = sup;
    floors[b] = fl;
  }
  const double lo = (1 - level) / 2, hi = (1 + level) / 2;
  for (std::size_t k = 0; k < L; ++k) out.rows[k].ci = {quantile(per[k], lo), quantile(per[k], hi)};
  out.sup_ci = {quantile(sups, lo), quantile(sups, hi)};
  out.noise_floor = median(floors);
  return out;
}

}  // namespace

EcfComparison ecf_compare(std::span<const double> samples, const CFGrid& target, std::size_t bootstrap,
                          std::uint64_t seed, double level) {
  std::vector<std::pair<double, double>> ls;
  for (double l : target.lambdas) ls.emplace_back(l, 0.0);
  return ecf_core(samples, {}, ls, target.values, bootstrap, seed, level);
}

EcfComparison ecf_compare_joint(std::span<const double> x1, std::span<const double> x2,
                                const std::vector<std::pair<double, double>>& lambdas,
                                const std::vector<cplx>& target, std::size_t bootstrap, std::uint64_t seed,
                                double level) {
  if (x1.size() != x2.size()) throw ConfigError("joint ECF needs paired samples");
  return ecf_core(x1, x2, lambdas, target, bootstrap, seed, level);
}

WtReport wt_convergence_check(const std::vector<ReplicateResult>& runs, const std::vector<double>& ts, double theta,
                              double T) {
  if (!(theta > 0 && theta < 0.2)) throw ConfigError("theta must lie in (0, 1/5)");
  if (runs.empty()) throw ConfigError("no replicates");
  std::vector<double> sorted = ts;
  std::sort(sorted.begin(), sorted.end());
  WtReport rep;
  rep.theta = theta;
  std::vector<double> ps;
  const double c = std::sqrt(2 / kPi);
  for (double t : sorted) {
    if (!(t > 0) || t > T + kTimeMatch) throw ConfigError("wt check needs 0 < t <= T");
    const double delta = std::pow(t, -theta);
    std::size_t k = 0;
    for (const auto& r : runs)
      if (std::abs(std::sqrt(t) * record_at(r, t).W - c * record_at(r, T).Z) >= delta) ++k;
    const double p = static_cast<double>(k) / static_cast<double>(runs.size());
    rep.rows.push_back({t, delta, k, runs.size(), p, wilson_interval(k, runs.size())});
    ps.push_back(p);
  }
  rep.non_increasing = non_increasing(ps);
  return rep;
}

SpeedReport speed_bound_check(const std::vector<ReplicateResult>& runs, const std::vector<double>& ts,
                              const std::vector<double>& deltas, double T) {
  if (runs.empty()) throw ConfigError("no replicates");
  SpeedReport rep;
  std::vector<double> xs, ys;
  for (double t : ts) {
    if (!(t >= 2) || t > T / 2 + kTimeMatch) throw ConfigError("speed bound needs t in [2, T/2]");
    for (double d : deltas) {
      if (!(d > 0 && d <= 1)) throw ConfigError("speed bound needs delta in (0, 1]");
      std::size_t k = 0;
      for (const auto& r : runs)
        if (std::abs(record_at(r, T).Z - record_at(r, t).Z) >= d) ++k;
      const double p = static_cast<double>(k) / static_cast<double>(runs.size());
      const double lt = std::log(t);
      const double C = p * d * std::sqrt(t) / (lt * lt);
      rep.rows.push_back({{t, d, k, runs.size(), p, wilson_interval(k, runs.size())}, C});
      rep.C_max = std::max(rep.C_max, C);
      xs.push_back(t);
      ys.push_back(C);
    }
  }
  rep.kendall = kendall_increasing(xs, ys);
  rep.pass = rep.kendall.p_increasing > 0.05;
  return rep;
}

double ngood_beta(const NGoodConfig& c, double t) { return c.beta.value_or(0.5 * std::log(t)); }

double ngood_gamma(const NGoodConfig& c, double t) { return ngood_beta(c, t) + 0.5 * std::log(t); }

NGoodSample ngood_replicate(const NGoodConfig& c, double t, double a, std::uint64_t seed, std::uint64_t replicate) {
  if (!(t > 1) || !(a >= 1)) throw ConfigError("good/bad experiment needs t > 1 and a >= 1");
  const double at = a * t;
  const double gamma = ngood_gamma(c, t);
  SimConfig s;
  s.offspring = c.offspring;
  s.horizon = at + c.extra_time;
  s.dt = c.dt;
  s.eps_prune = c.eps;
  s.absolute_prune = true;
  s.barrier = BarrierSpec{at, gamma, BarrierMode::kill, t};
  s.keep_hits = false;
  s.keep_unresolved = true;
  s.max_particles = c.max_particles;
  const ReplicateResult r = simulate(s, seed, replicate);

  NGoodSample out;
  out.replicate = replicate;
  out.t = t;
  out.a = a;
  out.beta = ngood_beta(c, t);
  out.good = r.n_good;
  out.bad = r.n_hits - r.n_good;
  auto add = [&](const UnresolvedParticle& p) {
    if (!p.line_ok) return;
    const double m = std::exp(-(p.x - gamma));
    if (p.time < at - kTimeMatch) out.residual_early += m;
    (p.watch_ok ? out.residual_good : out.residual_bad) += m;
  };
  for (const auto& p : r.frozen_particles) add(p);
  for (const auto& p : r.survivors) add(p);
  const double W_at = r.pre_line ? r.pre_line->W : r.frozen.W;
  out.lhs = std::exp(-out.beta) * (static_cast<double>(out.good) + out.residual_good);
  out.rhs = std::sqrt(t) * W_at;
  return out;
}

std::vector<NGoodSample> run_ngood(const NGoodConfig& c, const std::vector<double>& ts, const std::vector<double>& as,
                                   const SeedPool& pool, unsigned threads) {
  std::vector<NGoodSample> out;
  for (double t : ts)
    for (double a : as) {
      auto v = parallel_map(pool.count, threads,
                            [&](std::size_t i) { return ngood_replicate(c, t, a, pool.seed, pool.first + i); });
      out.insert(out.end(), v.begin(), v.end());
    }
  return out;
}

Interval median_ci(std::vector<double> v, double level) {
  if (v.empty()) throw ConfigError("median of empty sample");
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  const double z = normal_quantile((1 + level) / 2);
  const double lo = std::floor(n / 2 - z * std::sqrt(n) / 2) - 1;
  const double hi = std::ceil(n / 2 + z * std::sqrt(n) / 2);
  const auto clampi = [&](double i) { return static_cast<std::size_t>(std::clamp(i, 0.0, n - 1)); };
  return {v[clampi(lo)], v[clampi(hi)]};
}

NGoodReport n_good_scaling_check(const std::vector<NGoodSample>& samples) {
  NGoodReport rep;
  std::vector<std::pair<double, double>> keys;
  for (const auto& s : samples)
    if (std::find(keys.begin(), keys.end(), std::make_pair(s.t, s.a)) == keys.end()) keys.emplace_back(s.t, s.a);
  std::sort(keys.begin(), keys.end(), [](auto x, auto y) { return x.second != y.second ? x.second < y.second : x.first < y.first; });
  for (const auto& [t, a] : keys) {
    std::vector<double> ratios, gaps;
    double bad = 0, all = 0, residual = 0;
    std::size_t n = 0;
    for (const auto& s : samples) {
      if (s.t != t || s.a != a) continue;
      ++n;
      if (s.rhs > 0) ratios.push_back(s.lhs / s.rhs);
      gaps.push_back(s.beta * std::abs(s.lhs - s.rhs));
      const double total = static_cast<double>(s.good + s.bad) + s.residual_good + s.residual_bad;
      bad += static_cast<double>(s.bad) + s.residual_bad;
      residual += s.residual_good + s.residual_bad;
      all += total;
    }
    NGoodRow row{t, a, n, 0, {0, 0}, 0, all > 0 ? bad / all : 0.0, all > 0 ? residual / all : 0.0};
    if (!ratios.empty()) {
      row.median_ratio = median(ratios);
      row.ratio_ci = median_ci(ratios);
    }
    row.median_gap = median(gaps);
    rep.rows.push_back(row);
  }
  rep.ratio_trend = rep.bad_trend = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const auto& p = rep.rows[i - 1];
    const auto& q = rep.rows[i];
    if (p.a != q.a) continue;
    if (std::abs(q.median_ratio - 1) > std::abs(p.median_ratio - 1)) rep.ratio_trend = false;
    if (q.bad_fraction > p.bad_fraction) rep.bad_trend = false;
  }
  return rep;
}

}  // namespace bbm
