#include "bbm/spine.hpp"

#include <algorithm>
#include <cmath>

#include "bbm/engine.hpp"
#include "bbm/parallel.hpp"
#include "bbm/stats.hpp"

namespace bbm {

std::string to_string(SpineMeasure m) {
  switch (m) {
    case SpineMeasure::Q:
      return "Q";
    case SpineMeasure::Qtilde:
      return "Qtilde";
    case SpineMeasure::Q0:
      return "Q0";
  }
  return "?";
}

SpineMeasure parse_spine_measure(const std::string& s) {
  if (s == "Q") return SpineMeasure::Q;
  if (s == "Qtilde") return SpineMeasure::Qtilde;
  if (s == "Q0") return SpineMeasure::Q0;
  throw ConfigError("unknown spine measure: " + s);
}

double SpineEstimate::mean_inter_event() const {
  return branch_events > 0 ? exposure / static_cast<double>(branch_events) : 0.0;
}

double SpineEstimate::mean_inter_event_se() const {
  return branch_events > 0 ? mean_inter_event() / std::sqrt(static_cast<double>(branch_events)) : 0.0;
}

SpineRealization sample_spine(const OffspringLaw& law, SpineMeasure m, double x, double s, Rng& rng) {
  const ModelParams params = normalize_params(law);
  const OffspringLaw sb = size_biased(law);
  const double rate = params.m1 * params.lambda;
  if (!(s >= 0)) throw ConfigError("spine horizon must be >= 0");
  if (m != SpineMeasure::Q && !(x >= 0)) throw ConfigError("Qtilde and Q0 spines start at x >= 0");
  if (m == SpineMeasure::Qtilde && !(x > 0)) throw ConfigError("Qtilde spine needs x > 0");

  SpineRealization r;
  r.times.push_back(0.0);
  r.path.push_back(x);
  double t = 0, pos = x;
  double v[3] = {x, 0.0, 0.0};
  bool positive = x > 0, stopped = m == SpineMeasure::Q0 && x <= 0;
  double grid_min = x;
  while (!stopped) {
    const double next = t + rng.exponential() / rate;
    const double tend = std::min(next, s);
    const double h = tend - t;
    if (h > 0) {
      if (m == SpineMeasure::Qtilde) {
        const double sh = std::sqrt(h);
        for (double& c : v) c += sh * rng.normal();
        pos = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      } else {
        const double np = pos + std::sqrt(h) * rng.normal();
        const bool hit = positive && (np <= 0 || rng.uniform() < bridge_hit_probability(pos, np, h, 0.0));
        if (hit && m == SpineMeasure::Q0) {
          t = sample_bridge_hit_time(pos, np, t, h, 0.0, rng);
          pos = 0;
          stopped = true;
          positive = false;
          r.times.push_back(t);
          r.path.push_back(0.0);
          grid_min = 0;
          break;
        }
        if (hit) positive = false;
        pos = np;
      }
    }
    t = tend;
    r.times.push_back(t);
    r.path.push_back(pos);
    grid_min = std::min(grid_min, pos);
    if (next > s) break;
    const int k = sb.sample(rng);
    const int child = std::min(k - 1, static_cast<int>(rng.uniform() * k));
    r.events.push_back({t, k, child});
    for (int c = 1; c < k; ++c) r.off_spine_births.push_back(pos);
  }
  r.summary = PathSummary{pos, positive, stopped, grid_min};
  return r;
}

SpineEstimate spine_expectation(const OffspringLaw& law, SpineMeasure m, double x, double s, const PathFunctional& h,
                                std::size_t n, std::uint64_t seed, bool keep_diagnostics) {
  if (n < 2) throw ConfigError("spine expectation needs n >= 2");
  const double weight = m == SpineMeasure::Qtilde ? x * std::exp(-x) : std::exp(-x);
  SpineEstimate est;
  est.n = n;
  RunningStat acc;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed, i);
    const SpineRealization r = sample_spine(law, m, x, s, rng);
    acc.add(h(r.summary));
    est.branch_events += r.events.size();
    est.exposure += r.times.back();
    if (keep_diagnostics) {
      est.events_per_spine.push_back(r.events.size());
      for (const auto& e : r.events) {
        if (est.offspring_counts.size() <= static_cast<std::size_t>(e.offspring))
          est.offspring_counts.resize(e.offspring + 1, 0);
        ++est.offspring_counts[e.offspring];
      }
    }
  }
  est.estimate = weight * acc.mean();
  est.se = weight * acc.se();
  return est;
}

SpineEstimate spine_expectation_Q(const OffspringLaw& law, double x, double s, const PathFunctional& h, std::size_t n,
                                  std::uint64_t seed) {
  return spine_expectation(law, SpineMeasure::Q, x, s, h, n, seed);
}

SpineEstimate spine_expectation_Qtilde(const OffspringLaw& law, double x, double s, const PathFunctional& h,
                                       std::size_t n, std::uint64_t seed) {
  return spine_expectation(law, SpineMeasure::Qtilde, x, s, h, n, seed);
}

SpineEstimate spine_expectation_Q0(const OffspringLaw& law, double x, double s, const PathFunctional& h, std::size_t n,
                                   std::uint64_t seed) {
  return spine_expectation(law, SpineMeasure::Q0, x, s, h, n, seed);
}

SpineDiagnostics spine_diagnostics(const SpineEstimate& e, const OffspringLaw& law, SpineMeasure m, double s) {
  const ModelParams params = normalize_params(law);
  SpineDiagnostics d;
  d.rate = params.m1 * params.lambda;
  d.events = e.branch_events;
  d.observed_rate = e.exposure > 0 ? static_cast<double>(e.branch_events) / e.exposure : 0.0;
  const double expected = d.rate * e.exposure;
  d.rate_z = expected > 0 ? (static_cast<double>(e.branch_events) - expected) / std::sqrt(expected) : 0.0;
  d.rate_p = z_test_p(d.rate_z);
  d.mean_inter_event = e.mean_inter_event();
  d.mean_inter_event_se = e.mean_inter_event_se();

  if (m != SpineMeasure::Q0 && !e.events_per_spine.empty()) {
    const double mean = d.rate * s;
    std::size_t kmax = 0;
    for (auto c : e.events_per_spine) kmax = std::max(kmax, c);
    std::vector<std::size_t> obs(kmax + 2, 0);
    for (auto c : e.events_per_spine) ++obs[c];
    std::vector<double> probs(kmax + 2);
    double p = std::exp(-mean), acc = 0;
    for (std::size_t k = 0; k <= kmax; ++k) {
      probs[k] = p;
      acc += p;
      p *= mean / static_cast<double>(k + 1);
    }
    probs[kmax + 1] = std::max(0.0, 1.0 - acc);  // upper tail cell
    d.counts_p = chi_square_gof(obs, probs).p_value;
  }

  const OffspringLaw sb = size_biased(law);
  const auto kmax = static_cast<std::size_t>(sb.max_offspring());
  std::vector<std::size_t> obs(kmax + 1, 0);
  for (std::size_t k = 0; k < e.offspring_counts.size() && k <= kmax; ++k) obs[k] = e.offspring_counts[k];
  std::vector<double> probs(kmax + 1);
  for (std::size_t k = 0; k <= kmax; ++k) probs[k] = sb.probability(static_cast<int>(k));
  d.offspring_p = e.branch_events > 0 ? chi_square_gof(obs, probs).p_value : 0.0;
  return d;
}

DirectEstimate direct_expectation(const OffspringLaw& law, SpineMeasure m, double x, double s, const PathFunctional& h,
                                  std::size_t n, std::uint64_t seed, unsigned threads) {
  if (h.kind == FunctionalKind::grid_min_above) throw ConfigError("grid functionals have no direct estimator");
  if (n < 2) throw ConfigError("direct expectation needs n >= 2");
  SimConfig c;
  c.offspring = law;
  c.horizon = s;
  c.dt = std::min(0.5, std::max(s, 1e-6));
  c.start = x;
  c.barrier = BarrierSpec{0.0, 0.0, m == SpineMeasure::Q0 ? BarrierMode::kill : BarrierMode::flag_only, std::nullopt};
  c.keep_unresolved = true;
  c.keep_hits = m == SpineMeasure::Q0;
  const auto values = parallel_map(n, threads, [&](std::size_t i) {
    const ReplicateResult r = simulate(c, seed, i);
    double sum = 0;
    for (const auto& p : r.survivors) {
      const PathSummary ps{p.x, p.line_ok, false, p.x};
      if (m == SpineMeasure::Qtilde) {
        if (p.line_ok) sum += p.x * std::exp(-p.x) * h(ps);
      } else {
        sum += std::exp(-p.x) * h(ps);
      }
    }
    if (m == SpineMeasure::Q0) {
      const PathSummary stopped{0.0, false, true, 0.0};
      sum += static_cast<double>(r.hits.size()) * h(stopped);
    }
    return sum;
  });
  RunningStat acc;
  for (double v : values) acc.add(v);
  return {acc.mean(), acc.se(), n};
}

ManyToOneReport many_to_one_check(const OffspringLaw& law, SpineMeasure m, double x, double s, const PathFunctional& h,
                                  std::size_t n_direct, std::size_t n_spine, std::uint64_t direct_seed,
                                  std::uint64_t spine_seed, unsigned threads) {
  if (direct_seed == spine_seed) throw ConfigError("many-to-one check needs independent seeds");
  const DirectEstimate d = direct_expectation(law, m, x, s, h, n_direct, direct_seed, threads);
  const SpineEstimate sp = spine_expectation(law, m, x, s, h, n_spine, spine_seed);
  ManyToOneReport r;
  r.functional = h.name();
  r.measure = m;
  r.x = x;
  r.s = s;
  r.direct = d.estimate;
  r.direct_se = d.se;
  r.spine = sp.estimate;
  r.spine_se = sp.se;
  r.se = std::hypot(d.se, sp.se);
  r.pass = std::abs(d.estimate - sp.estimate) <= 3 * r.se;
  r.variance_blowup = d.se > 0.5 * std::abs(d.estimate) || sp.se > 0.5 * std::abs(sp.estimate);
  return r;
}

}  // namespace bbm
