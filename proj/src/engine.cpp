#include "bbm/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace bbm {

namespace {

constexpr std::uint32_t kDead = 4u;
constexpr double kTimeTol = 1e-12;

// Solves e^{-K}(1+K) = thr for K > 0, thr in (0, 1).
double prune_level(double thr) {
  const double lt = std::log(thr);
  double k = -lt;
  for (int i = 0; i < 200; ++i) {
    const double next = std::log1p(k) - lt;
    if (std::abs(next - k) < 1e-14 * (1 + k)) return next;
    k = next;
  }
  return k;
}

std::vector<double> build_grid(const SimConfig& c) {
  std::vector<double> g{0.0};
  const auto steps = static_cast<std::size_t>(std::floor(c.horizon / c.dt + 1e-9));
  for (std::size_t k = 1; k <= steps; ++k) g.push_back(static_cast<double>(k) * c.dt);
  g.push_back(c.horizon);
  for (double t : c.observation_times) g.push_back(t);
  if (c.barrier) {
    if (c.barrier->start <= c.horizon) g.push_back(c.barrier->start);
    if (c.barrier->monitor_from && *c.barrier->monitor_from <= c.horizon) g.push_back(*c.barrier->monitor_from);
  }
  std::sort(g.begin(), g.end());
  std::vector<double> out;
  for (double t : g) {
    if (t > c.horizon) continue;
    if (out.empty() || t - out.back() > kTimeTol) out.push_back(t);
  }
  return out;
}

bool crossed(double x1, double x2, double h, double gamma, Rng& rng) {
  if (x2 <= gamma || x1 <= gamma) return true;
  const double e = 2.0 * (x1 - gamma) * (x2 - gamma) / h;
  if (e > 40.0) return false;
  return rng.uniform() < std::exp(-e);
}

}  // namespace

double bridge_hit_probability(double x1, double x2, double dt, double gamma) {
  if (x1 <= gamma || x2 <= gamma) return 1.0;
  return std::exp(-2.0 * (x1 - gamma) * (x2 - gamma) / dt);
}

double sample_inverse_gaussian(double mean, double shape, Rng& rng) {
  const double n = rng.normal();
  const double y = n * n;
  if (!std::isfinite(mean)) return shape / y;
  const double r = mean * y / (2.0 * shape);
  const double x = mean / (1.0 + r + std::sqrt(r * (r + 2.0)));
  return rng.uniform() * (mean + x) <= mean ? x : mean * mean / x;
}

double sample_bridge_hit_time(double x1, double x2, double t0, double h, double gamma, Rng& rng) {
  const double a = x1 - gamma;
  if (a <= 0) return t0;
  const double b = std::abs(x2 - gamma);
  const double mean = b > 0 ? a / b : std::numeric_limits<double>::infinity();
  const double u = sample_inverse_gaussian(mean, a * a / h, rng);
  const double tau = std::isfinite(u) ? h * u / (1.0 + u) : h;
  return t0 + std::clamp(tau, 0.0, h);
}

double bm_hit_cdf(double x, double u) {
  if (x <= 0) return 1.0;
  if (u <= 0) return 0.0;
  return std::erfc(x / std::sqrt(2.0 * u));
}

void prune_and_freeze(PopulationState& state, double eps, double time, const std::optional<BarrierSpec>& barrier,
                      std::optional<double> theta, bool absolute, std::optional<double> ceiling) {
  auto& ps = state.particles;
  if ((eps <= 0 && !ceiling) || ps.empty()) return;
  double cut = std::numeric_limits<double>::infinity();
  bool direct = false;
  double thr = 0;
  if (eps > 0 && absolute) {
    cut = barrier->level - std::log(eps);
  } else if (eps > 0) {
    thr = eps / static_cast<double>(ps.size());
    if (thr < 1.0)
      cut = prune_level(thr);
    else
      direct = true;
  }
  const double top = ceiling.value_or(std::numeric_limits<double>::infinity());
  const double gamma = barrier ? barrier->level : 0.0;
  auto& f = state.frozen;
  auto freeze = [&](const Particle& p) {
    const double e = std::exp(-p.x);
    f.W += e;
    f.Z += p.x * e;
    if (theta) f.W_theta += std::exp(-*theta * p.x - 0.5 * (*theta - 1) * (*theta - 1) * time);
    const bool on_line = (p.flags & kLineOk) != 0;
    if (!barrier) {
      f.W_tilde += e;
      f.Z_tilde += p.x * e;
    } else if (on_line) {
      f.W_tilde += e;
      f.Z_tilde += (p.x - gamma) * e;
      f.expected_hits += std::exp(-(p.x - gamma));
    }
    if (state.log_frozen) state.frozen_log.push_back({time, p.x, on_line, (p.flags & kWatchOk) != 0});
  };
  auto drop = [&](const Particle& p) {
    const bool go = p.x > top || (direct ? std::exp(-p.x) * (1 + std::abs(p.x)) < thr : p.x > cut);
    if (go) freeze(p);
    return go;
  };
  ps.erase(std::remove_if(ps.begin(), ps.end(), drop), ps.end());
}

ReplicateResult simulate(const SimConfig& config, std::uint64_t seed, std::uint64_t replicate) {
  config.validate();
  const ModelParams params = normalize_params(config.offspring);
  const double inv_lambda = 1.0 / params.lambda;
  const auto& law = config.offspring;
  const bool deterministic_law = law.pmf().size() == 1;
  const int fixed_k = law.pmf().front().first;

  Rng rng(seed, replicate);
  ReplicateResult res;
  res.seed = seed;
  res.replicate = replicate;

  PopulationState state;
  state.log_frozen = config.keep_unresolved;
  auto& ps = state.particles;
  ps.push_back({config.start, rng.exponential() * inv_lambda, 0.0, 0, kLineOk | kWatchOk});
  std::uint64_t next_id = 1;

  const bool have = config.barrier.has_value();
  const BarrierSpec b = have ? *config.barrier : BarrierSpec{};
  const double gamma = b.level;
  const double mon = b.monitor_from.value_or(b.start);
  bool watch_started = false, watch_active = false, line_active = false;
  const bool kill = have && b.mode == BarrierMode::kill;

  auto record_hit = [&](double time, std::uint32_t flags, std::uint64_t id) {
    const HitClass cls = (flags & kWatchOk) ? HitClass::good : HitClass::bad;
    ++res.n_hits;
    if (cls == HitClass::good) ++res.n_good;
    if (config.keep_hits) res.hits.push_back({time, cls, id});
  };

  const auto& obs = config.observation_times;
  std::size_t next_obs = 0;
  const std::optional<double> theta = config.theta;

  auto snapshot = [&](double t) {
    double W = 0, Z = 0, Wt = 0, Zt = 0, Wth = 0;
    const double theta_shift = theta ? 0.5 * (*theta - 1) * (*theta - 1) * t : 0.0;
    for (const auto& p : ps) {
      const double e = std::exp(-p.x);
      W += e;
      Z += p.x * e;
      if (!have) {
        Wt += e;
        Zt += p.x * e;
      } else if (p.flags & kLineOk) {
        Wt += e;
        Zt += (p.x - gamma) * e;
      }
      if (theta) Wth += std::exp(-*theta * p.x - theta_shift);
    }
    const auto& f = state.frozen;
    MartingaleRecord r{t, W + f.W, Z + f.Z, std::nullopt, Wt + f.W_tilde, Zt + f.Z_tilde, ps.size(), f.W, f.Z};
    if (theta) r.W_theta = Wth + f.W_theta;
    return r;
  };

  auto grid_events = [&](double t) {
    if (!have) return;
    if (!watch_started && t >= mon - kTimeTol) {
      watch_started = true;
      watch_active = mon < b.start - kTimeTol;
      for (auto& p : ps)
        if (p.x <= gamma) p.flags &= ~kWatchOk;
    }
    if (!line_active && t >= b.start - kTimeTol) {
      line_active = true;
      res.pre_line = snapshot(t);
      watch_active = false;
      for (auto& p : ps) {
        if ((p.flags & kLineOk) && p.x <= gamma) {
          record_hit(t, p.flags, p.id);
          p.flags &= ~kLineOk;
          if (kill) p.flags |= kDead;
        }
      }
      if (kill) ps.erase(std::remove_if(ps.begin(), ps.end(), [](const Particle& p) { return p.flags & kDead; }), ps.end());
    }
  };

  auto observe = [&](double t) { res.records.push_back(snapshot(t)); };

  auto at_grid = [&](double t) {
    grid_events(t);
    prune_and_freeze(state, config.eps_prune, t, config.barrier, theta, config.absolute_prune, config.ceiling);
    while (next_obs < obs.size() && obs[next_obs] <= t + kTimeTol) {
      observe(obs[next_obs]);
      ++next_obs;
    }
    res.peak_alive = std::max(res.peak_alive, ps.size());
  };

  const std::vector<double> grid = build_grid(config);
  at_grid(0.0);

  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (ps.empty()) break;
    const double t1 = grid[g];
    for (std::size_t i = 0; i < ps.size(); ++i) {
      Particle p = ps[i];
      double tau = p.t;
      bool dead = false;
      for (;;) {
        const double tend = std::min(p.next_branch, t1);
        const double h = tend - tau;
        if (h > 0) {
          const double xn = p.x + h + std::sqrt(h) * rng.normal();
          if (watch_active && (p.flags & kWatchOk) && crossed(p.x, xn, h, gamma, rng)) p.flags &= ~kWatchOk;
          if (line_active && (p.flags & kLineOk) && crossed(p.x, xn, h, gamma, rng)) {
            record_hit(sample_bridge_hit_time(p.x, xn, tau, h, gamma, rng), p.flags, p.id);
            p.flags &= ~kLineOk;
            if (kill) {
              dead = true;
              break;
            }
          }
          p.x = xn;
        }
        tau = tend;
        if (p.next_branch > t1) break;
        const int k = deterministic_law ? fixed_k : law.sample(rng);
        if (k == 0) {
          dead = true;
          break;
        }
        for (int c = 1; c < k; ++c) {
          if (ps.size() >= config.max_particles)
            throw PopulationExplosion("population exceeded " + std::to_string(config.max_particles) +
                                      " particles at time " + std::to_string(tau));
          ps.push_back({p.x, tau + rng.exponential() * inv_lambda, tau, next_id++, p.flags});
        }
        p.next_branch = tau + rng.exponential() * inv_lambda;
      }
      if (dead) p.flags |= kDead;
      p.t = t1;
      ps[i] = p;
    }
    ps.erase(std::remove_if(ps.begin(), ps.end(), [](const Particle& p) { return p.flags & kDead; }), ps.end());
    res.peak_alive = std::max(res.peak_alive, ps.size());
    at_grid(t1);
  }

  if (ps.empty()) {
    res.extinct = state.frozen.W == 0;
    while (next_obs < obs.size()) observe(obs[next_obs++]);
  }
  res.frozen = state.frozen;
  if (config.keep_unresolved) {
    res.frozen_particles = std::move(state.frozen_log);
    for (const auto& p : ps)
      res.survivors.push_back({config.horizon, p.x, (p.flags & kLineOk) != 0, (p.flags & kWatchOk) != 0});
  }
  return res;
}

GoodBadCounts good_bad_split(std::span<const StoppingLineRecord> hits) {
  GoodBadCounts c;
  for (const auto& h : hits) (h.classification == HitClass::good ? c.good : c.bad)++;
  return c;
}

std::optional<StoppingLineRecord> classify_path(std::span<const PathPoint> path, double t, double a, double gamma,
                                                std::uint64_t id) {
  const double line = a * t;
  bool above = true;
  for (const auto& pt : path) {
    if (pt.time >= t - kTimeTol && pt.time <= line + kTimeTol && pt.x <= gamma) above = false;
    if (pt.time >= line - kTimeTol && pt.x <= gamma)
      return StoppingLineRecord{pt.time, above ? HitClass::good : HitClass::bad, id};
  }
  return std::nullopt;
}

GoodBadCounts good_bad_split(const std::vector<std::vector<PathPoint>>& paths, double t, double a, double gamma) {
  std::vector<StoppingLineRecord> hits;
  for (std::size_t i = 0; i < paths.size(); ++i)
    if (auto h = classify_path(paths[i], t, a, gamma, i)) hits.push_back(*h);
  return good_bad_split(hits);
}

std::vector<double> HitCountSample::estimate() const {
  std::vector<double> out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<double>(counts[i]) + residual[i];
  return out;
}

HitCountSample hitting_counts(const HittingConfig& hc, std::uint64_t seed, std::uint64_t replicate) {
  if (!(hc.x >= 0)) throw ConfigError("hitting counts need a start position >= 0");
  for (std::size_t i = 0; i < hc.windows.size(); ++i) {
    if (!(hc.windows[i].lo >= 0 && hc.windows[i].lo <= hc.windows[i].hi)) throw ConfigError("invalid hit window");
    for (std::size_t j = 0; j < i; ++j)
      if (hc.windows[i].lo <= hc.windows[j].hi && hc.windows[j].lo <= hc.windows[i].hi)
        throw ConfigError("hit windows must be disjoint");
  }
  SimConfig c;
  c.offspring = hc.offspring;
  c.horizon = hc.horizon;
  c.dt = hc.dt;
  c.start = hc.x;
  c.eps_prune = hc.eps;
  c.absolute_prune = true;
  c.barrier = BarrierSpec{0.0, 0.0, BarrierMode::kill, std::nullopt};
  c.max_particles = hc.max_particles;
  c.keep_unresolved = true;
  const ReplicateResult r = simulate(c, seed, replicate);

  HitCountSample s;
  s.seed = seed;
  s.replicate = replicate;
  s.counts.assign(hc.windows.size(), 0);
  s.residual.assign(hc.windows.size(), 0.0);
  s.total_count = r.n_hits;
  for (const auto& h : r.hits)
    for (std::size_t w = 0; w < hc.windows.size(); ++w)
      if (h.hit_time >= hc.windows[w].lo && h.hit_time <= hc.windows[w].hi) ++s.counts[w];
  auto add_residual = [&](const UnresolvedParticle& p) {
    const double m = std::exp(-p.x);
    s.total_residual += m;
    for (std::size_t w = 0; w < hc.windows.size(); ++w)
      s.residual[w] += m * (bm_hit_cdf(p.x, hc.windows[w].hi - p.time) - bm_hit_cdf(p.x, hc.windows[w].lo - p.time));
  };
  for (const auto& p : r.frozen_particles) add_residual(p);
  for (const auto& p : r.survivors) add_residual(p);
  s.cutoff = s.total_residual > hc.residual_budget * std::exp(-hc.x);
  return s;
}

}  // namespace bbm
