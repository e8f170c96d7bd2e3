#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <vector>

#include "bbm/bessel.hpp"
#include "bbm/engine.hpp"
#include "bbm/stats.hpp"
#include "doctest.h"

using namespace bbm;

namespace {

SimConfig free_config(double horizon, std::vector<double> obs, double start = 0) {
  SimConfig c;
  c.horizon = horizon;
  c.observation_times = std::move(obs);
  c.start = start;
  return c;
}

struct Means {
  RunningStat W, Z, Wt, Zt;
};

std::vector<Means> record_means(const SimConfig& c, std::size_t n, std::uint64_t seed) {
  std::vector<Means> m(c.observation_times.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = simulate(c, seed, i);
    REQUIRE(r.records.size() == m.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
      m[k].W.add(r.records[k].W);
      m[k].Z.add(r.records[k].Z);
      m[k].Wt.add(r.records[k].W_tilde);
      m[k].Zt.add(r.records[k].Z_tilde);
    }
  }
  return m;
}

bool within(const RunningStat& s, double target, double k = 3) { return std::abs(s.mean() - target) <= k * s.se(); }

}  // namespace

TEST_CASE("initial record") {
  const auto r = simulate(free_config(1, {0, 1}), 1);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].time == 0);
  CHECK(r.records[0].W == 1);
  CHECK(r.records[0].Z == 0);
  CHECK(r.records[0].alive == 1);
  CHECK(r.records[0].frozen_W == 0);
}

TEST_CASE("martingale means, binary law from 0") {
  const auto m = record_means(free_config(2, {1, 2}), 10000, 77);
  for (const auto& s : m) {
    CHECK(within(s.W, 1.0));
    CHECK(within(s.Z, 0.0));
  }
}

TEST_CASE("martingale means, law with extinction from x = 0.7") {
  SimConfig c = free_config(3, {0.5, 1.5, 3}, 0.7);
  c.offspring = OffspringLaw({{0, 0.1}, {2, 0.6}, {3, 0.3}});
  const auto m = record_means(c, 10000, 78);
  for (const auto& s : m) {
    CHECK(within(s.W, std::exp(-0.7)));
    CHECK(within(s.Z, 0.7 * std::exp(-0.7)));
  }
}

TEST_CASE("bridge hit probability examples") {
  CHECK(bridge_hit_probability(0, 5, 1, 0) == 1);
  CHECK(bridge_hit_probability(2, -1, 1, 0) == 1);
  CHECK(bridge_hit_probability(1, 1, 1, 0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  CHECK(bridge_hit_probability(3.5, 3.5, 0.01, 0.5) < 1e-300);
}

TEST_CASE("bridge hit probability against a fine-grid bridge minimum") {
  // Discrete monitoring on step h behaves like a continuous barrier moved
  // down by 0.5826 sqrt(h).
  const int steps = 1000, n = 20000;
  const double h = 1.0 / steps;
  Rng rng(5, 0);
  std::size_t hits = 0;
  std::vector<double> w(steps + 1);
  for (int p = 0; p < n; ++p) {
    w[0] = 0;
    for (int i = 1; i <= steps; ++i) w[i] = w[i - 1] + std::sqrt(h) * rng.normal();
    bool hit = false;
    for (int i = 0; i <= steps && !hit; ++i) {
      const double s = i * h;
      hit = 1.0 + w[i] - s * w[steps] <= 0;
    }
    hits += hit;
  }
  const double shift = 0.5826 * std::sqrt(h);
  const double expect = bridge_hit_probability(1 + shift, 1 + shift, 1, 0);
  const double p = static_cast<double>(hits) / n;
  CHECK(std::abs(p - expect) < 4 * std::sqrt(expect * (1 - expect) / n));
}

TEST_CASE("conditional bridge hit times follow the first-passage bridge law") {
  const double x1 = 1, x2 = 0.5, h = 2;
  auto density = [&](double u) {
    if (u <= 0 || u >= h) return 0.0;
    return bm_hit_time_density(x1, u) * std::exp(-x2 * x2 / (2 * (h - u))) / std::sqrt(h - u);
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  const double norm = GK::integrate(density, 0, h, 12, 1e-12);
  auto cdf = [&](double u) {
    if (u <= 0) return 0.0;
    if (u >= h) return 1.0;
    return GK::integrate(density, 0, u, 12, 1e-12) / norm;
  };
  Rng rng(6, 0);
  std::vector<double> draws(20000);
  for (auto& d : draws) {
    d = sample_bridge_hit_time(x1, x2, 3.0, h, 0, rng) - 3.0;
    REQUIRE(d > 0);
    REQUIRE(d < h);
  }
  CHECK(ks_p_value(ks_statistic(draws, cdf), draws.size()) > 0.001);
}

TEST_CASE("inverse Gaussian with infinite mean is the Brownian first-passage law") {
  Rng rng(7, 0);
  std::vector<double> draws(20000);
  for (auto& d : draws) d = sample_inverse_gaussian(INFINITY, 1.5 * 1.5, rng);
  CHECK(ks_p_value(ks_statistic(draws, [](double u) { return bm_hit_cdf(1.5, u); }), draws.size()) > 0.001);
}

TEST_CASE("prune_and_freeze examples") {
  PopulationState s;
  s.particles.push_back({50.0, 1.0, 0.0, 0, kLineOk | kWatchOk});
  prune_and_freeze(s, 0, 0, std::nullopt, std::nullopt);
  CHECK(s.particles.size() == 1);
  CHECK(s.frozen.W == 0);
  prune_and_freeze(s, 1e-6, 0, std::nullopt, std::nullopt);
  CHECK(s.particles.empty());
  CHECK(s.frozen.W == std::exp(-50.0));
  CHECK(s.frozen.Z == doctest::Approx(50 * std::exp(-50.0)).epsilon(1e-15));
}

TEST_CASE("frozen mass accounting is exact") {
  Rng rng(8, 0);
  PopulationState s;
  double W = 0, Z = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const double x = 20 * rng.uniform() - 2;
    s.particles.push_back({x, 1.0, 0.0, i, kLineOk | kWatchOk});
    W += std::exp(-x);
    Z += x * std::exp(-x);
  }
  prune_and_freeze(s, 1e-3, 0, std::nullopt, std::nullopt);
  CHECK(s.particles.size() < 200);
  double alive_W = 0, alive_Z = 0;
  for (const auto& p : s.particles) {
    alive_W += std::exp(-p.x);
    alive_Z += p.x * std::exp(-p.x);
  }
  CHECK(alive_W + s.frozen.W == doctest::Approx(W).epsilon(1e-14));
  CHECK(alive_Z + s.frozen.Z == doctest::Approx(Z).epsilon(1e-14));
  for (const auto& p : s.particles) CHECK(std::exp(-p.x) * (1 + std::abs(p.x)) >= 1e-3 / 200);
}

TEST_CASE("reported W includes frozen mass and pruning keeps means") {
  SimConfig c = free_config(6, {2, 4, 6});
  c.eps_prune = 1e-2;
  const auto m = record_means(c, 6000, 9);
  for (const auto& s : m) {
    CHECK(within(s.W, 1.0));
    CHECK(within(s.Z, 0.0));
  }
  const auto r = simulate(c, 9, 0);
  for (const auto& rec : r.records) {
    CHECK(rec.frozen_W >= 0);
    CHECK(rec.W >= rec.frozen_W);
  }
}

TEST_CASE("tiny eps_prune changes nothing at t = 8") {
  SimConfig a = free_config(8, {8});
  SimConfig b = a;
  b.eps_prune = 1e-9;
  double diff = 0;
  const int n = 100;
  for (int i = 0; i < n; ++i) diff += std::abs(simulate(a, 10, i).records[0].Z - simulate(b, 10, i).records[0].Z);
  CHECK(diff / n < 1e-6);
}

TEST_CASE("identical config and seed give bit-identical records") {
  SimConfig c = free_config(5, {1, 3, 5}, 0.3);
  c.eps_prune = 1e-4;
  for (int i = 0; i < 20; ++i) {
    const auto a = simulate(c, 11, i), b = simulate(c, 11, i);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
      CHECK(a.records[k].W == b.records[k].W);
      CHECK(a.records[k].Z == b.records[k].Z);
      CHECK(a.records[k].alive == b.records[k].alive);
    }
  }
}

TEST_CASE("population guard aborts instead of growing without bound") {
  SimConfig c = free_config(40, {40});
  c.max_particles = 50;
  CHECK_THROWS_AS(simulate(c, 12, 0), PopulationExplosion);
}

TEST_CASE("barrier-truncated derivative martingale has constant mean") {
  SUBCASE("barrier from time 0") {
    SimConfig c = free_config(4, {1, 2, 4}, 1.0);
    c.barrier = BarrierSpec{0.0, 0.0, BarrierMode::kill, std::nullopt};
    const auto m = record_means(c, 20000, 13);
    for (const auto& s : m) CHECK(within(s.Zt, std::exp(-1.0)));
  }
  SUBCASE("barrier switched on later, at a raised level") {
    SimConfig c = free_config(5, {1, 2, 3, 5}, 1.0);
    c.barrier = BarrierSpec{1.0, 0.5, BarrierMode::kill, std::nullopt};
    const auto m = record_means(c, 20000, 18);
    for (std::size_t k = 1; k < m.size(); ++k) {
      const double se = std::hypot(m[0].Zt.se(), m[k].Zt.se());
      CHECK(std::abs(m[k].Zt.mean() - m[0].Zt.mean()) <= 3 * se);
      CHECK(m[k].Zt.mean() >= 0);
    }
  }
}

TEST_CASE("truncated W first moment is e^{-x} F(x / sqrt(s))") {
  SimConfig c = free_config(4, {1, 4}, 1.0);
  c.barrier = BarrierSpec{0.0, 0.0, BarrierMode::kill, std::nullopt};
  const auto m = record_means(c, 20000, 14);
  CHECK(within(m[0].Wt, std::exp(-1.0) * F_gauss(1.0)));
  CHECK(within(m[1].Wt, std::exp(-1.0) * F_gauss(0.5)));
}

TEST_CASE("hitting counts") {
  SUBCASE("start on the barrier") {
    HittingConfig h;
    h.x = 0;
    h.windows = {{0, 0}, {0.5, 2}};
    for (int i = 0; i < 5; ++i) {
      const auto s = hitting_counts(h, 15, i);
      CHECK(s.total_count == 1);
      CHECK(s.counts[0] == 1);
      CHECK(s.counts[1] == 0);
      CHECK(s.total_residual == 0);
    }
  }
  SUBCASE("windows must be disjoint") {
    HittingConfig h;
    h.windows = {{0, 1}, {0.5, 2}};
    CHECK_THROWS_AS(hitting_counts(h, 15, 0), ConfigError);
  }
  SUBCASE("mean killed mass from x = 1") {
    HittingConfig h;
    h.windows = {{0, 0.4999999}, {0.5, 2}, {2.0000001, INFINITY}};
    RunningStat total, win;
    for (int i = 0; i < 3000; ++i) {
      const auto s = hitting_counts(h, 16, i);
      const auto e = s.estimate();
      CHECK(e[0] + e[1] + e[2] == doctest::Approx(s.total_estimate()).epsilon(1e-9));
      total.add(s.total_estimate());
      win.add(e[1]);
    }
    CHECK(within(total, std::exp(-1.0)));
    const double p = bm_hit_time_probability(1, 0.5, 2);
    CHECK(within(win, std::exp(-1.0) * p));
  }
}

TEST_CASE("path classification against the line") {
  const double t = 2, a = 2, gamma = 1;
  using Path = std::vector<PathPoint>;
  const Path good{{0, 3}, {2, 2}, {3, 1.5}, {4, 2}, {5, 0.5}};
  const Path dipped{{0, 3}, {2, 2}, {3, 0.5}, {4, 2}, {5, 0.8}};
  const Path never{{0, 3}, {2, 2}, {4, 3}, {5, 4}};
  const Path at_line{{0, 0}, {2, 2}, {4, 0.9}};
  const Path early_dip{{0, 3}, {1, 0.5}, {2, 2}, {4, 2}, {6, 1}};
  auto g = classify_path(good, t, a, gamma);
  REQUIRE(g);
  CHECK(g->classification == HitClass::good);
  CHECK(g->hit_time == 5);
  auto d = classify_path(dipped, t, a, gamma);
  REQUIRE(d);
  CHECK(d->classification == HitClass::bad);
  CHECK_FALSE(classify_path(never, t, a, gamma));
  CHECK(classify_path(at_line, t, a, gamma)->classification == HitClass::bad);
  CHECK(classify_path(early_dip, t, a, gamma)->classification == HitClass::good);
  const auto counts = good_bad_split({good, dipped, never, at_line, early_dip}, t, a, gamma);
  CHECK(counts.good == 2);
  CHECK(counts.bad == 2);
  // a = 1: the monitor interval is the single time t
  const Path drop{{0, 0}, {2, 2}, {3, -1}};
  CHECK(classify_path(drop, t, 1, gamma)->classification == HitClass::good);
  CHECK(classify_path(dipped, t, 1, gamma)->classification == HitClass::good);
  const Path below_at_t{{0, 0}, {2, 0.5}, {3, 2}};
  const auto imm = classify_path(below_at_t, t, 1, gamma);
  REQUIRE(imm);
  CHECK(imm->hit_time == 2);
  CHECK(imm->classification == HitClass::bad);
}

TEST_CASE("engine stopping line at a = 1: only immediate hits are bad") {
  SimConfig c = free_config(12, {12}, 0);
  c.barrier = BarrierSpec{4.0, std::log(4.0), BarrierMode::kill, 4.0};
  std::size_t later = 0, immediate_bad = 0;
  for (int i = 0; i < 200; ++i) {
    const auto r = simulate(c, 17, i);
    const auto split = good_bad_split(r.hits);
    CHECK(split.total() == r.n_hits);
    for (const auto& h : r.hits) {
      CHECK(h.hit_time >= 4.0);
      if (h.hit_time > 4.0) {
        ++later;
        CHECK(h.classification == HitClass::good);
      } else {
        immediate_bad += h.classification == HitClass::bad;
      }
    }
  }
  CHECK(later > 0);
  CHECK(immediate_bad > 0);
}

TEST_CASE("engine stopping line at a = 2: a dip below the line in [t, at] makes later hits bad") {
  SimConfig c = free_config(14, {14}, 0);
  c.barrier = BarrierSpec{8.0, std::log(4.0), BarrierMode::kill, 4.0};
  std::size_t good = 0, bad = 0;
  for (int i = 0; i < 100; ++i) {
    const auto r = simulate(c, 19, i);
    good += r.n_good;
    bad += r.n_hits - r.n_good;
  }
  CHECK(good > 0);
  CHECK(bad > 0);
}
