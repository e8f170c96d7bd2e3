#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "bbm/model.hpp"
#include "bbm/rng.hpp"

namespace bbm {

struct PopulationExplosion : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum ParticleFlag : std::uint32_t {
  kLineOk = 1u,   // has not yet hit the active barrier
  kWatchOk = 2u,  // stayed strictly above the level over the monitor window
};

struct Particle {
  double x;
  double next_branch;
  double t;  // time at which x is current
  std::uint64_t id;
  std::uint32_t flags;
};

struct FrozenMass {
  double W = 0;
  double Z = 0;
  double W_theta = 0;
  double W_tilde = 0;
  double Z_tilde = 0;
  double expected_hits = 0;  // sum of e^{-(X - level)} over frozen particles still on the line
};

struct UnresolvedParticle {
  double time;
  double x;
  bool line_ok;
  bool watch_ok = true;
};

struct PopulationState {
  std::vector<Particle> particles;
  FrozenMass frozen;
  std::vector<UnresolvedParticle> frozen_log;  // filled only when requested
  bool log_frozen = false;
};

struct MartingaleRecord {
  double time;
  double W;
  double Z;
  std::optional<double> W_theta;
  double W_tilde;
  double Z_tilde;
  std::size_t alive;
  double frozen_W;
  double frozen_Z;
};

enum class HitClass { good, bad };

struct StoppingLineRecord {
  double hit_time;
  HitClass classification;
  std::uint64_t particle;
};

struct ReplicateResult {
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  std::vector<MartingaleRecord> records;
  std::vector<StoppingLineRecord> hits;
  std::size_t n_hits = 0;
  std::size_t n_good = 0;
  FrozenMass frozen;
  std::vector<UnresolvedParticle> frozen_particles;
  std::vector<UnresolvedParticle> survivors;
  std::optional<MartingaleRecord> pre_line;  // full population just before the barrier activates
  std::size_t peak_alive = 0;
  bool extinct = false;
};

// Exact probability that a Brownian bridge (unit variance) from x1 to x2 over
// time dt touches gamma.
double bridge_hit_probability(double x1, double x2, double dt, double gamma);

// First passage time of gamma by a Brownian bridge from x1 > gamma at time t0
// to x2 at time t0 + h, conditional on a passage occurring.
double sample_bridge_hit_time(double x1, double x2, double t0, double h, double gamma, Rng& rng);

// Inverse Gaussian draw (Michael-Schucany-Haas); mean = +inf gives the Levy law.
double sample_inverse_gaussian(double mean, double shape, Rng& rng);

// Freezes particles with e^{-X}(1+|X|) < eps / alive, or with
// e^{-(X - level)} < eps when `absolute` is set, and any particle above
// `ceiling`.
void prune_and_freeze(PopulationState& state, double eps, double time, const std::optional<BarrierSpec>& barrier,
                      std::optional<double> theta, bool absolute = false,
                      std::optional<double> ceiling = std::nullopt);

ReplicateResult simulate(const SimConfig& config, std::uint64_t seed, std::uint64_t replicate = 0);

struct GoodBadCounts {
  std::size_t good = 0;
  std::size_t bad = 0;
  std::size_t total() const { return good + bad; }
};

GoodBadCounts good_bad_split(std::span<const StoppingLineRecord> hits);

struct PathPoint {
  double time;
  double x;
};

// Classifies sampled paths against the line (a*t, gamma). A path hits at the
// first sample with time >= a*t and x <= gamma; it is good iff every sample
// in [t, a*t] is strictly above gamma. At a = 1 only immediate hits at t can
// be bad.
std::optional<StoppingLineRecord> classify_path(std::span<const PathPoint> path, double t, double a, double gamma,
                                                std::uint64_t id = 0);
GoodBadCounts good_bad_split(const std::vector<std::vector<PathPoint>>& paths, double t, double a, double gamma);

struct HitWindow {
  double lo;
  double hi;
};

struct HittingConfig {
  OffspringLaw offspring = OffspringLaw::binary();
  double x = 1;
  std::vector<HitWindow> windows;
  double horizon = 50;
  double dt = 0.5;
  double eps = 1e-4;
  double residual_budget = 0.05;
  std::size_t max_particles = 10'000'000;
};

struct HitCountSample {
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  std::vector<std::uint64_t> counts;   // realized hits per window
  std::vector<double> residual;        // expected hits per window from frozen and surviving particles
  std::uint64_t total_count = 0;       // hits on [0, inf)
  double total_residual = 0;
  std::vector<double> estimate() const;  // counts + residual
  double total_estimate() const { return static_cast<double>(total_count) + total_residual; }
  bool cutoff = false;  // residual mass exceeded the budget
};

HitCountSample hitting_counts(const HittingConfig& config, std::uint64_t seed, std::uint64_t replicate = 0);

// P(driftless BM from x > 0 hits 0 within time u).
double bm_hit_cdf(double x, double u);

}  // namespace bbm
