#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bbm/functional.hpp"
#include "bbm/model.hpp"
#include "bbm/rng.hpp"

namespace bbm {

// Q: driftless BM spine. Qtilde: Bessel-3 spine. Q0: BM spine stopped at 0.
enum class SpineMeasure { Q, Qtilde, Q0 };

std::string to_string(SpineMeasure m);
SpineMeasure parse_spine_measure(const std::string& s);

struct SpineBranchEvent {
  double time;
  int offspring;
  int spine_child;
};

struct SpineRealization {
  std::vector<double> times;  // path sample times (event times and the horizon)
  std::vector<double> path;
  std::vector<SpineBranchEvent> events;
  std::vector<double> off_spine_births;  // birth positions of non-spine children
  PathSummary summary;
};

// One spine path on [0, s]. Branch events arrive at rate m1 * lambda with
// size-biased offspring counts and a uniformly chosen spine child.
SpineRealization sample_spine(const OffspringLaw& law, SpineMeasure m, double x, double s, Rng& rng);

struct SpineEstimate {
  double estimate = 0;
  double se = 0;
  std::size_t n = 0;
  // diagnostics pooled over all spines
  std::size_t branch_events = 0;
  double exposure = 0;                          // total spine time able to branch
  std::vector<std::size_t> events_per_spine;    // filled when diagnostics are kept
  std::vector<std::size_t> offspring_counts;    // indexed by k
  // exposure / events, the censored-data estimate of the mean inter-event time
  double mean_inter_event() const;
  double mean_inter_event_se() const;
};

// e^{-x} E[H] (Q, Q0) or x e^{-x} E[H] (Qtilde) over n spines.
SpineEstimate spine_expectation(const OffspringLaw& law, SpineMeasure m, double x, double s, const PathFunctional& h,
                                std::size_t n, std::uint64_t seed, bool keep_diagnostics = false);
SpineEstimate spine_expectation_Q(const OffspringLaw& law, double x, double s, const PathFunctional& h, std::size_t n,
                                  std::uint64_t seed);
SpineEstimate spine_expectation_Qtilde(const OffspringLaw& law, double x, double s, const PathFunctional& h,
                                       std::size_t n, std::uint64_t seed);
SpineEstimate spine_expectation_Q0(const OffspringLaw& law, double x, double s, const PathFunctional& h, std::size_t n,
                                   std::uint64_t seed);

struct SpineDiagnostics {
  double rate = 0;           // m1 lambda
  double observed_rate = 0;  // events / exposure
  double rate_z = 0;
  double rate_p = 0;         // two-sided Poisson-count z test
  double mean_inter_event = 0;
  double mean_inter_event_se = 0;
  double counts_p = 1;       // per-spine event counts against Poisson(rate s); Q and Qtilde only
  double offspring_p = 0;    // chi-square against the size-biased law
  std::size_t events = 0;
};

// Needs an estimate computed with keep_diagnostics.
SpineDiagnostics spine_diagnostics(const SpineEstimate& e, const OffspringLaw& law, SpineMeasure m, double s);

struct DirectEstimate {
  double estimate = 0;
  double se = 0;
  std::size_t n = 0;
};

// The matching sum over particles from the branching engine: weights e^{-X}
// (Q, Q0, with stopped particles weighted 1) or X e^{-X} on the surviving
// line (Qtilde).
DirectEstimate direct_expectation(const OffspringLaw& law, SpineMeasure m, double x, double s, const PathFunctional& h,
                                  std::size_t n, std::uint64_t seed, unsigned threads = 1);

struct ManyToOneReport {
  std::string functional;
  SpineMeasure measure = SpineMeasure::Q;
  double x = 0;
  double s = 0;
  double direct = 0;
  double direct_se = 0;
  double spine = 0;
  double spine_se = 0;
  double se = 0;  // combined
  bool pass = false;
  bool variance_blowup = false;
};

ManyToOneReport many_to_one_check(const OffspringLaw& law, SpineMeasure m, double x, double s, const PathFunctional& h,
                                  std::size_t n_direct, std::size_t n_spine, std::uint64_t direct_seed,
                                  std::uint64_t spine_seed, unsigned threads = 1);

}  // namespace bbm
