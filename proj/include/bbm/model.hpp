#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bbm/rng.hpp"

namespace bbm {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Finite-support reproduction law. Probabilities are checked to 1e-12 and
// renormalized; entries are sorted by k with duplicates merged.
class OffspringLaw {
 public:
  OffspringLaw(std::vector<std::pair<int, double>> pmf, std::string name = "");

  static OffspringLaw binary();

  const std::vector<std::pair<int, double>>& pmf() const { return pmf_; }
  const std::string& name() const { return name_; }
  double mean() const { return mean_; }
  double second_moment() const { return m2_; }
  double llog3() const { return llog3_; }
  double probability(int k) const;
  int max_offspring() const { return pmf_.back().first; }

  int sample(Rng& rng) const;

 private:
  std::vector<std::pair<int, double>> pmf_;
  std::vector<double> cdf_;
  std::string name_;
  double mean_ = 0;
  double m2_ = 0;
  double llog3_ = 0;
};

struct ModelParams {
  double lambda;
  double sigma2;
  double rho;
  double m1;
};

ModelParams normalize_params(const OffspringLaw& offspring);
double llog3_moment(const OffspringLaw& offspring);
OffspringLaw size_biased(const OffspringLaw& offspring);

enum class BarrierMode { kill, flag_only };

// Barrier at `level` switched on at time `start`. When `monitor_from` is set
// (and < start), hits are classified good only if the path stayed strictly
// above `level` on [monitor_from, start].
struct BarrierSpec {
  double start = 0;
  double level = 0;
  BarrierMode mode = BarrierMode::kill;
  std::optional<double> monitor_from;
};

struct SimConfig {
  OffspringLaw offspring = OffspringLaw::binary();
  std::vector<double> observation_times;
  double horizon = 1;
  double dt = 0.5;
  double start = 0;
  double eps_prune = 0;
  std::optional<BarrierSpec> barrier;
  std::size_t max_particles = 10'000'000;
  // Position ceiling: particles above it are frozen like pruned ones.
  std::optional<double> ceiling;
  std::optional<double> theta;
  // Hitting-count runs prune on e^{-(X - level)} < eps_prune instead of the
  // relative rule, with the expected future hits booked as a residual.
  bool absolute_prune = false;
  bool keep_hits = true;
  // Record frozen particles and the survivors at the horizon.
  bool keep_unresolved = false;

  void validate() const;
};

}  // namespace bbm
