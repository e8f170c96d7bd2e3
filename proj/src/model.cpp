#include "bbm/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace bbm {

OffspringLaw::OffspringLaw(std::vector<std::pair<int, double>> pmf, std::string name) : name_(std::move(name)) {
  if (pmf.empty()) throw ConfigError("offspring law: empty pmf");
  std::map<int, double> merged;
  double total = 0;
  for (const auto& [k, p] : pmf) {
    if (k < 0) throw ConfigError("offspring law: negative offspring count " + std::to_string(k));
    if (!(p >= 0) || !std::isfinite(p)) throw ConfigError("offspring law: invalid probability for k=" + std::to_string(k));
    merged[k] += p;
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("offspring law: probabilities sum to " + std::to_string(total));
  double acc = 0;
  for (const auto& [k, p] : merged) {
    if (p == 0) continue;
    const double q = p / total;
    pmf_.emplace_back(k, q);
    acc += q;
    cdf_.push_back(acc);
    mean_ += k * q;
    m2_ += static_cast<double>(k) * k * q;
    if (k > 1) llog3_ += k * std::pow(std::log(static_cast<double>(k)), 3) * q;
  }
  cdf_.back() = 1.0;
}

OffspringLaw OffspringLaw::binary() { return OffspringLaw({{2, 1.0}}, "binary"); }

double OffspringLaw::probability(int k) const {
  for (const auto& [kk, p] : pmf_)
    if (kk == k) return p;
  return 0;
}

int OffspringLaw::sample(Rng& rng) const {
  if (pmf_.size() == 1) return pmf_[0].first;
  const double u = rng.uniform();
  for (std::size_t i = 0; i + 1 < cdf_.size(); ++i)
    if (u < cdf_[i]) return pmf_[i].first;
  return pmf_.back().first;
}

ModelParams normalize_params(const OffspringLaw& offspring) {
  const double m1 = offspring.mean();
  if (!(m1 > 1)) throw ConfigError("offspring mean must exceed 1, got " + std::to_string(m1));
  return {1.0 / (2.0 * (m1 - 1.0)), 1.0, 1.0, m1};
}

double llog3_moment(const OffspringLaw& offspring) { return offspring.llog3(); }

OffspringLaw size_biased(const OffspringLaw& offspring) {
  const double m1 = offspring.mean();
  if (!(m1 > 0)) throw ConfigError("size-biasing needs a positive mean");
  std::vector<std::pair<int, double>> out;
  for (const auto& [k, p] : offspring.pmf())
    if (k > 0) out.emplace_back(k, k * p / m1);
  double total = 0;
  for (const auto& e : out) total += e.second;
  for (auto& e : out) e.second /= total;
  return OffspringLaw(std::move(out), offspring.name().empty() ? "" : offspring.name() + "-sb");
}

void SimConfig::validate() const {
  normalize_params(offspring);
  if (!(dt > 0)) throw ConfigError("dt must be positive");
  if (!(horizon >= 0) || !std::isfinite(horizon)) throw ConfigError("horizon must be finite and non-negative");
  if (!(eps_prune >= 0)) throw ConfigError("eps_prune must be non-negative");
  if (!std::isfinite(start)) throw ConfigError("start position must be finite");
  if (!std::is_sorted(observation_times.begin(), observation_times.end()))
    throw ConfigError("observation times must be sorted");
  for (double t : observation_times)
    if (!(t >= 0 && t <= horizon)) throw ConfigError("observation time outside [0, horizon]");
  if (barrier) {
    if (!std::isfinite(barrier->level)) throw ConfigError("barrier level must be finite");
    if (!(barrier->start >= 0)) throw ConfigError("barrier start must be non-negative");
    if (barrier->monitor_from && !(*barrier->monitor_from >= 0 && *barrier->monitor_from <= barrier->start))
      throw ConfigError("barrier monitor window must lie in [0, start]");
  }
  if (absolute_prune && !barrier) throw ConfigError("absolute pruning needs a barrier");
  if (ceiling && !std::isfinite(*ceiling)) throw ConfigError("ceiling must be finite");
  if (max_particles == 0) throw ConfigError("max_particles must be positive");
}

}  // namespace bbm
