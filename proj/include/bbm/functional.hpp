#pragma once

#include <string>

namespace bbm {

// What a bounded path functional may look at.
struct PathSummary {
  double endpoint = 0;
  bool stayed_positive = true;  // continuous-time minimum > 0
  bool stopped = false;         // absorbed at 0 before the horizon
  double grid_min = 0;          // minimum over the sampled grid points
};

enum class FunctionalKind {
  constant,
  path_positive,
  endpoint_below,           // endpoint <= a
  endpoint_in_range,        // a <= endpoint <= b
  inverse_endpoint_capped,  // min(1, 1 / endpoint)
  stopped,
  grid_min_above,           // grid minimum > a
};

struct PathFunctional {
  FunctionalKind kind = FunctionalKind::constant;
  double a = 0;
  double b = 0;

  double operator()(const PathSummary& s) const;
  std::string name() const;
  // Parses the names produced by name(), e.g. "endpoint_in_range(0,1)".
  static PathFunctional parse(const std::string& text);
};

}  // namespace bbm
