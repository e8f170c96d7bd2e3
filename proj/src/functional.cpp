#include "bbm/functional.hpp"

#include <algorithm>
#include <sstream>
#include <vector>

#include "bbm/model.hpp"

namespace bbm {

double PathFunctional::operator()(const PathSummary& s) const {
  switch (kind) {
    case FunctionalKind::constant:
      return 1.0;
    case FunctionalKind::path_positive:
      return s.stayed_positive ? 1.0 : 0.0;
    case FunctionalKind::endpoint_below:
      return s.endpoint <= a ? 1.0 : 0.0;
    case FunctionalKind::endpoint_in_range:
      return (s.endpoint >= a && s.endpoint <= b) ? 1.0 : 0.0;
    case FunctionalKind::inverse_endpoint_capped:
      return s.endpoint <= 1.0 ? 1.0 : 1.0 / s.endpoint;
    case FunctionalKind::stopped:
      return s.stopped ? 1.0 : 0.0;
    case FunctionalKind::grid_min_above:
      return s.grid_min > a ? 1.0 : 0.0;
  }
  return 0.0;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string PathFunctional::name() const {
  switch (kind) {
    case FunctionalKind::constant:
      return "constant";
    case FunctionalKind::path_positive:
      return "path_positive";
    case FunctionalKind::endpoint_below:
      return "endpoint_below(" + fmt(a) + ")";
    case FunctionalKind::endpoint_in_range:
      return "endpoint_in_range(" + fmt(a) + "," + fmt(b) + ")";
    case FunctionalKind::inverse_endpoint_capped:
      return "inverse_endpoint_capped";
    case FunctionalKind::stopped:
      return "stopped";
    case FunctionalKind::grid_min_above:
      return "grid_min_above(" + fmt(a) + ")";
  }
  return "unknown";
}

PathFunctional PathFunctional::parse(const std::string& text) {
  std::string head = text, args;
  const auto open = text.find('(');
  if (open != std::string::npos) {
    if (text.back() != ')') throw ConfigError("bad functional: " + text);
    head = text.substr(0, open);
    args = text.substr(open + 1, text.size() - open - 2);
  }
  std::vector<double> vals;
  std::stringstream ss(args);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      vals.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad functional argument in " + text);
    }
  }
  auto need = [&](std::size_t n) {
    if (vals.size() != n) throw ConfigError("functional " + head + " takes " + std::to_string(n) + " arguments");
  };
  PathFunctional f;
  if (head == "constant") {
    need(0);
  } else if (head == "path_positive") {
    need(0);
    f.kind = FunctionalKind::path_positive;
  } else if (head == "endpoint_below") {
    need(1);
    f.kind = FunctionalKind::endpoint_below;
    f.a = vals[0];
  } else if (head == "endpoint_in_range") {
    need(2);
    f.kind = FunctionalKind::endpoint_in_range;
    f.a = vals[0];
    f.b = vals[1];
  } else if (head == "inverse_endpoint_capped") {
    need(0);
    f.kind = FunctionalKind::inverse_endpoint_capped;
  } else if (head == "stopped") {
    need(0);
    f.kind = FunctionalKind::stopped;
  } else if (head == "grid_min_above") {
    need(1);
    f.kind = FunctionalKind::grid_min_above;
    f.a = vals[0];
  } else {
    throw ConfigError("unknown functional: " + text);
  }
  return f;
}

}  // namespace bbm
