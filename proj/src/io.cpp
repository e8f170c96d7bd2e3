#include "bbm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

namespace bbm {

using nlohmann::ordered_json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void check_keys(const toml::table& t, const std::string& where, const std::set<std::string>& allowed) {
  for (const auto& [k, v] : t) {
    (void)v;
    if (!allowed.count(std::string(k.str())))
      throw ConfigError("schema: unknown key '" + std::string(k.str()) + "' in " + where);
  }
}

double get_double(const toml::table& t, const char* key, double fallback) {
  const auto* n = t.get(key);
  if (!n) return fallback;
  if (auto v = n->value<double>()) return *v;
  throw ConfigError(std::string("schema: '") + key + "' must be a number");
}

std::optional<double> get_opt_double(const toml::table& t, const char* key) {
  const auto* n = t.get(key);
  if (!n) return std::nullopt;
  if (auto v = n->value<double>()) return *v;
  throw ConfigError(std::string("schema: '") + key + "' must be a number");
}

bool get_bool(const toml::table& t, const char* key, bool fallback) {
  const auto* n = t.get(key);
  if (!n) return fallback;
  if (auto v = n->value<bool>()) return *v;
  throw ConfigError(std::string("schema: '") + key + "' must be a boolean");
}

double to_double(const std::string& s) {
  double v = 0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError("not a number: '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError("not an integer: '" + s + "'");
  return v;
}

}  // namespace

OffspringLaw parse_offspring(const std::string& spec) {
  if (spec == "binary") return OffspringLaw::binary();
  std::vector<std::pair<int, double>> pmf;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("offspring entries look like k:p, got '" + item + "'");
    pmf.emplace_back(static_cast<int>(to_u64(item.substr(0, colon))), to_double(item.substr(colon + 1)));
  }
  return OffspringLaw(pmf, spec);
}

SimConfig parse_sim_config(const std::string& text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string("TOML: ") + std::string(e.description()));
  }
  check_keys(root, "root", {"schema_version", "model", "simulation", "barrier"});
  const auto version = root["schema_version"].value<std::int64_t>();
  if (!version) throw ConfigError("schema: schema_version is required");
  if (*version != kSchemaVersion) throw ConfigError("schema: unsupported schema_version " + std::to_string(*version));

  SimConfig c;
  if (const auto* model = root["model"].as_table()) {
    check_keys(*model, "[model]", {"offspring"});
    if (const auto* node = model->get("offspring")) {
      if (auto s = node->value<std::string>()) {
        c.offspring = parse_offspring(*s);
      } else if (const auto* t = node->as_table()) {
        std::vector<std::pair<int, double>> pmf;
        for (const auto& [k, v] : *t) {
          const auto p = v.value<double>();
          if (!p) throw ConfigError("schema: offspring probabilities must be numbers");
          pmf.emplace_back(static_cast<int>(to_u64(std::string(k.str()))), *p);
        }
        c.offspring = OffspringLaw(pmf);
      } else {
        throw ConfigError("schema: offspring must be a string or a table");
      }
    }
  }
  if (const auto* sim = root["simulation"].as_table()) {
    check_keys(*sim, "[simulation]",
               {"horizon", "dt", "start", "eps_prune", "max_particles", "observation_times", "ceiling", "theta",
                "absolute_prune"});
    c.horizon = get_double(*sim, "horizon", c.horizon);
    c.dt = get_double(*sim, "dt", c.dt);
    c.start = get_double(*sim, "start", c.start);
    c.eps_prune = get_double(*sim, "eps_prune", c.eps_prune);
    c.ceiling = get_opt_double(*sim, "ceiling");
    c.theta = get_opt_double(*sim, "theta");
    c.absolute_prune = get_bool(*sim, "absolute_prune", false);
    if (const auto* n = sim->get("max_particles")) {
      const auto v = n->value<std::int64_t>();
      if (!v || *v <= 0) throw ConfigError("schema: max_particles must be a positive integer");
      c.max_particles = static_cast<std::size_t>(*v);
    }
    if (const auto* n = sim->get("observation_times")) {
      const auto* arr = n->as_array();
      if (!arr) throw ConfigError("schema: observation_times must be an array");
      for (const auto& e : *arr) {
        const auto v = e.value<double>();
        if (!v) throw ConfigError("schema: observation_times must hold numbers");
        c.observation_times.push_back(*v);
      }
    }
  }
  if (const auto* bar = root["barrier"].as_table()) {
    check_keys(*bar, "[barrier]", {"start", "level", "mode", "monitor_from"});
    BarrierSpec b;
    b.start = get_double(*bar, "start", 0.0);
    b.level = get_double(*bar, "level", 0.0);
    b.monitor_from = get_opt_double(*bar, "monitor_from");
    const std::string mode = bar->get("mode") ? bar->get("mode")->value<std::string>().value_or("?") : "kill";
    if (mode == "kill")
      b.mode = BarrierMode::kill;
    else if (mode == "flag_only")
      b.mode = BarrierMode::flag_only;
    else
      throw ConfigError("schema: barrier mode must be kill or flag_only");
    c.barrier = b;
  }
  if (!(c.dt > 0) || !(c.horizon >= 0) || !std::isfinite(c.horizon)) throw ConfigError("schema: need dt > 0 and a finite horizon >= 0");
  if (c.observation_times.empty()) {
    // default grid: every dt up to the horizon
    const auto steps = static_cast<std::size_t>(std::floor(c.horizon / c.dt + 1e-9));
    for (std::size_t k = 0; k <= steps; ++k) c.observation_times.push_back(static_cast<double>(k) * c.dt);
    if (c.observation_times.back() < c.horizon - 1e-12) c.observation_times.push_back(c.horizon);
  }
  c.validate();
  return c;
}

SimConfig load_sim_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_sim_config(ss.str());
}

void write_records_header(std::ostream& os) {
  os << "replicate,seed,t,W,Z,W_tilde,Z_tilde,alive,frozen_W,frozen_Z\n";
}

void write_records_csv(std::ostream& os, const ReplicateResult& r) {
  for (const auto& rec : r.records) {
    os << r.replicate << ',' << r.seed << ',' << fmt17(rec.time) << ',' << fmt17(rec.W) << ',' << fmt17(rec.Z) << ','
       << fmt17(rec.W_tilde) << ',' << fmt17(rec.Z_tilde) << ',' << rec.alive << ',' << fmt17(rec.frozen_W) << ','
       << fmt17(rec.frozen_Z) << '\n';
  }
}

std::vector<ReplicateResult> read_records_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("replicate,seed,t,W,Z", 0) != 0)
    throw ConfigError("records CSV: missing header");
  std::vector<ReplicateResult> out;
  std::vector<std::string> f;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    f.clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw ConfigError("records CSV: expected 10 columns");
    const std::uint64_t rep = to_u64(f[0]), seed = to_u64(f[1]);
    if (out.empty() || out.back().replicate != rep || out.back().seed != seed) {
      out.emplace_back();
      out.back().replicate = rep;
      out.back().seed = seed;
    }
    out.back().records.push_back({to_double(f[2]), to_double(f[3]), to_double(f[4]), std::nullopt, to_double(f[5]),
                                  to_double(f[6]), static_cast<std::size_t>(to_u64(f[7])), to_double(f[8]),
                                  to_double(f[9])});
  }
  return out;
}

void write_hits_jsonl(std::ostream& os, const ReplicateResult& r) {
  for (const auto& h : r.hits)
    os << "{\"replicate\":" << r.replicate << ",\"hit_time\":" << fmt17(h.hit_time) << ",\"class\":\""
       << (h.classification == HitClass::good ? "good" : "bad") << "\"}\n";
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ordered_json to_json(const RunManifest& m) {
  return {{"subcommand", m.subcommand},
          {"config_hash", hex64(m.config_hash)},
          {"master_seed", m.master_seed},
          {"replicate_first", m.replicate_first},
          {"replicate_count", m.replicate_count},
          {"outputs", m.outputs},
          {"version", m.version}};
}

namespace {

ordered_json interval(const Interval& i) { return ordered_json::array({i.lo, i.hi}); }

}  // namespace

ordered_json to_json(const ZinfErrorBudget& b) {
  ordered_json fit = ordered_json::array();
  for (const auto& r : b.fit) fit.push_back({{"t", r.t}, {"delta", r.delta}, {"C", r.C}});
  return {{"p", b.p}, {"C", b.C}, {"delta", b.delta}, {"fit", fit}};
}

ordered_json to_json(const TailTable& t) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"x", r.x}, {"exceed", r.exceed}, {"value", r.value}, {"ci", interval(r.ci)}});
  return {{"window", {t.window.lo, t.window.hi}}, {"n", t.n}, {"band", {t.band_lo, t.band_hi}},
          {"rows", rows}, {"pass", t.pass}};
}

ordered_json to_json(const MuZEstimate& m) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : m.rows) rows.push_back({{"x", r.x}, {"c", r.c}, {"c_truncated", r.c_truncated}});
  return {{"window", {m.window.lo, m.window.hi}},
          {"c_Z_hat", m.c_hat},
          {"c_Z_se", m.c_se},
          {"mu_Z_hat", m.mu_hat},
          {"slope", m.slope},
          {"plateau", m.plateau},
          {"c_truncated", m.c_truncated},
          {"rows", rows}};
}

ordered_json to_json(const EcfComparison& e) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : e.rows)
    rows.push_back({{"lambda1", r.lambda1},
                    {"lambda2", r.lambda2},
                    {"ecf", {r.ecf.real(), r.ecf.imag()}},
                    {"target", {r.target.real(), r.target.imag()}},
                    {"distance", r.distance},
                    {"ci", interval(r.ci)}});
  return {{"n", e.n},
          {"sup_distance", e.sup_distance},
          {"sup_ci", interval(e.sup_ci)},
          {"noise_floor", e.noise_floor},
          {"rows", rows}};
}

namespace {

ordered_json prob_row(const ProbabilityRow& r) {
  return {{"t", r.t}, {"delta", r.delta}, {"exceed", r.exceed}, {"n", r.n}, {"p_hat", r.p_hat}, {"ci", interval(r.ci)}};
}

}  // namespace

ordered_json to_json(const WtReport& w) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : w.rows) rows.push_back(prob_row(r));
  return {{"theta", w.theta}, {"rows", rows}, {"pass", w.non_increasing}};
}

ordered_json to_json(const SpeedReport& s) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : s.rows) {
    auto j = prob_row(r.cell);
    j["C_hat"] = r.C_hat;
    rows.push_back(j);
  }
  return {{"rows", rows},
          {"C_max", s.C_max},
          {"kendall_tau", s.kendall.tau},
          {"kendall_p_increasing", s.kendall.p_increasing},
          {"pass", s.pass}};
}

ordered_json to_json(const NGoodReport& n) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : n.rows)
    rows.push_back({{"t", r.t},
                    {"a", r.a},
                    {"n", r.n},
                    {"median_ratio", r.median_ratio},
                    {"ratio_ci", interval(r.ratio_ci)},
                    {"median_gap", r.median_gap},
                    {"bad_fraction", r.bad_fraction},
                    {"residual_fraction", r.residual_fraction}});
  return {{"rows", rows}, {"ratio_trend", n.ratio_trend}, {"bad_trend", n.bad_trend},
          {"pass", n.ratio_trend && n.bad_trend}};
}

void write_text(const std::filesystem::path& path, const std::string& text, bool overwrite) {
  if (!overwrite && std::filesystem::exists(path))
    throw ConfigError("output path exists: " + path.string() + " (pass --overwrite to replace)");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string dump_json(const ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace bbm
