#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bbm/bessel.hpp"
#include "bbm/engine.hpp"
#include "bbm/harness.hpp"
#include "bbm/io.hpp"
#include "bbm/parallel.hpp"
#include "bbm/spine.hpp"
#include "bbm/stable.hpp"
#include "bbm/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace bbm;

namespace {

struct Global {
  std::string out;
  std::string run_name;
  bool overwrite = false;
  unsigned threads = 0;
};

// Collects the files of one run and writes them with the manifest.
class Run {
 public:
  Run(const Global& g, const CLI::App& sub, std::string config_text, std::uint64_t seed, std::uint64_t first,
      std::uint64_t count)
      : g_(g) {
    manifest_.subcommand = sub.get_name();
    manifest_.master_seed = seed;
    manifest_.replicate_first = first;
    manifest_.replicate_count = count;
    std::string canon = sub.get_name() + "\n" + config_text + "\n";
    for (const CLI::Option* o : sub.get_options()) {
      const std::string name = o->get_name();
      if (name == "--help" || name == "--threads" || name == "--out" || name == "--overwrite" || name == "--run-name")
        continue;
      canon += name + "=";
      for (const auto& r : o->results()) canon += r + ",";
      canon += "|" + o->get_default_str() + ";";
    }
    manifest_.config_hash = fnv1a64(canon);
    dir_ = fs::path(g.out) / (g.run_name.empty() ? sub.get_name() : g.run_name);
    if (!g.overwrite && fs::exists(dir_ / "manifest.json"))
      throw ConfigError("output directory already holds a run: " + dir_.string() + " (pass --overwrite)");
  }

  void file(const std::string& name, const std::string& text) {
    if (std::find(manifest_.outputs.begin(), manifest_.outputs.end(), name) != manifest_.outputs.end())
      throw ConfigError("output path collision: " + name);
    write_text(dir_ / name, text, g_.overwrite);
    manifest_.outputs.push_back(name);
  }

  void finish() { write_text(dir_ / "manifest.json", dump_json(to_json(manifest_)), g_.overwrite); }
  const fs::path& dir() const { return dir_; }

 private:
  const Global& g_;
  RunManifest manifest_;
  fs::path dir_;
};

std::string read_file(const std::string& path) {
  if (path.empty()) return "";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SimConfig with_observations(SimConfig c, const std::vector<double>& times, double horizon) {
  c.horizon = horizon;
  for (double t : times) c.observation_times.push_back(t);
  c.observation_times.push_back(horizon);
  auto& o = c.observation_times;
  o.erase(std::remove_if(o.begin(), o.end(), [&](double t) { return t > horizon + 1e-12; }), o.end());
  std::sort(o.begin(), o.end());
  o.erase(std::unique(o.begin(), o.end(), [](double a, double b) { return std::abs(a - b) <= 1e-9; }), o.end());
  c.validate();
  return c;
}

std::string records_csv(const std::vector<ReplicateResult>& runs) {
  std::ostringstream os;
  write_records_header(os);
  for (const auto& r : runs) write_records_csv(os, r);
  return os.str();
}

std::vector<ReplicateResult> load_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read records " + path);
  return read_records_csv(in);
}

struct ZinfRow {
  std::uint64_t replicate, seed;
  double zinf, frozen_Z;
};

std::vector<ZinfRow> load_zinf(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("replicate,seed,zinf", 0) != 0) throw ConfigError("zinf CSV: bad header");
  std::vector<ZinfRow> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, c, d;
    std::getline(ls, a, ',');
    std::getline(ls, b, ',');
    std::getline(ls, c, ',');
    std::getline(ls, d, ',');
    out.push_back({std::stoull(a), std::stoull(b), std::stod(c), d.empty() ? 0.0 : std::stod(d)});
  }
  return out;
}

std::string zinf_csv(const std::vector<ReplicateResult>& runs, double T) {
  std::ostringstream os;
  os << "replicate,seed,zinf,frozen_Z\n";
  for (const auto& r : runs) {
    const auto& rec = record_at(r, T);
    os << r.replicate << ',' << r.seed << ',' << fmt17(rec.Z) << ',' << fmt17(rec.frozen_Z) << '\n';
  }
  return os.str();
}

std::vector<double> lambda_grid(double lo, double hi, std::size_t points) {
  std::vector<double> v(points);
  for (std::size_t i = 0; i < points; ++i)
    v[i] = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return v;
}

Window parse_window(const std::vector<double>& w) {
  if (w.size() != 2) throw ConfigError("a window needs two numbers lo,hi");
  return {w[0], w[1]};
}

// Shared options for experiments that either simulate a pool or reuse a records file.
struct PoolOptions {
  std::string config;
  std::string records;
  std::uint64_t seed = 1;
  std::uint64_t first = 0;
  std::uint64_t replicates = 1000;
  double T = 64;

  void add(CLI::App* s, double default_T) {
    T = default_T;
    s->add_option("--config", config, "simulation TOML (model and pruning)")->check(CLI::ExistingFile);
    s->add_option("--records", records, "reuse a records CSV instead of simulating")->check(CLI::ExistingFile);
    s->add_option("--seed", seed, "master seed");
    s->add_option("--first", first, "first replicate index");
    s->add_option("--replicates", replicates, "number of replicates");
    s->add_option("--T", T, "proxy horizon")->capture_default_str();
  }

  std::vector<ReplicateResult> obtain(const Global& g, const std::vector<double>& times, std::string& config_text) {
    if (!records.empty()) {
      config_text = read_file(records);
      return load_records(records);
    }
    config_text = read_file(config);
    SimConfig c = config.empty() ? SimConfig{} : parse_sim_config(config_text);
    if (config.empty()) c.observation_times.clear();
    std::vector<double> all = times;
    for (double t : zinf_fit_times(T)) all.push_back(t);
    c = with_observations(c, all, T);
    return run_pool(c, SeedPool{"pool", seed, first, replicates}, g.threads);
  }
};

int fail_if(bool failed) { return failed ? 1 : 0; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branching Brownian motion fluctuation experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  if (const char* env = std::getenv(kOutputDirEnv)) g.out = env;
  if (g.out.empty()) g.out = ".";
  app.add_option("--out", g.out, std::string("output directory (default $") + kOutputDirEnv + " or .)");
  app.add_option("--run-name", g.run_name, "subdirectory for this run (default: subcommand name)");
  app.add_flag("--overwrite", g.overwrite, "replace an existing run directory");
  app.add_option("--threads", g.threads, "worker threads, 0 = all cores");

  // simulate
  auto* s_sim = app.add_subcommand("simulate", "run BBM replicates and write martingale records");
  std::string sim_config;
  std::uint64_t sim_seed = 1, sim_first = 0, sim_reps = 1;
  s_sim->add_option("--config", sim_config, "simulation TOML")->required()->check(CLI::ExistingFile);
  s_sim->add_option("--seed", sim_seed, "master seed");
  s_sim->add_option("--first", sim_first, "first replicate index");
  s_sim->add_option("--replicates", sim_reps, "number of replicates");

  // hitting
  auto* s_hit = app.add_subcommand("hitting", "stopping-line hit counts for a kill barrier at 0");
  HittingConfig hc;
  std::string hit_law = "binary";
  std::vector<std::vector<double>> hit_windows;
  std::uint64_t hit_seed = 1, hit_reps = 10000;
  s_hit->add_option("--x", hc.x, "start position")->capture_default_str();
  s_hit->add_option("--window", hit_windows, "time window lo,hi (repeatable)")->delimiter(',')->allow_extra_args(false);
  s_hit->add_option("--offspring", hit_law, "binary or k:p,k:p")->capture_default_str();
  s_hit->add_option("--horizon", hc.horizon, "simulated time")->capture_default_str();
  s_hit->add_option("--dt", hc.dt, "grid step")->capture_default_str();
  s_hit->add_option("--eps", hc.eps, "absolute freezing threshold")->capture_default_str();
  s_hit->add_option("--seed", hit_seed, "master seed");
  s_hit->add_option("--replicates", hit_reps, "number of replicates")->capture_default_str();

  // spine-check
  auto* s_spine = app.add_subcommand("spine-check", "many-to-one cross-check between spine and direct estimators");
  std::string sp_measure = "Q", sp_functional = "constant", sp_law = "binary";
  double sp_x = 1, sp_s = 1;
  std::size_t sp_nd = 20000, sp_ns = 100000;
  std::uint64_t sp_seed = 1;
  s_spine->add_option("--measure", sp_measure, "Q, Qtilde or Q0")->capture_default_str();
  s_spine->add_option("--functional", sp_functional, "e.g. path_positive, endpoint_in_range(0,1)")->capture_default_str();
  s_spine->add_option("--offspring", sp_law, "binary or k:p,k:p")->capture_default_str();
  s_spine->add_option("--x", sp_x, "start position")->capture_default_str();
  s_spine->add_option("--s", sp_s, "time horizon")->capture_default_str();
  s_spine->add_option("--n-direct", sp_nd, "direct replicates")->capture_default_str();
  s_spine->add_option("--n-spine", sp_ns, "spine paths")->capture_default_str();
  s_spine->add_option("--seed", sp_seed, "direct seed; the spine uses seed + 1");

  // stable tools
  double st_sigma = 1, st_mu = 0;
  auto* s_ss = app.add_subcommand("stable-sample", "draws from S_1(sigma, mu)");
  std::size_t ss_n = 1000;
  std::uint64_t ss_seed = 1;
  s_ss->add_option("--sigma", st_sigma, "scale")->capture_default_str();
  s_ss->add_option("--mu", st_mu, "shift")->capture_default_str();
  s_ss->add_option("--n", ss_n, "number of draws")->capture_default_str();
  s_ss->add_option("--seed", ss_seed, "master seed");

  auto* s_cf = app.add_subcommand("stable-cf", "characteristic function grid");
  double cf_lmax = 5, cf_t = 1;
  std::size_t cf_points = 101;
  s_cf->add_option("--sigma", st_sigma, "scale")->capture_default_str();
  s_cf->add_option("--mu", st_mu, "shift")->capture_default_str();
  s_cf->add_option("--t", cf_t, "process time")->capture_default_str();
  s_cf->add_option("--lambda-max", cf_lmax, "grid spans [-max, max]")->capture_default_str();
  s_cf->add_option("--points", cf_points, "grid points")->capture_default_str();

  auto* s_cdf = app.add_subcommand("stable-cdf", "CDF by characteristic-function inversion");
  double cdf_lo = -5, cdf_hi = 20;
  std::size_t cdf_points = 101;
  s_cdf->add_option("--sigma", st_sigma, "scale")->capture_default_str();
  s_cdf->add_option("--mu", st_mu, "shift")->capture_default_str();
  s_cdf->add_option("--x-min", cdf_lo, "grid start")->capture_default_str();
  s_cdf->add_option("--x-max", cdf_hi, "grid end")->capture_default_str();
  s_cdf->add_option("--points", cdf_points, "grid points")->capture_default_str();

  // bessel-check
  auto* s_bes = app.add_subcommand("bessel-check", "Bessel-3 versus killed Brownian motion cross-check");
  double be_x = 1, be_t = 1;
  std::string be_functional = "constant";
  std::size_t be_n = 100000, be_steps = 64;
  std::uint64_t be_seed = 1;
  s_bes->add_option("--x", be_x, "start position")->capture_default_str();
  s_bes->add_option("--t", be_t, "time")->capture_default_str();
  s_bes->add_option("--functional", be_functional, "path functional")->capture_default_str();
  s_bes->add_option("--n", be_n, "Monte Carlo paths per side")->capture_default_str();
  s_bes->add_option("--steps", be_steps, "grid steps")->capture_default_str();
  s_bes->add_option("--seed", be_seed, "master seed");

  // tail
  auto* s_tail = app.add_subcommand("tail", "tail of the Z_inf proxy");
  PoolOptions tail_pool;
  tail_pool.add(s_tail, 30);
  std::vector<double> tail_window{5, 30};
  double tail_budget = 1e-3;
  s_tail->add_option("--window", tail_window, "x window lo,hi")->delimiter(',')->expected(2);
  s_tail->add_option("--frozen-budget", tail_budget, "allowed frozen fraction of median |Z_T|")->capture_default_str();

  // mu-z
  auto* s_mu = app.add_subcommand("mu-z", "estimate c_Z and mu_Z from Z_inf proxies");
  std::string mu_zinf;
  std::vector<double> mu_window{5, 50};
  std::size_t mu_points = 16;
  s_mu->add_option("--zinf", mu_zinf, "zinf CSV from the tail subcommand")->required()->check(CLI::ExistingFile);
  s_mu->add_option("--window", mu_window, "x window lo,hi")->delimiter(',')->expected(2);
  s_mu->add_option("--points", mu_points, "grid points")->capture_default_str();

  // fluctuation
  auto* s_fl = app.add_subcommand("fluctuation", "fluctuation statistics against the mixed stable target");
  PoolOptions fl_pool;
  fl_pool.add(s_fl, 64);
  std::vector<double> fl_ts{8, 16}, fl_as{1}, fl_joint{1, 2};
  std::string fl_zinf, fl_muz_file;
  double fl_muz = std::nan("");
  double fl_lmax = 3;
  std::size_t fl_points = 30, fl_boot = 200;
  s_fl->add_option("--t", fl_ts, "t grid")->delimiter(',');
  s_fl->add_option("--a", fl_as, "a grid")->delimiter(',');
  s_fl->add_option("--joint-a", fl_joint, "a1,a2 for the joint check at the smallest t")->delimiter(',')->expected(2);
  s_fl->add_option("--zinf", fl_zinf, "zinf CSV for the target mixing (independent pool)")->required()->check(CLI::ExistingFile);
  s_fl->add_option("--mu-z", fl_muz, "mu_Z value");
  s_fl->add_option("--mu-z-file", fl_muz_file, "mu_z.json from the mu-z subcommand")->check(CLI::ExistingFile);
  s_fl->add_option("--lambda-max", fl_lmax, "largest frequency")->capture_default_str();
  s_fl->add_option("--points", fl_points, "frequencies in (0, max]")->capture_default_str();
  s_fl->add_option("--bootstrap", fl_boot, "bootstrap resamples")->capture_default_str();

  // speed-bound
  auto* s_sp = app.add_subcommand("speed-bound", "fitted constants for P(|Z_inf - Z_t| >= delta)");
  PoolOptions sp_pool;
  sp_pool.add(s_sp, 64);
  std::vector<double> sp_ts{4, 8, 16}, sp_deltas{0.1, 0.5, 1};
  double sp_theta = 0.1;
  s_sp->add_option("--t", sp_ts, "t grid")->delimiter(',');
  s_sp->add_option("--delta", sp_deltas, "delta grid")->delimiter(',');
  s_sp->add_option("--theta", sp_theta, "exponent for the W_t convergence table")->capture_default_str();

  // ngood
  auto* s_ng = app.add_subcommand("ngood", "good stopping-line hits against sqrt(t) W_at");
  NGoodConfig ngc;
  std::vector<double> ng_ts{8, 16}, ng_as{1, 2};
  std::uint64_t ng_seed = 1, ng_first = 0, ng_reps = 200;
  double ng_beta = std::nan("");
  s_ng->add_option("--t", ng_ts, "t grid")->delimiter(',');
  s_ng->add_option("--a", ng_as, "a grid")->delimiter(',');
  s_ng->add_option("--beta", ng_beta, "pinned beta (default log(t)/2)");
  s_ng->add_option("--eps", ngc.eps, "absolute freezing threshold")->capture_default_str();
  s_ng->add_option("--dt", ngc.dt, "grid step")->capture_default_str();
  s_ng->add_option("--extra-time", ngc.extra_time, "time simulated after the line starts")->capture_default_str();
  s_ng->add_option("--seed", ng_seed, "master seed");
  s_ng->add_option("--first", ng_first, "first replicate index");
  s_ng->add_option("--replicates", ng_reps, "replicates per (t, a)")->capture_default_str();

  // report
  auto* s_rep = app.add_subcommand("report", "collect pass flags of all runs below the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (s_sim->parsed()) {
      const std::string text = read_file(sim_config);
      const SimConfig c = parse_sim_config(text);
      Run run(g, *s_sim, text, sim_seed, sim_first, sim_reps);
      const auto runs = run_pool(c, SeedPool{"simulate", sim_seed, sim_first, sim_reps}, g.threads);
      run.file("records.csv", records_csv(runs));
      if (c.barrier) {
        std::ostringstream os;
        for (const auto& r : runs) write_hits_jsonl(os, r);
        run.file("hits.jsonl", os.str());
      }
      run.finish();
      return 0;
    }

    if (s_hit->parsed()) {
      hc.offspring = parse_offspring(hit_law);
      for (const auto& w : hit_windows) hc.windows.push_back({parse_window(w).lo, parse_window(w).hi});
      Run run(g, *s_hit, "", hit_seed, 0, hit_reps);
      const auto samples =
          parallel_map(hit_reps, g.threads, [&](std::size_t i) { return hitting_counts(hc, hit_seed, i); });
      std::ostringstream csv;
      csv << "replicate,seed,window_lo,window_hi,count,residual\n";
      RunningStat total;
      std::vector<RunningStat> win(hc.windows.size());
      std::size_t cutoffs = 0;
      for (const auto& s : samples) {
        csv << s.replicate << ',' << s.seed << ",0,inf," << s.total_count << ',' << fmt17(s.total_residual) << '\n';
        for (std::size_t w = 0; w < hc.windows.size(); ++w) {
          csv << s.replicate << ',' << s.seed << ',' << fmt17(hc.windows[w].lo) << ',' << fmt17(hc.windows[w].hi) << ','
              << s.counts[w] << ',' << fmt17(s.residual[w]) << '\n';
          win[w].add(s.estimate()[w]);
        }
        total.add(s.total_estimate());
        cutoffs += s.cutoff;
      }
      const double oracle = std::exp(-hc.x);
      bool pass = std::abs(total.mean() - oracle) <= 3 * total.se();
      ordered_json windows = ordered_json::array();
      for (std::size_t w = 0; w < hc.windows.size(); ++w) {
        const double o = hc.x > 0 ? oracle * bm_hit_time_probability(hc.x, hc.windows[w].lo, hc.windows[w].hi) : 0.0;
        const bool ok = std::abs(win[w].mean() - o) <= 3 * win[w].se();
        pass = pass && ok;
        windows.push_back({{"lo", hc.windows[w].lo}, {"hi", hc.windows[w].hi}, {"mean", win[w].mean()},
                           {"se", win[w].se()}, {"oracle", o}, {"pass", ok}});
      }
      ordered_json j{{"x", hc.x},
                     {"replicates", hit_reps},
                     {"total", {{"mean", total.mean()}, {"se", total.se()}, {"oracle", oracle}}},
                     {"windows", windows},
                     {"cutoffs", cutoffs},
                     {"pass", pass}};
      run.file("hitting.csv", csv.str());
      run.file("hitting.json", dump_json(j));
      run.finish();
      return fail_if(!pass);
    }

    if (s_spine->parsed()) {
      const OffspringLaw law = parse_offspring(sp_law);
      const SpineMeasure m = parse_spine_measure(sp_measure);
      const PathFunctional h = PathFunctional::parse(sp_functional);
      Run run(g, *s_spine, "", sp_seed, 0, sp_nd);
      const auto rep = many_to_one_check(law, m, sp_x, sp_s, h, sp_nd, sp_ns, sp_seed, sp_seed + 1, g.threads);
      const auto est = spine_expectation(law, m, sp_x, sp_s, h, sp_ns, sp_seed + 1, true);
      const auto d = spine_diagnostics(est, law, m, sp_s);
      const bool diag_ok = d.rate_p > 0.01 && d.offspring_p > 0.01 && d.counts_p > 0.01;
      ordered_json j{{"functional", rep.functional},
                     {"measure", to_string(m)},
                     {"x", rep.x},
                     {"s", rep.s},
                     {"direct", rep.direct},
                     {"direct_se", rep.direct_se},
                     {"spine", rep.spine},
                     {"spine_se", rep.spine_se},
                     {"se", rep.se},
                     {"variance_blowup", rep.variance_blowup},
                     {"diagnostics",
                      {{"rate", d.rate},
                       {"observed_rate", d.observed_rate},
                       {"rate_p", d.rate_p},
                       {"mean_inter_event", d.mean_inter_event},
                       {"mean_inter_event_se", d.mean_inter_event_se},
                       {"counts_p", d.counts_p},
                       {"offspring_p", d.offspring_p},
                       {"events", d.events}}},
                     {"pass", rep.pass && diag_ok}};
      run.file("spine.json", dump_json(j));
      run.finish();
      return fail_if(!(rep.pass && diag_ok));
    }

    if (s_ss->parsed()) {
      Run run(g, *s_ss, "", ss_seed, 0, ss_n);
      std::ostringstream os;
      os << "x\n";
      Rng rng(ss_seed, 0);
      for (std::size_t i = 0; i < ss_n; ++i) os << fmt17(sample_stable({st_sigma, st_mu}, rng)) << '\n';
      run.file("samples.csv", os.str());
      run.finish();
      return 0;
    }

    if (s_cf->parsed()) {
      if (!(st_sigma > 0) || cf_points < 1) throw ConfigError("stable-cf needs sigma > 0 and points >= 1");
      Run run(g, *s_cf, "", 0, 0, 0);
      const auto grid = cf_grid({st_sigma, st_mu}, cf_t, lambda_grid(-cf_lmax, cf_lmax, cf_points));
      std::ostringstream os;
      os << "lambda,re,im\n";
      for (std::size_t i = 0; i < grid.lambdas.size(); ++i)
        os << fmt17(grid.lambdas[i]) << ',' << fmt17(grid.values[i].real()) << ',' << fmt17(grid.values[i].imag())
           << '\n';
      run.file("cf.csv", os.str());
      run.finish();
      return 0;
    }

    if (s_cdf->parsed()) {
      if (!(st_sigma > 0)) throw ConfigError("stable-cdf needs sigma > 0");
      Run run(g, *s_cdf, "", 0, 0, 0);
      const auto xs = lambda_grid(cdf_lo, cdf_hi, cdf_points);
      const auto clamped = cdf_grid({st_sigma, st_mu}, xs);
      std::ostringstream os;
      os << "x,cdf,error_bound\n";
      for (std::size_t i = 0; i < xs.size(); ++i)
        os << fmt17(xs[i]) << ',' << fmt17(clamped[i]) << ','
           << fmt17(cdf_by_inversion({st_sigma, st_mu}, xs[i]).error_bound) << '\n';
      run.file("cdf.csv", os.str());
      run.finish();
      return 0;
    }

    if (s_bes->parsed()) {
      Run run(g, *s_bes, "", be_seed, 0, be_n);
      const auto rep = imhof_check(be_x, be_t, PathFunctional::parse(be_functional), be_n, be_seed, be_steps);
      ordered_json norms = ordered_json::array();
      bool norm_ok = true;
      for (double x : {0.0, 0.5, 1.0, 5.0})
        for (double t : {0.25, 1.0, 4.0}) {
          const double mass = bessel3_cdf(x, t, x + 40 * std::sqrt(t));
          norm_ok = norm_ok && std::abs(mass - 1) <= 1e-6;
          norms.push_back({{"x", x}, {"t", t}, {"mass", mass}});
        }
      ordered_json j{{"functional", be_functional},
                     {"x", be_x},
                     {"t", be_t},
                     {"lhs", rep.lhs},
                     {"lhs_se", rep.lhs_se},
                     {"rhs", rep.rhs},
                     {"rhs_se", rep.rhs_se},
                     {"se", rep.combined_se},
                     {"variance_blowup", rep.variance_blowup},
                     {"density_mass", norms},
                     {"pass", rep.pass && norm_ok}};
      run.file("bessel.json", dump_json(j));
      run.finish();
      return fail_if(!(rep.pass && norm_ok));
    }

    if (s_tail->parsed()) {
      std::string text;
      Run run(g, *s_tail, read_file(tail_pool.config) + read_file(tail_pool.records), tail_pool.seed,
              tail_pool.first, tail_pool.replicates);
      const auto runs = tail_pool.obtain(g, {}, text);
      const SeedPool pool{"tail", tail_pool.seed, tail_pool.first, runs.size()};
      const auto z = zinf_from_runs(runs, tail_pool.T, pool, tail_budget);
      const auto tab = tail_check(z.values(), parse_window(tail_window));
      std::ostringstream csv;
      csv << "x,exceed,value,ci_lo,ci_hi\n";
      for (const auto& r : tab.rows)
        csv << fmt17(r.x) << ',' << r.exceed << ',' << fmt17(r.value) << ',' << fmt17(r.ci.lo) << ','
            << fmt17(r.ci.hi) << '\n';
      const bool pass = tab.pass && !z.budget_exceeded();
      ordered_json j{{"T", tail_pool.T},
                     {"n", z.size()},
                     {"median", z.median()},
                     {"positive_fraction", z.positive_fraction()},
                     {"frozen_fraction", z.frozen_fraction()},
                     {"frozen_budget", tail_budget},
                     {"budget_exceeded", z.budget_exceeded()},
                     {"error_budget", to_json(z.error_budget())},
                     {"tail", to_json(tab)},
                     {"pass", pass}};
      if (tail_pool.records.empty()) run.file("records.csv", records_csv(runs));
      run.file("zinf.csv", zinf_csv(runs, tail_pool.T));
      run.file("tail.csv", csv.str());
      run.file("tail.json", dump_json(j));
      run.finish();
      return fail_if(!pass);
    }

    if (s_mu->parsed()) {
      const auto rows = load_zinf(mu_zinf);
      std::vector<double> z;
      for (const auto& r : rows) z.push_back(r.zinf);
      Run run(g, *s_mu, read_file(mu_zinf), 0, 0, z.size());
      const auto est = estimate_mu_Z(z, parse_window(mu_window), mu_points);
      std::ostringstream csv;
      csv << "x,c,c_truncated\n";
      for (const auto& r : est.rows) csv << fmt17(r.x) << ',' << fmt17(r.c) << ',' << fmt17(r.c_truncated) << '\n';
      auto j = to_json(est);
      j["pass"] = est.plateau;
      run.file("mu_z.csv", csv.str());
      run.file("mu_z.json", dump_json(j));
      run.finish();
      return fail_if(!est.plateau);
    }

    if (s_fl->parsed()) {
      double mu = fl_muz, mu_se = 0;
      if (!fl_muz_file.empty()) {
        const auto j = nlohmann::json::parse(read_file(fl_muz_file));
        mu = j.at("mu_Z_hat").get<double>();
        mu_se = j.at("c_Z_se").get<double>();
      }
      if (std::isnan(mu)) throw ConfigError("fluctuation needs --mu-z or --mu-z-file");
      const auto zrows = load_zinf(fl_zinf);
      std::vector<double> ztarget;
      std::set<std::pair<std::uint64_t, std::uint64_t>> target_streams;
      for (const auto& r : zrows) {
        ztarget.push_back(r.zinf);
        target_streams.insert({r.seed, r.replicate});
      }
      std::vector<double> times;
      for (double t : fl_ts)
        for (double a : fl_as) times.push_back(a * t);
      const double t0 = *std::min_element(fl_ts.begin(), fl_ts.end());
      for (double a : fl_joint) times.push_back(a * t0);
      for (double t : fl_ts) times.push_back(t);
      Run run(g, *s_fl, read_file(fl_pool.config) + read_file(fl_pool.records) + read_file(fl_zinf), fl_pool.seed,
              fl_pool.first, fl_pool.replicates);
      if (fl_pool.records.empty()) {
        for (std::uint64_t i = 0; i < fl_pool.replicates; ++i)
          if (target_streams.count({fl_pool.seed, fl_pool.first + i}))
            throw SeedPoolOverlap("fluctuation pool shares replicate streams with the Z_inf target pool");
      }
      std::string text;
      const auto runs = fl_pool.obtain(g, times, text);
      for (const auto& r : runs)
        if (target_streams.count({r.seed, r.replicate}))
          throw SeedPoolOverlap("fluctuation pool shares replicate streams with the Z_inf target pool");

      const auto samples = fluctuation_statistics(runs, fl_ts, fl_as, fl_pool.T);
      double coupling_err = 0;
      std::ostringstream csv;
      csv << "replicate,t,a,Z_at,W_at,zinf,theorem,bis\n";
      for (const auto& s : samples) {
        coupling_err = std::max(coupling_err, std::abs((s.theorem - s.bis) - coupling_gap(s)) /
                                                  std::max(1.0, std::abs(s.theorem) + std::abs(s.bis)));
        csv << s.replicate << ',' << fmt17(s.t) << ',' << fmt17(s.a) << ',' << fmt17(s.Z_at) << ','
            << fmt17(s.W_at) << ',' << fmt17(s.zinf) << ',' << fmt17(s.theorem) << ',' << fmt17(s.bis) << '\n';
      }
      const bool coupling_ok = coupling_err <= 1e-12;
      const auto lambdas = lambda_grid(fl_lmax / static_cast<double>(fl_points), fl_lmax, fl_points);
      std::ostringstream ecsv;
      ecsv << "t,a,lambda1,lambda2,ecf_re,ecf_im,target_re,target_im,distance,ci_lo,ci_hi\n";
      auto emit = [&](double t, double a, const EcfComparison& e) {
        for (const auto& r : e.rows)
          ecsv << fmt17(t) << ',' << fmt17(a) << ',' << fmt17(r.lambda1) << ',' << fmt17(r.lambda2) << ','
               << fmt17(r.ecf.real()) << ',' << fmt17(r.ecf.imag()) << ',' << fmt17(r.target.real()) << ','
               << fmt17(r.target.imag()) << ',' << fmt17(r.distance) << ',' << fmt17(r.ci.lo) << ','
               << fmt17(r.ci.hi) << '\n';
      };
      ordered_json marg = ordered_json::array();
      bool trend_ok = true;
      for (double a : fl_as) {
        double prev = std::numeric_limits<double>::infinity();
        for (double t : fl_ts) {
          const auto x = select_statistic(samples, t, a);
          const auto e = ecf_compare(x, mixed_stable_target_cf(ztarget, a, lambdas, mu), fl_boot);
          emit(t, a, e);
          const double lo = ecf_compare(x, mixed_stable_target_cf(ztarget, a, lambdas, mu - 1.96 * mu_se), 0).sup_distance;
          const double hi = ecf_compare(x, mixed_stable_target_cf(ztarget, a, lambdas, mu + 1.96 * mu_se), 0).sup_distance;
          trend_ok = trend_ok && e.sup_distance <= prev;
          prev = e.sup_distance;
          auto j = to_json(e);
          j.erase("rows");
          j["t"] = t;
          j["a"] = a;
          j["sensitivity"] = {lo, hi};
          marg.push_back(j);
        }
      }
      // joint check on (a1, a2) at the smallest t
      ordered_json joint;
      {
        const double a1 = std::min(fl_joint[0], fl_joint[1]), a2 = std::max(fl_joint[0], fl_joint[1]);
        std::vector<double> x1, x2;
        for (const auto& r : runs) {
          const double zinf = record_at(r, fl_pool.T).Z;
          const auto& r1 = record_at(r, a1 * t0);
          const auto& r2 = record_at(r, a2 * t0);
          x1.push_back(fluctuation_point(t0, a1, r1.Z, r1.W, zinf).theorem);
          x2.push_back(fluctuation_point(t0, a2, r2.Z, r2.W, zinf).theorem);
        }
        std::vector<std::pair<double, double>> pairs;
        std::vector<cplx> target;
        for (double l1 : {0.25, 0.5, 1.0})
          for (double l2 : {-0.5, 0.25, 0.5, 1.0}) {
            pairs.emplace_back(l1, l2);
            target.push_back(mixed_stable_target_pair(ztarget, a1, a2, l1, l2, mu));
          }
        const auto e = ecf_compare_joint(x1, x2, pairs, target, fl_boot);
        emit(t0, -1, e);
        joint = to_json(e);
        joint["t"] = t0;
        joint["a"] = {a1, a2};
        const auto m2 = ecf_compare(x2, mixed_stable_target_cf(ztarget, a2, lambdas, mu), fl_boot);
        joint["marginal_a2"] = {{"sup_distance", m2.sup_distance}, {"sup_ci", {m2.sup_ci.lo, m2.sup_ci.hi}}};
      }
      const bool pass = coupling_ok && trend_ok;
      ordered_json j{{"T", fl_pool.T},
                     {"n", runs.size()},
                     {"mu_Z", mu},
                     {"mu_Z_se", mu_se},
                     {"coupling_max_error", coupling_err},
                     {"coupling_pass", coupling_ok},
                     {"marginals", marg},
                     {"ecf_non_increasing", trend_ok},
                     {"joint", joint},
                     {"pass", pass}};
      if (fl_pool.records.empty()) run.file("records.csv", records_csv(runs));
      run.file("fluctuation.csv", csv.str());
      run.file("ecf.csv", ecsv.str());
      run.file("fluctuation.json", dump_json(j));
      run.finish();
      return fail_if(!pass);
    }

    if (s_sp->parsed()) {
      std::string text;
      std::vector<double> times = sp_ts;
      Run run(g, *s_sp, read_file(sp_pool.config) + read_file(sp_pool.records), sp_pool.seed, sp_pool.first,
              sp_pool.replicates);
      const auto runs = sp_pool.obtain(g, times, text);
      const auto rep = speed_bound_check(runs, sp_ts, sp_deltas, sp_pool.T);
      const auto wt = wt_convergence_check(runs, sp_ts, sp_theta, sp_pool.T);
      std::ostringstream csv;
      csv << "t,delta,exceed,n,p_hat,ci_lo,ci_hi,C_hat\n";
      for (const auto& r : rep.rows)
        csv << fmt17(r.cell.t) << ',' << fmt17(r.cell.delta) << ',' << r.cell.exceed << ',' << r.cell.n << ','
            << fmt17(r.cell.p_hat) << ',' << fmt17(r.cell.ci.lo) << ',' << fmt17(r.cell.ci.hi) << ','
            << fmt17(r.C_hat) << '\n';
      auto j = to_json(rep);
      j["wt_convergence"] = to_json(wt);
      if (sp_pool.records.empty()) run.file("records.csv", records_csv(runs));
      run.file("speed.csv", csv.str());
      run.file("speed.json", dump_json(j));
      run.finish();
      return fail_if(!rep.pass);
    }

    if (s_ng->parsed()) {
      if (!std::isnan(ng_beta)) ngc.beta = ng_beta;
      Run run(g, *s_ng, "", ng_seed, ng_first, ng_reps);
      const auto samples = run_ngood(ngc, ng_ts, ng_as, SeedPool{"ngood", ng_seed, ng_first, ng_reps}, g.threads);
      const auto rep = n_good_scaling_check(samples);
      std::ostringstream csv;
      csv << "replicate,t,a,beta,good,bad,residual_good,residual_bad,residual_early,lhs,rhs\n";
      for (const auto& s : samples)
        csv << s.replicate << ',' << fmt17(s.t) << ',' << fmt17(s.a) << ',' << fmt17(s.beta) << ',' << s.good << ','
            << s.bad << ',' << fmt17(s.residual_good) << ',' << fmt17(s.residual_bad) << ','
            << fmt17(s.residual_early) << ',' << fmt17(s.lhs) << ',' << fmt17(s.rhs) << '\n';
      run.file("ngood.csv", csv.str());
      run.file("ngood.json", dump_json(to_json(rep)));
      run.finish();
      return fail_if(!(rep.ratio_trend && rep.bad_trend));
    }

    if (s_rep->parsed()) {
      ordered_json runs = ordered_json::array();
      bool all = true;
      std::vector<fs::path> files;
      if (fs::exists(g.out))
        for (const auto& e : fs::recursive_directory_iterator(g.out))
          if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename() != "manifest.json" &&
              e.path().filename() != "report.json")
            files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        const auto j = nlohmann::json::parse(read_file(f.string()));
        if (!j.is_object() || !j.contains("pass")) continue;
        const bool p = j["pass"].get<bool>();
        all = all && p;
        runs.push_back({{"file", fs::relative(f, g.out).generic_string()}, {"pass", p}});
      }
      write_text(fs::path(g.out) / "report.json", dump_json({{"runs", runs}, {"pass", all}}), true);
      std::cout << (all ? "all runs passed" : "some runs failed") << " (" << runs.size() << " reports)\n";
      return fail_if(!all);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const PopulationExplosion& e) {
    std::cerr << "population guard: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
