// Command-line front end: closed-form throughputs, single-scenario EE and
// delay designs, configuration-driven sweeps, bit-level oracles and the
// analytic strategy comparison.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "edgecache/edgecache.hpp"

namespace {

using nlohmann::json;
using namespace edgecache;

json number_or_inf(const std::optional<double>& x) {
  if (!x) return "inf";
  return *x;
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

struct CommonScenario {
  int k = 8;
  int l = 10;
  std::int64_t n = 1000;
  double mu = 100;
  double mb = 1000;
  double q = 1e7;
  double b = 1e6;
  double gamma = 2e6;
  double eta = 1e-6;
  double noise = 1.0;
  double p_sum_db = 10.0;
  double epsilon = 1e-3;
  int max_iter = 60;
  int candidates = 100;
  std::uint64_t seed = 1;
  std::string strategy = "uncoded_sdr";
  std::string popularity = "uniform";
  double alpha = 0.8;

  void add_to(CLI::App* app, bool with_power) {
    app->add_option("--strategy", strategy, "uncoded_zf | uncoded_sdr | coded_sdr")->capture_default_str();
    app->add_option("--k", k, "users K")->capture_default_str();
    app->add_option("--l", l, "BS antennas L")->capture_default_str();
    app->add_option("--n", n, "library size N (files)")->capture_default_str();
    app->add_option("--mu", mu, "user cache M_u (files)")->capture_default_str();
    app->add_option("--mb", mb, "BS cache M_b (files)")->capture_default_str();
    app->add_option("--q", q, "file size Q (bits)")->capture_default_str();
    app->add_option("--b", b, "bandwidth B (Hz)")->capture_default_str();
    app->add_option("--gamma", gamma, "per-user rate requirement (bit/s)")->capture_default_str();
    app->add_option("--eta", eta, "backhaul pricing (J/bit)")->capture_default_str();
    app->add_option("--noise", noise, "noise power sigma^2")->capture_default_str();
    app->add_option("--candidates", candidates, "Gaussian randomization candidates")->capture_default_str();
    app->add_option("--seed", seed, "channel seed")->capture_default_str();
    app->add_option("--popularity", popularity, "uniform | zipf")->capture_default_str();
    app->add_option("--alpha", alpha, "Zipf exponent")->capture_default_str();
    if (with_power) {
      app->add_option("--p-sum-db", p_sum_db, "transmit power budget (dB)")->capture_default_str();
      app->add_option("--epsilon", epsilon, "bisection tolerance, relative to the bracket")->capture_default_str();
      app->add_option("--max-iter", max_iter, "bisection iteration cap")->capture_default_str();
    }
  }

  ScenarioConfig config(Objective objective) const {
    ScenarioConfig c;
    c.objective = objective;
    c.antennas = l;
    c.library.n_files = n;
    c.library.file_size_bits = std::llround(q);
    c.bandwidth_hz = b;
    c.noise_power = noise;
    c.eta_joules_per_bit = eta;
    c.rate_bps = {gamma};
    c.grid.user_cache_fraction = {mu / static_cast<double>(n)};
    c.grid.bs_cache_fraction = {mb / static_cast<double>(n)};
    c.grid.p_sum_db = {p_sum_db};
    c.grid.users = {k};
    c.strategies = {parse_strategy(strategy)};
    if (popularity == "zipf") {
      c.popularity.kind = PopularityKind::zipf;
      c.popularity.alpha = alpha;
    } else if (popularity != "uniform") {
      throw InvalidArgument("unknown popularity '" + popularity + "' (expected uniform or zipf)");
    }
    c.realizations = 1;
    c.base_seed = seed;
    c.bisection_epsilon = epsilon;
    c.bisection_max_iter = max_iter;
    c.randomization_candidates = candidates;
    c.validate();
    return c;
  }
};

json run_single(const CommonScenario& s, Objective objective) {
  const ScenarioConfig c = s.config(objective);
  const GridPoint g = expand_grid(c.grid).front();
  int redraws = 0;
  const std::uint64_t seed = realization_seed(c, g, 0);
  const ChannelMatrix h = draw_channel(g.users, c.antennas, c.channel_variance, seed, c.max_redraws, redraws);
  const RealizationResult r = evaluate_realization(c, g, c.strategies.front(), h, seed);
  json out;
  out["strategy"] = s.strategy;
  out["objective"] = to_string(objective);
  out["ee_bits_per_joule"] = number_or_inf(r.ee);
  out["tau_seconds"] = r.tau;
  out["access_bits"] = r.access_bits;
  out["backhaul_bits"] = r.backhaul_bits;
  out["total_power"] = r.total_power;
  out["condition_number"] = condition_number(h);
  out["redraws"] = redraws;
  return out;
}

int cmd_throughput(const std::string& strategy, int k, std::int64_t n, double mu, double mb, double q, double alpha,
                   std::int64_t trials, std::uint64_t seed) {
  const LibraryConfig lib{n, std::llround(q)};
  const CacheSizes cache{mb, mu};
  json out;
  out["strategy"] = strategy;
  if (strategy == "uncoded") {
    const auto t = uncoded_throughput(k, cache, lib);
    out["access_bits"] = t.access_bits;
    out["backhaul_bits"] = t.backhaul_bits;
  } else if (strategy == "coded") {
    const auto cp = coded_params(k, cache, lib);
    const auto t = coded_throughput(k, cache, lib);
    out["m"] = cp.m;
    out["delta"] = cp.delta;
    out["access_bits"] = t.access_bits;
    out["backhaul_bits"] = t.backhaul_bits;
  } else if (strategy == "exact") {
    const auto approx = uncoded_throughput(k, cache, lib);
    out["access_bits"] = exact_uncoded_access_throughput(k, cache, lib);
    out["approximate_access_bits"] = approx.access_bits;
    out["method"] = k <= kExactMaxUsers && n <= kExactMaxFiles ? "rational" : "log_domain";
  } else if (strategy == "zipf") {
    require(trials >= 1, "trials must be positive");
    const auto profile = zipf_profile(n, alpha, k);
    const auto placement = make_placement(profile, std::llround(mu), std::llround(mb));
    RunningStat access, backhaul;
    for (std::int64_t t = 0; t < trials; ++t) {
      const auto d = sample_demands(profile, derive_seed(seed, {static_cast<std::uint64_t>(t)}));
      const auto th = nonuniform_throughput(d, placement, lib);
      access.add(th.access_bits);
      backhaul.add(th.backhaul_bits);
    }
    out["alpha"] = alpha;
    out["trials"] = trials;
    out["access_bits"] = access.mean();
    out["backhaul_bits"] = backhaul.mean();
    out["se_access"] = access.std_error();
    out["se_backhaul"] = backhaul.std_error();
  } else {
    throw InvalidArgument("unknown throughput strategy '" + strategy + "' (expected uncoded, coded, exact or zipf)");
  }
  print(out);
  return 0;
}

double z_score(double mean, double expected, double se) {
  if (se > 0.0) return (mean - expected) / se;
  return mean == expected ? 0.0 : std::numeric_limits<double>::infinity();
}

int cmd_oracle(int prop, int k, std::int64_t n, double mu, double mb, double q, std::int64_t trials, std::uint64_t seed,
               double alpha) {
  const LibraryConfig lib{n, std::llround(q)};
  const CacheSizes cache{mb, mu};
  std::ostringstream line;
  bool pass = false;
  if (prop == 1) {
    const auto expected = uncoded_throughput(k, cache, lib);
    const auto est = oracle_uncoded(k, cache, lib, trials, seed);
    const double za = z_score(est.mean.access_bits, expected.access_bits, est.std_error.access_bits);
    const double zb = z_score(est.mean.backhaul_bits, expected.backhaul_bits, est.std_error.backhaul_bits);
    pass = std::abs(za) <= 3.0 && std::abs(zb) <= 3.0;
    line << "prop=1 trials=" << trials << " access_mean=" << est.mean.access_bits << " expected=" << expected.access_bits
         << " z=" << za << " backhaul_mean=" << est.mean.backhaul_bits << " expected=" << expected.backhaul_bits
         << " z=" << zb;
  } else if (prop == 2) {
    const auto expected = coded_throughput(k, cache, lib);
    const auto est = oracle_coded_split(k, cache, lib, trials, seed);
    const bool exact = std::abs(est.mean.access_bits - expected.access_bits) <= 1e-9 * std::max(1.0, expected.access_bits);
    const double zb = z_score(est.mean.backhaul_bits, expected.backhaul_bits, est.std_error.backhaul_bits);
    pass = est.decoded_ok && exact && std::abs(zb) <= 3.0;
    line << "prop=2 trials=" << trials << " access_mean=" << est.mean.access_bits << " expected=" << expected.access_bits
         << " exact=" << (exact ? "yes" : "no") << " decoded=" << (est.decoded_ok ? "yes" : "no")
         << " backhaul_mean=" << est.mean.backhaul_bits << " expected=" << expected.backhaul_bits << " z=" << zb;
  } else if (prop == 3) {
    const auto profile = zipf_profile(n, alpha, k);
    const auto placement = make_placement(profile, std::llround(mu), std::llround(mb));
    std::int64_t mismatches = 0;
    for (std::int64_t t = 0; t < trials; ++t) {
      const auto d = sample_demands(profile, derive_seed(seed, {static_cast<std::uint64_t>(t)}));
      const auto th = nonuniform_throughput(d, placement, lib);
      if (static_cast<double>(active_subset(d, placement).size()) * lib.q() != th.access_bits) ++mismatches;
    }
    pass = mismatches == 0;
    line << "prop=3 trials=" << trials << " alpha=" << alpha << " mismatches=" << mismatches;
  } else {
    throw InvalidArgument("--prop must be 1, 2 or 3");
  }
  std::cout << (pass ? "PASS " : "FAIL ") << line.str() << '\n';
  return pass ? 0 : 1;
}

int cmd_compare(const std::string& regime, int k, double mu, double n, double p_unc, double p_cod, double gamma, double eta) {
  CachingRegime r;
  if (regime == "free_backhaul") r = CachingRegime::free_backhaul;
  else if (regime == "no_bs_cache") r = CachingRegime::no_bs_cache;
  else throw InvalidArgument("unknown regime '" + regime + "' (expected free_backhaul or no_bs_cache)");
  const auto c = analytic_comparison(r, k, mu, n, p_unc, p_cod, gamma, eta);
  json out;
  out["regime"] = regime;
  out["ee_uncoded"] = c.ee_uncoded;
  out["ee_coded"] = c.ee_coded;
  out["winner"] = to_string(c.winner);
  out["threshold_user_cache_files"] = c.threshold_user_cache_files;
  print(out);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_path, int workers, const std::string& echo_path,
              int realizations) {
  std::ifstream in(config_path);
  if (!in) throw InvalidArgument("cannot open config file '" + config_path + "'");
  std::stringstream text;
  text << in.rdbuf();
  ScenarioConfig c = parse_config_text(text.str());
  if (realizations > 0) c.realizations = realizations;
  if (!echo_path.empty()) {
    const std::string dump = to_json(c).dump(2) + "\n";
    if (echo_path == "-") std::cerr << dump;
    else {
      std::ofstream echo(echo_path);
      if (!echo) throw InvalidArgument("cannot write '" + echo_path + "'");
      echo << dump;
    }
  }
  const SweepResult r = run_sweep(c, workers);
  if (r.estimated)
    std::cerr << "warning: subset_cap is active; coded sums are estimates from sampled subsets, not exact\n";
  if (out_path == "-") {
    write_csv(std::cout, r);
  } else {
    std::ofstream out(out_path);
    if (!out) throw InvalidArgument("cannot write '" + out_path + "'");
    write_csv(out, r);
  }
  return 0;
}

void print_error(const char* kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cache-aided multiuser MISO downlink: throughput, energy efficiency and delivery time"};
  app.require_subcommand(1);

  auto* thr = app.add_subcommand("throughput", "closed-form access and backhaul throughputs");
  std::string thr_strategy;
  int thr_k = 0;
  std::int64_t thr_n = 0, thr_trials = 10000;
  double thr_mu = 0, thr_mb = 0, thr_q = 1e7, thr_alpha = 0.8;
  std::uint64_t thr_seed = 1;
  thr->add_option("--strategy", thr_strategy, "uncoded | coded | exact | zipf")->required();
  thr->add_option("--k", thr_k, "users K")->required();
  thr->add_option("--n", thr_n, "library size N (files)")->required();
  thr->add_option("--mu", thr_mu, "user cache M_u (files)")->capture_default_str();
  thr->add_option("--mb", thr_mb, "BS cache M_b (files)")->capture_default_str();
  thr->add_option("--q", thr_q, "file size Q (bits)")->capture_default_str();
  thr->add_option("--alpha", thr_alpha, "Zipf exponent (zipf only)")->capture_default_str();
  thr->add_option("--trials", thr_trials, "demand draws (zipf only)")->capture_default_str();
  thr->add_option("--seed", thr_seed, "demand seed (zipf only)")->capture_default_str();

  CommonScenario ee_args, delay_args;
  auto* ee = app.add_subcommand("ee", "energy efficiency of one channel realization");
  ee_args.add_to(ee, false);
  auto* del = app.add_subcommand("delay", "delivery time of one channel realization");
  delay_args.add_to(del, true);

  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep from a JSON config; CSV output");
  std::string sweep_config, sweep_out = "-", sweep_echo;
  int sweep_workers = 0, sweep_realizations = 0;
  sweep->add_option("--config", sweep_config, "scenario config (JSON)")->required();
  sweep->add_option("--out", sweep_out, "CSV path, '-' for stdout")->capture_default_str();
  sweep->add_option("--workers", sweep_workers, "worker threads (default: EDGECACHE_WORKERS or all cores)");
  sweep->add_option("--echo-config", sweep_echo, "write the resolved config as JSON ('-' for stderr)");
  sweep->add_option("--realizations", sweep_realizations, "override the realization count");

  auto* oracle = app.add_subcommand("oracle", "bit-level simulation checked against the throughput formulas");
  int or_prop = 0, or_k = 4;
  std::int64_t or_n = 10, or_trials = 10000;
  double or_mu = 5, or_mb = 2, or_q = 100, or_alpha = 0.8;
  std::uint64_t or_seed = 1;
  oracle->add_option("--prop", or_prop, "1 uncoded, 2 coded, 3 non-uniform popularity")->required();
  oracle->add_option("--k", or_k, "users K")->capture_default_str();
  oracle->add_option("--n", or_n, "library size N")->capture_default_str();
  oracle->add_option("--mu", or_mu, "user cache M_u (files)")->capture_default_str();
  oracle->add_option("--mb", or_mb, "BS cache M_b (files)")->capture_default_str();
  oracle->add_option("--q", or_q, "file size Q (bits)")->capture_default_str();
  oracle->add_option("--trials", or_trials, "Monte-Carlo trials")->capture_default_str();
  oracle->add_option("--seed", or_seed, "seed")->capture_default_str();
  oracle->add_option("--alpha", or_alpha, "Zipf exponent (prop 3)")->capture_default_str();

  auto* cmp = app.add_subcommand("compare", "closed-form EE comparison of uncoded and coded caching");
  std::string cmp_regime;
  int cmp_k = 8;
  double cmp_mu = 0, cmp_n = 1000, cmp_p_unc = 1, cmp_p_cod = 1, cmp_gamma = 2e6, cmp_eta = 1e-6;
  cmp->add_option("--regime", cmp_regime, "free_backhaul | no_bs_cache")->required();
  cmp->add_option("--k", cmp_k, "users K")->capture_default_str();
  cmp->add_option("--mu", cmp_mu, "user cache M_u (files)")->required();
  cmp->add_option("--n", cmp_n, "library size N")->capture_default_str();
  cmp->add_option("--p-unc", cmp_p_unc, "uncoded transmit power")->capture_default_str();
  cmp->add_option("--p-cod", cmp_p_cod, "coded transmit power")->capture_default_str();
  cmp->add_option("--gamma", cmp_gamma, "common service rate (bit/s)")->capture_default_str();
  cmp->add_option("--eta", cmp_eta, "backhaul pricing (J/bit)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (thr->parsed()) return cmd_throughput(thr_strategy, thr_k, thr_n, thr_mu, thr_mb, thr_q, thr_alpha, thr_trials, thr_seed);
    if (ee->parsed()) {
      print(run_single(ee_args, Objective::ee));
      return 0;
    }
    if (del->parsed()) {
      print(run_single(delay_args, Objective::delay));
      return 0;
    }
    if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_out, sweep_workers, sweep_echo, sweep_realizations);
    if (oracle->parsed()) return cmd_oracle(or_prop, or_k, or_n, or_mu, or_mb, or_q, or_trials, or_seed, or_alpha);
    if (cmp->parsed()) return cmd_compare(cmp_regime, cmp_k, cmp_mu, cmp_n, cmp_p_unc, cmp_p_cod, cmp_gamma, cmp_eta);
  } catch (const edgecache::Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
