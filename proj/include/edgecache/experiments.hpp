#pragma once

// Configuration-driven Monte-Carlo sweeps over cache sizes, power budgets and
// user counts. Every (grid point, realization) pair draws its channel from a
// seed derived from indices only, so results do not depend on the number of
// worker threads or their scheduling.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "edgecache/cache_model.hpp"
#include "edgecache/delay.hpp"
#include "edgecache/energy.hpp"
#include "edgecache/error.hpp"
#include "edgecache/popularity.hpp"
#include "edgecache/random.hpp"
#include "edgecache/wireless.hpp"

namespace edgecache {

enum class Strategy { uncoded_zf, uncoded_sdr, coded_sdr };
enum class Objective { ee, delay };
enum class PopularityKind { uniform, zipf, custom };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::uncoded_zf: return "uncoded_zf";
    case Strategy::uncoded_sdr: return "uncoded_sdr";
    case Strategy::coded_sdr: return "coded_sdr";
  }
  return "unknown";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "uncoded_zf") return Strategy::uncoded_zf;
  if (s == "uncoded_sdr") return Strategy::uncoded_sdr;
  if (s == "coded_sdr") return Strategy::coded_sdr;
  throw InvalidArgument("unknown strategy '" + s + "' (expected uncoded_zf, uncoded_sdr or coded_sdr)");
}

inline const char* to_string(Objective o) { return o == Objective::ee ? "ee" : "delay"; }

inline Objective parse_objective(const std::string& s) {
  if (s == "ee") return Objective::ee;
  if (s == "delay") return Objective::delay;
  throw InvalidArgument("unknown objective '" + s + "' (expected ee or delay)");
}

struct PopularitySpec {
  PopularityKind kind = PopularityKind::uniform;
  double alpha = 0.0;
  std::vector<std::vector<double>> probabilities;  // custom: one vector for everyone or one per user
};

struct GridSpec {
  std::vector<double> user_cache_fraction{0.1};  // M_u/N
  std::vector<double> bs_cache_fraction{1.0};    // M_b/N
  std::vector<double> p_sum_db{10.0};            // P_sum in dB relative to the noise unit
  std::vector<int> users{8};                     // K
};

struct ScenarioConfig {
  std::string name = "scenario";
  Objective objective = Objective::ee;
  int antennas = 10;  // L
  LibraryConfig library;
  double bandwidth_hz = 1e6;
  double noise_power = 1.0;
  double eta_joules_per_bit = 1e-6;
  std::vector<double> rate_bps{2e6};  // gamma; a single value applies to every user
  double channel_variance = 1.0;
  GridSpec grid;
  std::vector<Strategy> strategies{Strategy::uncoded_sdr, Strategy::coded_sdr};
  PopularitySpec popularity;
  int realizations = 50;
  std::uint64_t base_seed = 1;
  bool common_random_numbers = false;  // same channels at every grid point
  double bisection_epsilon = 1e-3;
  int bisection_max_iter = 60;
  int randomization_candidates = 100;
  int max_redraws = 10;
  int subset_cap = 0;  // 0 solves every coded subset

  void validate() const {
    require(antennas >= 1, "antennas must be positive");
    library.validate();
    require(bandwidth_hz > 0.0 && noise_power > 0.0, "bandwidth and noise power must be positive");
    require(eta_joules_per_bit >= 0.0, "eta must be nonnegative");
    require(!rate_bps.empty(), "rate_bps must not be empty");
    for (double g : rate_bps) require(std::isfinite(g) && g > 0.0, "rates must be positive");
    require(channel_variance > 0.0, "channel variance must be positive");
    require(!grid.user_cache_fraction.empty() && !grid.bs_cache_fraction.empty() && !grid.p_sum_db.empty() &&
                !grid.users.empty(),
            "grids must be nonempty");
    for (double x : grid.user_cache_fraction) require(x >= 0.0 && x <= 1.0, "user cache fractions must lie in [0, 1]");
    for (double x : grid.bs_cache_fraction) require(x >= 0.0 && x <= 1.0, "BS cache fractions must lie in [0, 1]");
    for (double x : grid.p_sum_db) require(std::isfinite(x), "power budgets must be finite");
    for (int k : grid.users) {
      validate_users(k);
      require(k <= antennas, "every user count must satisfy K <= L");
      require(rate_bps.size() == 1 || static_cast<int>(rate_bps.size()) == k, "rate_bps needs one entry or one per user");
    }
    require(!strategies.empty(), "at least one strategy is required");
    require(realizations >= 1, "realizations must be at least 1");
    require(bisection_epsilon > 0.0 && bisection_max_iter >= 1, "invalid bisection settings");
    require(randomization_candidates >= 0, "randomization candidates must be nonnegative");
    require(max_redraws >= 0 && subset_cap >= 0, "redraw and subset caps must be nonnegative");
    if (popularity.kind != PopularityKind::uniform)
      for (Strategy s : strategies)
        require(s != Strategy::coded_sdr, "coded caching is only defined for uniform popularity");
    if (popularity.kind == PopularityKind::zipf) require(popularity.alpha >= 0.0, "Zipf exponent must be nonnegative");
    if (popularity.kind == PopularityKind::custom) {
      require(!popularity.probabilities.empty(), "custom popularity needs probabilities");
      for (const auto& q : popularity.probabilities)
        require(static_cast<std::int64_t>(q.size()) == library.n_files, "custom popularity vectors must have N entries");
      for (int k : grid.users)
        require(popularity.probabilities.size() == 1 || static_cast<int>(popularity.probabilities.size()) == k,
                "custom popularity needs one vector or one per user");
    }
  }

  std::vector<double> rates_for(int users) const {
    if (rate_bps.size() == 1) return std::vector<double>(static_cast<std::size_t>(users), rate_bps.front());
    return rate_bps;
  }

  PopularityProfile profile_for(int users) const {
    switch (popularity.kind) {
      case PopularityKind::uniform: return uniform_profile(library.n_files, users);
      case PopularityKind::zipf: return zipf_profile(library.n_files, popularity.alpha, users);
      case PopularityKind::custom: {
        if (popularity.probabilities.size() == 1)
          return custom_profile(std::vector<std::vector<double>>(static_cast<std::size_t>(users), popularity.probabilities.front()));
        return custom_profile(popularity.probabilities);
      }
    }
    throw InvalidArgument("unknown popularity kind");
  }
};

// ---------------------------------------------------------------------------
// JSON configuration with strict key checking.

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  require(j.is_object(), where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw InvalidArgument("unknown key '" + key + "' in " + where);
}

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("bad value for '" + key + "': " + e.what());
  }
}

template <class T>
std::vector<T> scalar_or_list(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (v.is_array()) return get_as<std::vector<T>>(j, key);
  return {get_as<T>(j, key)};
}

}  // namespace detail

inline ScenarioConfig parse_config(const nlohmann::json& j) {
  using detail::get_as;
  using detail::scalar_or_list;
  detail::check_keys(j,
                     {"name", "objective", "antennas", "n_files", "file_size_bits", "bandwidth_hz", "noise_power",
                      "eta_joules_per_bit", "rate_bps", "channel_variance", "grid", "strategies", "popularity",
                      "realizations", "base_seed", "common_random_numbers", "bisection", "randomization_candidates",
                      "max_redraws", "subset_cap"},
                     "config");
  ScenarioConfig c;
  if (j.contains("name")) c.name = get_as<std::string>(j, "name");
  if (j.contains("objective")) c.objective = parse_objective(get_as<std::string>(j, "objective"));
  if (j.contains("antennas")) c.antennas = get_as<int>(j, "antennas");
  if (j.contains("n_files")) c.library.n_files = get_as<std::int64_t>(j, "n_files");
  if (j.contains("file_size_bits")) c.library.file_size_bits = static_cast<std::int64_t>(get_as<double>(j, "file_size_bits"));
  if (j.contains("bandwidth_hz")) c.bandwidth_hz = get_as<double>(j, "bandwidth_hz");
  if (j.contains("noise_power")) c.noise_power = get_as<double>(j, "noise_power");
  if (j.contains("eta_joules_per_bit")) c.eta_joules_per_bit = get_as<double>(j, "eta_joules_per_bit");
  if (j.contains("rate_bps")) c.rate_bps = scalar_or_list<double>(j, "rate_bps");
  if (j.contains("channel_variance")) c.channel_variance = get_as<double>(j, "channel_variance");
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::check_keys(g, {"user_cache_fraction", "bs_cache_fraction", "p_sum_db", "users"}, "grid");
    if (g.contains("user_cache_fraction")) c.grid.user_cache_fraction = scalar_or_list<double>(g, "user_cache_fraction");
    if (g.contains("bs_cache_fraction")) c.grid.bs_cache_fraction = scalar_or_list<double>(g, "bs_cache_fraction");
    if (g.contains("p_sum_db")) c.grid.p_sum_db = scalar_or_list<double>(g, "p_sum_db");
    if (g.contains("users")) c.grid.users = scalar_or_list<int>(g, "users");
  }
  if (j.contains("strategies")) {
    c.strategies.clear();
    for (const auto& s : scalar_or_list<std::string>(j, "strategies")) c.strategies.push_back(parse_strategy(s));
  }
  if (j.contains("popularity")) {
    const auto& p = j.at("popularity");
    detail::check_keys(p, {"kind", "alpha", "probabilities"}, "popularity");
    const auto kind = p.contains("kind") ? get_as<std::string>(p, "kind") : std::string("uniform");
    if (kind == "uniform") c.popularity.kind = PopularityKind::uniform;
    else if (kind == "zipf") c.popularity.kind = PopularityKind::zipf;
    else if (kind == "custom") c.popularity.kind = PopularityKind::custom;
    else throw InvalidArgument("unknown popularity kind '" + kind + "' (expected uniform, zipf or custom)");
    if (p.contains("alpha")) c.popularity.alpha = get_as<double>(p, "alpha");
    if (p.contains("probabilities")) {
      const auto& pr = p.at("probabilities");
      if (pr.is_array() && !pr.empty() && pr.front().is_array())
        c.popularity.probabilities = get_as<std::vector<std::vector<double>>>(p, "probabilities");
      else
        c.popularity.probabilities = {get_as<std::vector<double>>(p, "probabilities")};
    }
  }
  if (j.contains("realizations")) c.realizations = get_as<int>(j, "realizations");
  if (j.contains("base_seed")) c.base_seed = get_as<std::uint64_t>(j, "base_seed");
  if (j.contains("common_random_numbers")) c.common_random_numbers = get_as<bool>(j, "common_random_numbers");
  if (j.contains("bisection")) {
    const auto& b = j.at("bisection");
    detail::check_keys(b, {"epsilon", "max_iter"}, "bisection");
    if (b.contains("epsilon")) c.bisection_epsilon = get_as<double>(b, "epsilon");
    if (b.contains("max_iter")) c.bisection_max_iter = get_as<int>(b, "max_iter");
  }
  if (j.contains("randomization_candidates")) c.randomization_candidates = get_as<int>(j, "randomization_candidates");
  if (j.contains("max_redraws")) c.max_redraws = get_as<int>(j, "max_redraws");
  if (j.contains("subset_cap")) c.subset_cap = get_as<int>(j, "subset_cap");
  c.validate();
  return c;
}

inline ScenarioConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Fully resolved configuration, defaults included.
inline nlohmann::json to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["objective"] = to_string(c.objective);
  j["antennas"] = c.antennas;
  j["n_files"] = c.library.n_files;
  j["file_size_bits"] = c.library.file_size_bits;
  j["bandwidth_hz"] = c.bandwidth_hz;
  j["noise_power"] = c.noise_power;
  j["eta_joules_per_bit"] = c.eta_joules_per_bit;
  j["rate_bps"] = c.rate_bps;
  j["channel_variance"] = c.channel_variance;
  j["grid"] = {{"user_cache_fraction", c.grid.user_cache_fraction},
               {"bs_cache_fraction", c.grid.bs_cache_fraction},
               {"p_sum_db", c.grid.p_sum_db},
               {"users", c.grid.users}};
  std::vector<std::string> s;
  for (Strategy x : c.strategies) s.emplace_back(to_string(x));
  j["strategies"] = s;
  nlohmann::json p;
  p["kind"] = c.popularity.kind == PopularityKind::uniform ? "uniform" : c.popularity.kind == PopularityKind::zipf ? "zipf" : "custom";
  if (c.popularity.kind == PopularityKind::zipf) p["alpha"] = c.popularity.alpha;
  if (c.popularity.kind == PopularityKind::custom) p["probabilities"] = c.popularity.probabilities;
  j["popularity"] = p;
  j["realizations"] = c.realizations;
  j["base_seed"] = c.base_seed;
  j["common_random_numbers"] = c.common_random_numbers;
  j["bisection"] = {{"epsilon", c.bisection_epsilon}, {"max_iter", c.bisection_max_iter}};
  j["randomization_candidates"] = c.randomization_candidates;
  j["max_redraws"] = c.max_redraws;
  j["subset_cap"] = c.subset_cap;
  return j;
}

// ---------------------------------------------------------------------------
// Grid expansion and per-realization evaluation.

struct GridPoint {
  std::size_t index = 0;
  double user_cache_fraction = 0.0;
  double bs_cache_fraction = 0.0;
  double p_sum_db = 0.0;
  int users = 0;

  double p_sum() const { return std::pow(10.0, p_sum_db / 10.0); }
};

/// Cartesian product in the order users, p_sum_db, bs fraction, user fraction (last varies fastest).
inline std::vector<GridPoint> expand_grid(const GridSpec& g) {
  std::vector<GridPoint> out;
  for (int k : g.users)
    for (double p : g.p_sum_db)
      for (double mb : g.bs_cache_fraction)
        for (double mu : g.user_cache_fraction) out.push_back({out.size(), mu, mb, p, k});
  return out;
}

struct RealizationResult {
  bool ok = false;
  std::optional<double> ee;  // empty: infinite EE
  double tau = 0.0;
  double access_bits = 0.0;
  double backhaul_bits = 0.0;
  double total_power = 0.0;
  bool estimated = false;  // coded sums estimated from a subset sample
  std::string error;
};

/// Channel with condition number <= kMaxConditionNumber; ill-conditioned draws are
/// replaced (at most `max_redraws` times) and counted.
inline ChannelMatrix draw_channel(int users, int antennas, double variance, std::uint64_t seed, int max_redraws, int& redraws) {
  for (int attempt = 0;; ++attempt) {
    ChannelMatrix h = sample_channels(users, antennas, variance, attempt == 0 ? seed : derive_seed(seed, {static_cast<std::uint64_t>(attempt)}));
    const double cond = condition_number(h);
    if (cond <= kMaxConditionNumber) return h;
    if (attempt >= max_redraws) throw IllConditionedChannel("channel stayed ill-conditioned after redraws", cond);
    ++redraws;
  }
}

inline std::uint64_t realization_seed(const ScenarioConfig& c, const GridPoint& g, int realization) {
  if (c.common_random_numbers) return derive_seed(c.base_seed, {static_cast<std::uint64_t>(realization)});
  return derive_seed(c.base_seed, {g.index, static_cast<std::uint64_t>(realization)});
}

namespace detail {

inline double coded_mean_power(const CodedDeliveryPlan& plan) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& session : plan.sessions)
    for (const auto& b : session.beams) {
      s += b.power();
      ++n;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

/// Up to `cap` subsets of size r drawn without replacement (all of them when cap is 0 or large enough).
inline std::vector<SubsetMask> sampled_subsets(int users, int r, int cap, std::uint64_t seed) {
  auto all = subsets_of_size(users, r);
  if (cap <= 0 || static_cast<std::size_t>(cap) >= all.size()) return all;
  Rng rng(seed);
  for (std::size_t i = 0; i < static_cast<std::size_t>(cap); ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(all.size() - i));
    std::swap(all[i], all[j]);
  }
  all.resize(static_cast<std::size_t>(cap));
  std::sort(all.begin(), all.end());
  return all;
}

/// Coded design with subset subsampling; sums over subsets are scaled up by C(K, m+1)/cap.
inline RealizationResult coded_estimate(const ScenarioConfig& c, const ChannelMatrix& h, const CacheSizes& cache,
                                        const GridPoint& g, const SdrOptions& sdr, const BisectionConfig& bis,
                                        std::uint64_t seed) {
  const int k_users = h.users();
  const auto gamma = c.rates_for(k_users);
  const auto plan = coded_plan(k_users, cache, c.library);
  const Throughputs t = coded_throughput(k_users, cache, c.library);
  RealizationResult r;
  r.access_bits = t.access_bits;
  r.backhaul_bits = t.backhaul_bits;
  double access_energy = 0.0, power_sum = 0.0;
  std::size_t n_solved = 0;
  for (const auto& s : plan.sessions) {
    const auto total = binomial(k_users, s.m + 1);
    const auto subsets = sampled_subsets(k_users, s.m + 1, c.subset_cap, derive_seed(seed, {0xC0DEDull, static_cast<std::uint64_t>(s.m)}));
    r.estimated = r.estimated || subsets.size() < total;
    const double weight = static_cast<double>(total) / static_cast<double>(subsets.size());
    const double bits = coded_message_bits(k_users, s, c.library);
    for (SubsetMask mask : subsets) {
      double g_min = std::numeric_limits<double>::infinity();
      for (int k : subset_members(mask)) g_min = std::min(g_min, coded_session_rate(gamma[static_cast<std::size_t>(k)], k_users, s.m));
      SdrOptions o = sdr;
      o.randomization.seed = derive_seed(sdr.randomization.seed, {static_cast<std::uint64_t>(s.m), mask});
      MulticastBeam beam = c.objective == Objective::ee
                               ? sdr_ee_max_coded(h, mask, g_min, c.noise_power, c.bandwidth_hz, o).beam
                               : coded_delay_bisection(h, mask, g_min, g.p_sum(), c.noise_power, c.bandwidth_hz, bis, o).beam;
      require(beam.rate > 0.0, "multicast subset has zero rate");
      access_energy += weight * bits * beam.power() / beam.rate;
      r.tau += weight * bits / beam.rate;
      power_sum += beam.power();
      ++n_solved;
    }
  }
  const auto e = assemble_energy(k_users * c.library.q(), c.eta_joules_per_bit * t.backhaul_bits, access_energy);
  r.ee = e.ee_bits_per_joule;
  r.total_power = n_solved ? power_sum / static_cast<double>(n_solved) : 0.0;
  r.ok = true;
  return r;
}

}  // namespace detail

/// Solve one strategy on one channel realization.
inline RealizationResult evaluate_realization(const ScenarioConfig& c, const GridPoint& g, Strategy strategy,
                                              const ChannelMatrix& h, std::uint64_t seed) {
  const int k_users = g.users;
  const auto gamma = c.rates_for(k_users);
  CacheSizes cache{g.bs_cache_fraction * c.library.n(), g.user_cache_fraction * c.library.n()};
  SdrOptions sdr;
  sdr.randomization.candidates = c.randomization_candidates;
  sdr.randomization.seed = derive_seed(seed, {0x5D2ull});
  BisectionConfig bis;
  bis.epsilon = c.bisection_epsilon;
  bis.max_iter = c.bisection_max_iter;
  const double eta = c.eta_joules_per_bit;
  RealizationResult r;

  if (c.popularity.kind != PopularityKind::uniform) {
    const auto profile = c.profile_for(k_users);
    const auto placement = make_placement(profile, std::llround(cache.user_cache_files), std::llround(cache.bs_cache_files));
    const auto demands = sample_demands(profile, derive_seed(seed, {0xD0ull}));
    const auto design = strategy == Strategy::uncoded_zf ? UnicastDesign::zf : UnicastDesign::sdr;
    PrecodingSolution pre;
    std::vector<int> active;
    if (c.objective == Objective::ee) {
      auto out = nonuniform_ee(h, demands, placement, c.library, gamma, c.noise_power, c.bandwidth_hz, eta, design, sdr);
      pre = std::move(out.precoding);
      active = std::move(out.active);
    } else {
      auto out = nonuniform_delay(h, demands, placement, c.library, gamma, c.noise_power, c.bandwidth_hz, g.p_sum(), design, bis, sdr);
      pre = std::move(out.precoding);
      active = std::move(out.active);
    }
    const Throughputs t = nonuniform_throughput(demands, placement, c.library);
    double access_energy = 0.0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      const double rate = pre.rates[i];
      access_energy += c.library.q() * pre.power(static_cast<int>(i)) / rate;
      r.tau += c.library.q() / rate;
    }
    r.ee = assemble_energy(k_users * c.library.q(), eta * t.backhaul_bits, access_energy).ee_bits_per_joule;
    r.access_bits = t.access_bits;
    r.backhaul_bits = t.backhaul_bits;
    r.total_power = active.empty() ? 0.0 : pre.total_power();
    r.ok = true;
    return r;
  }

  if (strategy == Strategy::coded_sdr) {
    if (c.subset_cap > 0) return detail::coded_estimate(c, h, cache, g, sdr, bis, seed);
    CodedDeliveryPlan plan;
    if (c.objective == Objective::ee) plan = coded_ee_design(h, gamma, cache, c.library, c.noise_power, c.bandwidth_hz, eta, sdr).plan;
    else plan = coded_delay_design(h, gamma, cache, c.library, g.p_sum(), c.noise_power, c.bandwidth_hz, bis, sdr).plan;
    const Throughputs t = coded_throughput(k_users, cache, c.library);
    r.ee = ee_coded(plan, cache, c.library, eta).ee_bits_per_joule;
    r.tau = tau_coded(plan, c.library).tau;
    r.access_bits = t.access_bits;
    r.backhaul_bits = t.backhaul_bits;
    r.total_power = detail::coded_mean_power(plan);
    r.ok = true;
    return r;
  }

  const QosTargets qos = qos_targets(CachingStrategy::uncoded, gamma, cache, c.library, 0, c.bandwidth_hz);
  PrecodingSolution pre;
  if (c.objective == Objective::ee) {
    pre = strategy == Strategy::uncoded_zf ? zf_ee_max(h, qos, cache, c.library, c.noise_power, c.bandwidth_hz, eta).precoding
                                           : sdr_ee_max_uncoded(h, qos, c.noise_power, c.bandwidth_hz, sdr).precoding;
  } else {
    pre = strategy == Strategy::uncoded_zf
              ? zf_delay_alloc(h, qos, g.p_sum(), c.noise_power, cache, c.library, c.bandwidth_hz).precoding
              : uncoded_sdr_delay(h, qos, cache, c.library, g.p_sum(), c.noise_power, c.bandwidth_hz, bis, sdr).precoding;
  }
  const Throughputs t = uncoded_throughput(k_users, cache, c.library);
  r.ee = ee_uncoded(pre, cache, c.library, eta).ee_bits_per_joule;
  r.tau = tau_uncoded(pre.rates, cache, c.library).tau;
  r.access_bits = t.access_bits;
  r.backhaul_bits = t.backhaul_bits;
  r.total_power = pre.total_power();
  r.ok = true;
  return r;
}

// ---------------------------------------------------------------------------
// Sweep and aggregation.

struct SweepRow {
  std::string scenario_hash;
  GridPoint point;
  Strategy strategy = Strategy::uncoded_sdr;
  double ee_bits_per_joule = 0.0;  // +inf when every successful realization spent no energy
  double tau_seconds = 0.0;
  double access_bits = 0.0;
  double backhaul_bits = 0.0;
  double total_power = 0.0;
  double se_ee = 0.0;
  double se_tau = 0.0;
  int realizations_used = 0;
  int failures = 0;
  int redraws = 0;
  bool estimated = false;
  double ee_min = 0.0, ee_max = 0.0, tau_min = 0.0, tau_max = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  bool estimated = false;
};

/// Worker count from EDGECACHE_WORKERS, else the hardware concurrency.
inline int default_workers() {
  if (const char* env = std::getenv("EDGECACHE_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    require(end != env && *end == '\0' && v >= 1 && v <= 1024, "EDGECACHE_WORKERS must be an integer in [1, 1024]");
    return static_cast<int>(v);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

/// FNV-1a over the resolved config and the grid index.
inline std::string scenario_hash(const ScenarioConfig& c, std::size_t grid_index) {
  const std::string text = to_json(c).dump() + "#" + std::to_string(grid_index);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline SweepResult run_sweep(const ScenarioConfig& c, int workers = 0) {
  c.validate();
  if (workers <= 0) workers = default_workers();
  const auto grid = expand_grid(c.grid);
  const std::size_t n_strat = c.strategies.size();
  const std::size_t n_real = static_cast<std::size_t>(c.realizations);
  const std::size_t n_tasks = grid.size() * n_real;

  // results[(grid * n_real + realization) * n_strat + strategy]
  std::vector<RealizationResult> results(n_tasks * n_strat);
  std::vector<int> redraws(n_tasks, 0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto work = [&] {
    for (;;) {
      const std::size_t task = next.fetch_add(1);
      if (task >= n_tasks) return;
      const GridPoint& g = grid[task / n_real];
      const int real = static_cast<int>(task % n_real);
      const std::uint64_t seed = realization_seed(c, g, real);
      try {
        std::optional<ChannelMatrix> h;
        std::string channel_error;
        try {
          h = draw_channel(g.users, c.antennas, c.channel_variance, seed, c.max_redraws, redraws[task]);
        } catch (const IllConditionedChannel& e) {
          channel_error = e.what();
        }
        for (std::size_t s = 0; s < n_strat; ++s) {
          auto& out = results[task * n_strat + s];
          if (!h) {
            out.error = channel_error;
            continue;
          }
          try {
            out = evaluate_realization(c, g, c.strategies[s], *h, seed);
          } catch (const Infeasible& e) {
            out.error = e.what();
          } catch (const SolverFailure& e) {
            out.error = e.what();
          } catch (const IllConditionedChannel& e) {
            out.error = e.what();
          }
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        next.store(n_tasks);
        return;
      }
    }
  };

  const int n_threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), std::max<std::size_t>(n_tasks, 1)));
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  // Reduction in index order, independent of scheduling.
  SweepResult out;
  for (const auto& g : grid) {
    const std::string hash = scenario_hash(c, g.index);
    for (std::size_t s = 0; s < n_strat; ++s) {
      SweepRow row;
      row.scenario_hash = hash;
      row.point = g;
      row.strategy = c.strategies[s];
      RunningStat ee, tau, access, backhaul, power;
      bool infinite_ee = false;
      for (std::size_t real = 0; real < n_real; ++real) {
        const std::size_t task = g.index * n_real + real;
        row.redraws += redraws[task];
        const auto& r = results[task * n_strat + s];
        if (!r.ok) {
          ++row.failures;
          continue;
        }
        ++row.realizations_used;
        row.estimated = row.estimated || r.estimated;
        if (r.ee) ee.track(*r.ee);
        else infinite_ee = true;
        tau.track(r.tau);
        access.track(r.access_bits);
        backhaul.track(r.backhaul_bits);
        power.track(r.total_power);
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      const bool any = row.realizations_used > 0;
      row.ee_bits_per_joule = infinite_ee ? std::numeric_limits<double>::infinity() : (ee.count() ? ee.mean() : nan);
      row.se_ee = infinite_ee ? nan : (ee.count() ? ee.std_error() : nan);
      row.ee_min = ee.count() ? ee.min() : nan;
      row.ee_max = ee.count() ? ee.max() : nan;
      row.tau_seconds = any ? tau.mean() : nan;
      row.se_tau = any ? tau.std_error() : nan;
      row.tau_min = any ? tau.min() : nan;
      row.tau_max = any ? tau.max() : nan;
      row.access_bits = any ? access.mean() : nan;
      row.backhaul_bits = any ? backhaul.mean() : nan;
      row.total_power = any ? power.mean() : nan;
      out.estimated = out.estimated || row.estimated;
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline void write_csv(std::ostream& os, const SweepResult& r) {
  os << "scenario_hash,user_cache_fraction,bs_cache_fraction,p_sum_db,users,strategy,ee_bits_per_joule,tau_seconds,"
        "access_bits,backhaul_bits,total_power,se_ee,se_tau,failures\n";
  for (const auto& row : r.rows) {
    os << row.scenario_hash << ',' << format_number(row.point.user_cache_fraction) << ','
       << format_number(row.point.bs_cache_fraction) << ',' << format_number(row.point.p_sum_db) << ',' << row.point.users
       << ',' << to_string(row.strategy) << ',' << format_number(row.ee_bits_per_joule) << ','
       << format_number(row.tau_seconds) << ',' << format_number(row.access_bits) << ','
       << format_number(row.backhaul_bits) << ',' << format_number(row.total_power) << ',' << format_number(row.se_ee)
       << ',' << format_number(row.se_tau) << ',' << row.failures << '\n';
  }
}

}  // namespace edgecache
