#pragma once

// Content delivery time of uncoded and coded caching and the beamforming
// designs minimizing it under a transmit power budget P_sum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/lambert_w.hpp>

#include "edgecache/cache_model.hpp"
#include "edgecache/energy.hpp"
#include "edgecache/error.hpp"
#include "edgecache/linalg.hpp"
#include "edgecache/rank1.hpp"
#include "edgecache/sdp.hpp"
#include "edgecache/wireless.hpp"

namespace edgecache {

struct DelayResult {
  std::vector<double> per_target_time;  // seconds per user (uncoded) or per subset (coded)
  double tau = 0.0;                     // average over users (uncoded) or sum over subsets (coded)
  std::vector<double> powers;
};

/// tau_unc = (1/K) sum_k Q(1 - M_u/N)/R_k.
inline DelayResult tau_uncoded(std::span<const double> rates, const CacheSizes& cache, const LibraryConfig& lib) {
  const int k_users = static_cast<int>(rates.size());
  validate_users(k_users);
  lib.validate();
  cache.validate(lib);
  const double bits = lib.q() * (1.0 - cache.user_fraction(lib));
  DelayResult d;
  double sum = 0.0;
  for (int k = 0; k < k_users; ++k) {
    double t = 0.0;
    if (bits > 0.0) {
      const double r = rates[static_cast<std::size_t>(k)];
      require(std::isfinite(r) && r > 0.0, "user " + std::to_string(k) + " has residual demand but zero rate");
      t = bits / r;
    }
    d.per_target_time.push_back(t);
    sum += t;
  }
  d.tau = sum / k_users;
  return d;
}

struct DelayBound {
  double tau = 0.0;
  double upper_bound = 0.0;  // Q(1 - M_u/N)/min_k R_k
};

/// The max-min design minimizes this bound instead of tau itself.
inline DelayBound delay_upper_bound(std::span<const double> rates, const CacheSizes& cache, const LibraryConfig& lib) {
  const DelayResult d = tau_uncoded(rates, cache, lib);
  DelayBound b{d.tau, 0.0};
  for (double t : d.per_target_time) b.upper_bound = std::max(b.upper_bound, t);
  if (!(b.tau <= b.upper_bound * (1.0 + 1e-12))) throw SolverFailure("average delivery time exceeds its upper bound");
  return b;
}

// ---------------------------------------------------------------------------
// ZF power allocation:
//   minimize sum_k 1/log2(1 + p_k/sigma^2)  s.t.  p_k >= zeta_k sigma^2,  sum_k a_k p_k <= P,
// with a_k = ||h~_k||^2. Stationarity reads g(p_k) = lambda a_k with
// g(p) = ln2 / (sigma^2 u^2 e^u), u = ln(1 + p/sigma^2); the budget is tight.

namespace detail {

inline double zf_delay_slope(double p, double noise) {
  const double u = std::log1p(p / noise);
  return std::log(2.0) / (noise * u * u * std::exp(u));
}

/// Inverse of zf_delay_slope: u^2 e^u = c  <=>  u = 2 W(sqrt(c)/2).
inline double zf_delay_slope_inverse(double y, double noise) {
  const double c = std::log(2.0) / (noise * y);
  const double u = 2.0 * boost::math::lambert_w0(0.5 * std::sqrt(c));
  return noise * std::expm1(u);
}

}  // namespace detail

struct ZfDelayDesign {
  std::vector<double> powers;
  PrecodingSolution precoding;
  DelayResult delay;
  double multiplier = 0.0;     // lambda
  double kkt_residual = 0.0;   // max relative violation of stationarity and budget tightness
};

inline double zf_min_budget(std::span<const double> zf_norms_sq, const QosTargets& qos, double noise_power) {
  double s = 0.0;
  for (std::size_t k = 0; k < zf_norms_sq.size(); ++k) s += noise_power * qos.sinr_floor[k] * zf_norms_sq[k];
  return s;
}

inline ZfDelayDesign zf_delay_alloc(const ChannelMatrix& h, const QosTargets& qos, double power_budget, double noise_power,
                                    const CacheSizes& cache, const LibraryConfig& lib, double bandwidth) {
  require(qos.users() == h.users(), "one QoS target per user is required");
  require(noise_power > 0.0 && power_budget > 0.0, "noise power and power budget must be positive");
  const int k_users = h.users();
  const CMatrix dirs = zf_directions(h);
  const auto a = zf_gains(dirs);
  const double min_budget = zf_min_budget(a, qos, noise_power);
  if (power_budget < min_budget * (1.0 - 1e-12))
    throw Infeasible("power budget " + std::to_string(power_budget) + " is below the minimum " + std::to_string(min_budget) +
                         " needed to meet the QoS floors",
                     min_budget);

  std::vector<double> lower(static_cast<std::size_t>(k_users));
  for (int k = 0; k < k_users; ++k) lower[static_cast<std::size_t>(k)] = qos.sinr_floor[static_cast<std::size_t>(k)] * noise_power;

  ZfDelayDesign d;
  d.powers = lower;
  if (power_budget > min_budget) {
    auto powers_at = [&](double lambda) {
      std::vector<double> p(lower.size());
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double y = lambda * a[k];
        p[k] = lower[k] > 0.0 && detail::zf_delay_slope(lower[k], noise_power) <= y ? lower[k]
                                                                                    : std::max(lower[k], detail::zf_delay_slope_inverse(y, noise_power));
      }
      return p;
    };
    auto spent = [&](const std::vector<double>& p) {
      double s = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) s += a[k] * p[k];
      return s;
    };
    // Bracket lambda in log scale: spent(lambda) is nonincreasing.
    double lo = 1.0, hi = 1.0;
    while (spent(powers_at(hi)) > power_budget && hi < 1e300) hi *= 16.0;
    while (spent(powers_at(lo)) < power_budget && lo > 1e-300) lo /= 16.0;
    for (int it = 0; it < 400 && hi / lo > 1.0 + 4e-16; ++it) {
      const double mid = std::sqrt(lo * hi);
      (spent(powers_at(mid)) > power_budget ? lo : hi) = mid;
    }
    d.multiplier = std::sqrt(lo * hi);
    d.powers = powers_at(d.multiplier);
    // Put the last rounding slack on the interior users so the budget is met exactly.
    double interior = 0.0, fixed = 0.0;
    for (std::size_t k = 0; k < lower.size(); ++k) (d.powers[k] > lower[k] ? interior : fixed) += a[k] * d.powers[k];
    if (interior > 0.0) {
      const double scale = (power_budget - fixed) / interior;
      for (std::size_t k = 0; k < lower.size(); ++k)
        if (d.powers[k] > lower[k]) d.powers[k] = std::max(lower[k], d.powers[k] * scale);
    }
    double residual = std::abs(spent(d.powers) - power_budget) / power_budget;
    for (std::size_t k = 0; k < lower.size(); ++k) {
      const double g = detail::zf_delay_slope(d.powers[k], noise_power);
      const double target = d.multiplier * a[k];
      if (d.powers[k] > lower[k]) residual = std::max(residual, std::abs(g - target) / target);
      else residual = std::max(residual, std::max(0.0, g - target) / target);  // floor multiplier must be nonnegative
    }
    d.kkt_residual = residual;
  }
  d.precoding.beams = dirs;
  for (int k = 0; k < k_users; ++k) d.precoding.beams.col(k) *= std::sqrt(d.powers[static_cast<std::size_t>(k)]);
  d.precoding.rates = unicast_rates(h, d.precoding.beams, noise_power, bandwidth);
  d.delay = tau_uncoded(d.precoding.rates, cache, lib);
  d.delay.powers = d.powers;
  return d;
}

// ---------------------------------------------------------------------------
// Bisection on a common SINR target x.

struct BisectionConfig {
  std::optional<double> a_low;   // default: largest QoS floor
  std::optional<double> a_high;  // default: P_sum * max ||h_k||^2 / sigma^2, doubled while feasible
  double epsilon = 1e-3;
  bool relative_epsilon = true;  // epsilon scales with the initial bracket width
  int max_iter = 60;

  void validate() const {
    require(epsilon > 0.0, "bisection epsilon must be positive");
    require(max_iter >= 0, "bisection iteration cap must be nonnegative");
    if (a_low && a_high) require(*a_low <= *a_high, "bisection bracket must satisfy a_low <= a_high");
  }
};

struct BisectionTrace {
  double a_low = 0.0;   // bracket after any upward expansion
  double a_high = 0.0;
  double epsilon = 0.0;  // absolute termination width
  int iterations = 0;
  int iteration_bound = 0;  // ceil(log2((a_high - a_low)/epsilon))
  int expansions = 0;
  std::vector<double> widths;  // bracket width after every iteration
};

namespace detail {

inline int bisection_bound(double width, double eps) {
  if (width <= eps) return 0;
  return static_cast<int>(std::ceil(std::log2(width / eps) - 1e-12));
}

/// Generic bracket search. `feasible(x)` must be monotone: true below the
/// optimum and false above it.
template <class Feasible>
double bisect(double a_low, double a_high, const BisectionConfig& cfg, BisectionTrace& trace, Feasible&& feasible) {
  while (feasible(a_high)) {
    if (trace.expansions >= 64) throw SolverFailure("bisection upper bracket could not be made infeasible");
    a_low = a_high;
    a_high *= 2.0;
    ++trace.expansions;
  }
  trace.a_low = a_low;
  trace.a_high = a_high;
  trace.epsilon = cfg.relative_epsilon ? cfg.epsilon * (a_high - a_low) : cfg.epsilon;
  trace.iteration_bound = bisection_bound(a_high - a_low, trace.epsilon);
  const double stop = trace.epsilon * (1.0 + 1e-12);
  while (a_high - a_low > stop && trace.iterations < cfg.max_iter) {
    const double mid = 0.5 * (a_low + a_high);
    (feasible(mid) ? a_low : a_high) = mid;
    ++trace.iterations;
    trace.widths.push_back(a_high - a_low);
  }
  return a_low;
}

}  // namespace detail

struct MaxMinDesign {
  PrecodingSolution precoding;
  double sinr_target = 0.0;     // last feasible A_L
  double achieved_min_sinr = 0.0;
  BisectionTrace trace;
  bool exact_rank1 = false;
};

/// Table-I style search: maximize the minimum SINR of unicast beams with total power <= P_sum.
inline MaxMinDesign maxmin_sinr_bisection(const ChannelMatrix& h, std::span<const double> floors, double power_budget,
                                          double noise_power, double bandwidth, const BisectionConfig& cfg = {},
                                          const SdrOptions& opt = {}) {
  h.validate();
  cfg.validate();
  require(static_cast<int>(floors.size()) == h.users(), "one SINR floor per user is required");
  require(noise_power > 0.0 && power_budget > 0.0, "noise power and power budget must be positive");
  const int k_users = h.users();
  double floor_max = 0.0;
  for (double z : floors) floor_max = std::max(floor_max, z);
  double max_gain = 0.0;
  for (int k = 0; k < k_users; ++k) max_gain = std::max(max_gain, h.user(k).squaredNorm());

  std::vector<CMatrix> best_blocks;
  auto solve_at = [&](double x) {
    const std::vector<double> common(static_cast<std::size_t>(k_users), x);
    auto sol = sdp::solve(unicast_qos_sdp(h, common, noise_power), opt.solver);
    require_solved(sol, "max-min SINR feasibility relaxation");
    return sol;
  };
  const double a_low = cfg.a_low.value_or(floor_max);
  require(a_low >= floor_max, "bisection lower bracket must be at least the largest QoS floor");
  if (a_low > 0.0) {
    auto sol = solve_at(a_low);
    if (sol.primal_objective > power_budget * (1.0 + 1e-9))
      throw Infeasible("QoS floors need power " + std::to_string(sol.primal_objective) + " above the budget",
                       sol.primal_objective);
    best_blocks = std::move(sol.blocks);
  }
  MaxMinDesign d;
  const double a_high = std::max(a_low, cfg.a_high.value_or(power_budget * max_gain / noise_power));
  d.sinr_target = detail::bisect(a_low, a_high, cfg, d.trace, [&](double x) {
    if (x <= 0.0) return true;
    auto sol = solve_at(x);
    if (sol.primal_objective > power_budget * (1.0 + 1e-9)) return false;
    best_blocks = std::move(sol.blocks);
    return true;
  });
  const auto beams = sdp::extract_unicast_beams_max_min(best_blocks, h, d.sinr_target, noise_power, power_budget,
                                                        opt.randomization);
  d.precoding.beams = beams.beams;
  d.precoding.rates = unicast_rates(h, beams.beams, noise_power, bandwidth);
  const auto s = unicast_sinrs(h, beams.beams, noise_power);
  d.achieved_min_sinr = *std::min_element(s.begin(), s.end());
  d.exact_rank1 = beams.exact_rank1;
  return d;
}

struct CodedDelayBeam {
  MulticastBeam beam;
  double sinr_target = 0.0;  // last feasible A_L of the relaxation
  double achieved_min_snr = 0.0;
  BisectionTrace trace;
  bool exact_rank1 = false;
};

/// Table-II style search for one multicast subset: maximize the minimum member
/// SNR with ||w||^2 <= P_sum and rate floor gamma_min.
inline CodedDelayBeam coded_delay_bisection(const ChannelMatrix& h, SubsetMask subset, double gamma_min, double power_budget,
                                            double noise_power, double bandwidth, const BisectionConfig& cfg = {},
                                            const SdrOptions& opt = {}) {
  h.validate();
  cfg.validate();
  require(subset != 0 && subset >> h.users() == 0, "subset must be a nonempty set of existing users");
  require(gamma_min >= 0.0 && std::isfinite(gamma_min), "multicast rate floor must be nonnegative");
  require(noise_power > 0.0 && power_budget > 0.0, "noise power and power budget must be positive");
  const auto members = subset_members(subset);
  double min_gain = std::numeric_limits<double>::infinity();
  for (int k : members) min_gain = std::min(min_gain, h.user(k).squaredNorm());

  std::vector<CMatrix> best_blocks;
  auto solve_at = [&](double x) {
    auto sol = sdp::solve(multicast_qos_sdp(h, members, x, noise_power), opt.solver);
    require_solved(sol, "multicast max-min feasibility relaxation");
    return sol;
  };
  const double floor = sinr_for_rate(gamma_min, bandwidth);
  const double a_low = std::max(floor, cfg.a_low.value_or(floor));
  // A zero floor is trivially feasible; probe a tiny positive target so the relaxation has a direction.
  {
    auto sol = solve_at(a_low > 0.0 ? a_low : 1e-9 * power_budget * min_gain / noise_power);
    const double need = a_low > 0.0 ? sol.primal_objective : 0.0;
    if (need > power_budget * (1.0 + 1e-9))
      throw Infeasible("multicast rate floor needs power " + std::to_string(need) + " above the budget", need);
    best_blocks = std::move(sol.blocks);
  }
  CodedDelayBeam d;
  const double a_high = std::max(a_low, cfg.a_high.value_or(power_budget * min_gain / noise_power));
  d.sinr_target = detail::bisect(a_low, a_high, cfg, d.trace, [&](double x) {
    if (x <= 0.0) return true;
    auto sol = solve_at(x);
    if (sol.primal_objective > power_budget * (1.0 + 1e-9)) return false;
    best_blocks = std::move(sol.blocks);
    return true;
  });
  std::vector<CVector> channels;
  for (int k : members) channels.push_back(h.user(k));
  const auto r1 = sdp::extract_rank1_max_min(best_blocks[0], channels, power_budget, opt.randomization);
  d.beam.members = subset;
  d.beam.beam = r1.beam;
  d.beam.rate = multicast_rate(h, members, r1.beam, noise_power, bandwidth);
  d.achieved_min_snr = multicast_min_snr(h, members, r1.beam, noise_power);
  d.exact_rank1 = r1.exact_rank1;
  return d;
}

/// tau_cod = sum over sessions of (message bits) * sum_S 1/R_S.
inline DelayResult tau_coded(const CodedDeliveryPlan& plan, const LibraryConfig& lib) {
  DelayResult d;
  for (const auto& s : plan.sessions) {
    validate_session(plan.users, s);
    const double bits = coded_message_bits(plan.users, s, lib);
    for (const auto& b : s.beams) {
      require(std::isfinite(b.rate) && b.rate > 0.0, "multicast subset has zero rate");
      d.per_target_time.push_back(bits / b.rate);
      d.powers.push_back(b.power());
      d.tau += bits / b.rate;
    }
  }
  return d;
}

struct CodedDelayDesign {
  CodedDeliveryPlan plan;
  DelayResult delay;
  int bisection_iterations = 0;
};

inline CodedDelayDesign coded_delay_design(const ChannelMatrix& h, std::span<const double> gamma, const CacheSizes& cache,
                                           const LibraryConfig& lib, double power_budget, double noise_power, double bandwidth,
                                           const BisectionConfig& cfg = {}, const SdrOptions& opt = {}) {
  const int k_users = h.users();
  require(static_cast<int>(gamma.size()) == k_users, "one rate requirement per user is required");
  CodedDelayDesign d;
  d.plan = coded_plan(k_users, cache, lib);
  for (auto& s : d.plan.sessions) {
    for (SubsetMask mask : subsets_of_size(k_users, s.m + 1)) {
      double g_min = std::numeric_limits<double>::infinity();
      for (int k : subset_members(mask)) g_min = std::min(g_min, coded_session_rate(gamma[static_cast<std::size_t>(k)], k_users, s.m));
      SdrOptions o = opt;
      o.randomization.seed = derive_seed(opt.randomization.seed, {static_cast<std::uint64_t>(s.m), mask});
      auto r = coded_delay_bisection(h, mask, g_min, power_budget, noise_power, bandwidth, cfg, o);
      d.bisection_iterations += r.trace.iterations;
      s.beams.push_back(std::move(r.beam));
    }
  }
  d.delay = tau_coded(d.plan, lib);
  return d;
}

struct UncodedDelayDesign {
  PrecodingSolution precoding;
  DelayResult delay;
  MaxMinDesign maxmin;
};

/// Uncoded delivery-time design through max-min SINR with the uncoded QoS floors.
inline UncodedDelayDesign uncoded_sdr_delay(const ChannelMatrix& h, const QosTargets& qos, const CacheSizes& cache,
                                            const LibraryConfig& lib, double power_budget, double noise_power, double bandwidth,
                                            const BisectionConfig& cfg = {}, const SdrOptions& opt = {}) {
  UncodedDelayDesign d;
  if (cache.user_fraction(lib) >= 1.0) {
    d.precoding.beams = CMatrix::Zero(h.antennas(), h.users());
    d.precoding.rates.assign(static_cast<std::size_t>(h.users()), 0.0);
    d.delay = tau_uncoded(d.precoding.rates, cache, lib);
    d.delay.powers.assign(static_cast<std::size_t>(h.users()), 0.0);
    return d;
  }
  d.maxmin = maxmin_sinr_bisection(h, qos.sinr_floor, power_budget, noise_power, bandwidth, cfg, opt);
  d.precoding = d.maxmin.precoding;
  d.delay = tau_uncoded(d.precoding.rates, cache, lib);
  for (int k = 0; k < h.users(); ++k) d.delay.powers.push_back(d.precoding.power(k));
  return d;
}

}  // namespace edgecache
