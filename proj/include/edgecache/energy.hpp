#pragma once

// Energy efficiency (delivered bits per joule) of uncoded and coded caching,
// and beamforming designs that maximize it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edgecache/cache_model.hpp"
#include "edgecache/combinatorics.hpp"
#include "edgecache/error.hpp"
#include "edgecache/linalg.hpp"
#include "edgecache/random.hpp"
#include "edgecache/rank1.hpp"
#include "edgecache/sdp.hpp"
#include "edgecache/wireless.hpp"

namespace edgecache {

/// eta is the backhaul pricing factor in joules per bit.
struct EnergyBreakdown {
  double backhaul_joules = 0.0;
  double access_joules = 0.0;
  double total_joules = 0.0;
  double delivered_bits = 0.0;
  /// Empty when no energy is spent at all (every request served from user caches).
  std::optional<double> ee_bits_per_joule;

  bool infinite_ee() const { return !ee_bits_per_joule.has_value(); }
};

inline EnergyBreakdown assemble_energy(double delivered_bits, double backhaul_joules, double access_joules) {
  EnergyBreakdown e;
  e.backhaul_joules = backhaul_joules;
  e.access_joules = access_joules;
  e.total_joules = backhaul_joules + access_joules;
  e.delivered_bits = delivered_bits;
  if (e.total_joules > 0.0) e.ee_bits_per_joule = delivered_bits / e.total_joules;
  return e;
}

inline void validate_eta(double eta) { require(std::isfinite(eta) && eta >= 0.0, "pricing factor eta must be nonnegative"); }

/// Uncoded EE: every user receives Q(1 - M_u/N) bits at rate R_k with power ||w_k||^2.
inline EnergyBreakdown ee_uncoded(const PrecodingSolution& precoding, const CacheSizes& cache, const LibraryConfig& lib,
                                  double eta) {
  validate_eta(eta);
  const int k_users = static_cast<int>(precoding.beams.cols());
  require(static_cast<int>(precoding.rates.size()) == k_users, "one rate per beam is required");
  const Throughputs t = uncoded_throughput(k_users, cache, lib);
  const double bits_per_user = t.access_bits / k_users;
  double access = 0.0;
  if (bits_per_user > 0.0) {
    for (int k = 0; k < k_users; ++k) {
      const double r = precoding.rates[static_cast<std::size_t>(k)];
      require(std::isfinite(r) && r > 0.0, "user " + std::to_string(k) + " has residual demand but zero rate");
      access += bits_per_user * precoding.power(k) / r;
    }
  }
  return assemble_energy(k_users * lib.q(), eta * t.backhaul_bits, access);
}

// ---------------------------------------------------------------------------
// Coded delivery plan: one session per cache-split part, each serving every
// subset of size m + 1 with a multicast beam.

struct CodedSession {
  int m = 0;
  double fraction = 1.0;  // share of every file handled by this session
  std::vector<MulticastBeam> beams;
};

struct CodedDeliveryPlan {
  int users = 0;
  std::vector<CodedSession> sessions;
};

/// Sessions with their (m, fraction); beams left empty. Sessions that carry
/// no access bits (m >= K or zero fraction) are omitted.
inline CodedDeliveryPlan coded_plan(int users, const CacheSizes& cache, const LibraryConfig& lib) {
  const CodedParams cp = coded_params(users, cache, lib);
  CodedDeliveryPlan plan;
  plan.users = users;
  if (cp.m < users && cp.delta < 1.0) plan.sessions.push_back({cp.m, 1.0 - cp.delta, {}});
  if (cp.delta > 0.0 && cp.m + 1 < users) plan.sessions.push_back({cp.m + 1, cp.delta, {}});
  return plan;
}

/// Bits carried by one multicast message of a session.
inline double coded_message_bits(int users, const CodedSession& s, const LibraryConfig& lib) {
  return s.fraction * lib.q() / static_cast<double>(binomial(users, s.m));
}

inline void validate_session(int users, const CodedSession& s) {
  require(s.m >= 0 && s.m < users, "coded session parameter must lie in [0, K)");
  const auto expected = binomial(users, s.m + 1);
  require(s.beams.size() == expected, "coded session with m=" + std::to_string(s.m) + " needs " + std::to_string(expected) +
                                          " subset solutions, got " + std::to_string(s.beams.size()));
  std::vector<SubsetMask> seen;
  for (const auto& b : s.beams) {
    require(subset_size(b.members) == s.m + 1, "subset solution has the wrong size");
    require(b.members >> users == 0, "subset references a user outside the system");
    seen.push_back(b.members);
  }
  std::sort(seen.begin(), seen.end());
  require(std::adjacent_find(seen.begin(), seen.end()) == seen.end(), "duplicate subset solution");
}

/// Coded EE: KQ / (eta Q_BH + sum_sessions message_bits * sum_S P_S / R_S).
inline EnergyBreakdown ee_coded(const CodedDeliveryPlan& plan, const CacheSizes& cache, const LibraryConfig& lib, double eta) {
  validate_eta(eta);
  const int k_users = plan.users;
  const Throughputs t = coded_throughput(k_users, cache, lib);
  const CodedDeliveryPlan expected = coded_plan(k_users, cache, lib);
  require(expected.sessions.size() == plan.sessions.size(), "delivery plan does not match the cache configuration");
  double access = 0.0;
  for (std::size_t i = 0; i < plan.sessions.size(); ++i) {
    const auto& s = plan.sessions[i];
    require(s.m == expected.sessions[i].m && std::abs(s.fraction - expected.sessions[i].fraction) <= 1e-12,
            "delivery plan does not match the cache configuration");
    validate_session(k_users, s);
    const double bits = coded_message_bits(k_users, s, lib);
    for (const auto& b : s.beams) {
      require(std::isfinite(b.rate) && b.rate > 0.0, "multicast subset has zero rate");
      access += bits * b.power() / b.rate;
    }
  }
  return assemble_energy(k_users * lib.q(), eta * t.backhaul_bits, access);
}

// ---------------------------------------------------------------------------
// Zero-forcing design.

/// ||h~_k||^2 for every user.
inline std::vector<double> zf_gains(const CMatrix& directions) {
  std::vector<double> out;
  for (Eigen::Index k = 0; k < directions.cols(); ++k) out.push_back(directions.col(k).squaredNorm());
  return out;
}

/// Maximal ZF energy efficiency in closed form.
inline std::optional<double> zf_closed_form_ee(std::span<const double> zf_norms_sq, const QosTargets& qos, double noise_power,
                                         const CacheSizes& cache, const LibraryConfig& lib, double eta) {
  const int k_users = qos.users();
  require(static_cast<int>(zf_norms_sq.size()) == k_users, "one ZF gain per user is required");
  const double mu = cache.user_fraction(lib);
  double s = 0.0;
  if (mu < 1.0)
    for (int k = 0; k < k_users; ++k) {
      const auto i = static_cast<std::size_t>(k);
      s += noise_power * qos.sinr_floor[i] * zf_norms_sq[i] / qos.effective_rate[i];
    }
  const double denom = (1.0 - mu) * (eta * k_users * (1.0 - cache.bs_fraction(lib)) + s);
  if (!(denom > 0.0)) return std::nullopt;
  return k_users / denom;
}

struct ZfDesign {
  std::vector<double> powers;  // p_k
  PrecodingSolution precoding;
  EnergyBreakdown energy;
};

/// Minimum-power ZF beams p_k = zeta_k sigma^2, which maximize the uncoded EE.
inline ZfDesign zf_ee_max(const ChannelMatrix& h, const QosTargets& qos, const CacheSizes& cache, const LibraryConfig& lib,
                          double noise_power, double bandwidth, double eta) {
  require(qos.users() == h.users(), "one QoS target per user is required");
  require(noise_power > 0.0, "noise power must be positive");
  const CMatrix dirs = zf_directions(h);
  ZfDesign d;
  d.precoding.beams = dirs;
  for (int k = 0; k < h.users(); ++k) {
    const double p = qos.sinr_floor[static_cast<std::size_t>(k)] * noise_power;
    d.powers.push_back(p);
    d.precoding.beams.col(k) *= std::sqrt(p);
  }
  d.precoding.rates = unicast_rates(h, d.precoding.beams, noise_power, bandwidth);
  d.energy = ee_uncoded(d.precoding, cache, lib, eta);
  return d;
}

// ---------------------------------------------------------------------------
// Semidefinite relaxation designs.

struct SdrOptions {
  sdp::SolverOptions solver;
  sdp::RandomizationOptions randomization;
};

inline void require_solved(const sdp::SDPSolution& sol, const std::string& what) {
  if (sol.status == sdp::Status::infeasible)
    throw Infeasible(what + ": relaxation is infeasible (Farkas certificate found)");
  if (!sol.optimal()) throw SolverFailure(what + ": SDP solver stopped with status " + sdp::to_string(sol.status));
}

inline CMatrix outer(const CVector& h) { return h * h.adjoint(); }

/// Lifted unicast QoS problem: min sum_k Tr(X_k) subject to
/// Tr(A_k X_k) - zeta_k sum_{l != k} Tr(A_k X_l) >= zeta_k sigma^2.
inline sdp::HermitianSDP unicast_qos_sdp(const ChannelMatrix& h, std::span<const double> floors, double noise_power) {
  const int k_users = h.users();
  const int l_ant = h.antennas();
  sdp::HermitianSDP p;
  p.block_sizes.assign(static_cast<std::size_t>(k_users), l_ant);
  p.objective.assign(static_cast<std::size_t>(k_users), CMatrix::Identity(l_ant, l_ant));
  for (int k = 0; k < k_users; ++k) {
    const double z = floors[static_cast<std::size_t>(k)];
    const CMatrix a = outer(h.user(k));
    sdp::Constraint c;
    c.sense = sdp::Sense::greater_equal;
    c.rhs = z * noise_power;
    for (int l = 0; l < k_users; ++l) c.terms.push_back({l, l == k ? a : CMatrix(-z * a)});
    p.constraints.push_back(std::move(c));
  }
  return p;
}

/// Lifted multicast QoS problem: min Tr(X) subject to Tr(A_k X) >= zeta sigma^2 for k in S.
inline sdp::HermitianSDP multicast_qos_sdp(const ChannelMatrix& h, std::span<const int> members, double floor,
                                           double noise_power) {
  const int l_ant = h.antennas();
  sdp::HermitianSDP p;
  p.block_sizes = {l_ant};
  p.objective = {CMatrix::Identity(l_ant, l_ant)};
  for (int k : members) p.constraints.push_back({{{0, outer(h.user(k))}}, sdp::Sense::greater_equal, floor * noise_power});
  return p;
}

struct SdrUnicastDesign {
  PrecodingSolution precoding;
  double sdp_power = 0.0;  // relaxation optimum, a lower bound on any feasible beam power
  bool exact_rank1 = false;
};

inline SdrUnicastDesign sdr_ee_max_uncoded(const ChannelMatrix& h, const QosTargets& qos, double noise_power, double bandwidth,
                                           const SdrOptions& opt = {}) {
  h.validate();
  require(qos.users() == h.users(), "one QoS target per user is required");
  require(noise_power > 0.0, "noise power must be positive");
  SdrUnicastDesign d;
  bool any_demand = false;
  for (double z : qos.sinr_floor) any_demand = any_demand || z > 0.0;
  if (!any_demand) {
    d.precoding.beams = CMatrix::Zero(h.antennas(), h.users());
    d.precoding.rates.assign(static_cast<std::size_t>(h.users()), 0.0);
    d.exact_rank1 = true;
    return d;
  }
  const auto sol = sdp::solve(unicast_qos_sdp(h, qos.sinr_floor, noise_power), opt.solver);
  require_solved(sol, "unicast QoS relaxation");
  const auto beams = sdp::extract_unicast_beams(sol.blocks, h, qos.sinr_floor, noise_power, opt.randomization);
  d.precoding.beams = beams.beams;
  d.precoding.rates = unicast_rates(h, beams.beams, noise_power, bandwidth);
  d.sdp_power = sol.primal_objective;
  d.exact_rank1 = beams.exact_rank1;
  return d;
}

struct SdrMulticastDesign {
  MulticastBeam beam;
  double sdp_power = 0.0;
  bool exact_rank1 = false;
};

/// Least-power multicast beam giving every member of S a rate of at least gamma_min.
inline SdrMulticastDesign sdr_ee_max_coded(const ChannelMatrix& h, SubsetMask subset, double gamma_min, double noise_power,
                                           double bandwidth, const SdrOptions& opt = {}) {
  h.validate();
  require(subset != 0 && subset >> h.users() == 0, "subset must be a nonempty set of existing users");
  require(std::isfinite(gamma_min) && gamma_min > 0.0, "multicast rate floor must be positive");
  require(noise_power > 0.0, "noise power must be positive");
  const auto members = subset_members(subset);
  const double floor = sinr_for_rate(gamma_min, bandwidth);
  const auto sol = sdp::solve(multicast_qos_sdp(h, members, floor, noise_power), opt.solver);
  require_solved(sol, "multicast QoS relaxation");
  std::vector<sdp::QuadraticFloor> floors;
  for (int k : members) floors.push_back({outer(h.user(k)), floor * noise_power});
  const auto r1 = sdp::extract_rank1(sol.blocks[0], floors, opt.randomization);
  SdrMulticastDesign d;
  d.beam.members = subset;
  d.beam.beam = r1.beam;
  d.beam.rate = multicast_rate(h, members, r1.beam, noise_power, bandwidth);
  d.sdp_power = sol.primal_objective;
  d.exact_rank1 = r1.exact_rank1;
  return d;
}

/// Per-user rate gamma_k (K - m)/(m + 1) the access link must sustain in a coded session.
inline double coded_session_rate(double gamma, int users, int m) { return gamma * (users - m) / (m + 1.0); }

struct CodedEeDesign {
  CodedDeliveryPlan plan;
  EnergyBreakdown energy;
  double sdp_power_sum = 0.0;
  bool all_exact_rank1 = true;
};

/// Solve every subset of every session and assemble the coded EE.
inline CodedEeDesign coded_ee_design(const ChannelMatrix& h, std::span<const double> gamma, const CacheSizes& cache,
                                     const LibraryConfig& lib, double noise_power, double bandwidth, double eta,
                                     const SdrOptions& opt = {}) {
  const int k_users = h.users();
  require(static_cast<int>(gamma.size()) == k_users, "one rate requirement per user is required");
  CodedEeDesign d;
  d.plan = coded_plan(k_users, cache, lib);
  for (auto& s : d.plan.sessions) {
    for (SubsetMask mask : subsets_of_size(k_users, s.m + 1)) {
      double g_min = std::numeric_limits<double>::infinity();
      for (int k : subset_members(mask)) g_min = std::min(g_min, coded_session_rate(gamma[static_cast<std::size_t>(k)], k_users, s.m));
      SdrOptions o = opt;
      o.randomization.seed = derive_seed(opt.randomization.seed, {static_cast<std::uint64_t>(s.m), mask});
      auto r = sdr_ee_max_coded(h, mask, g_min, noise_power, bandwidth, o);
      d.sdp_power_sum += r.sdp_power;
      d.all_exact_rank1 = d.all_exact_rank1 && r.exact_rank1;
      s.beams.push_back(std::move(r.beam));
    }
  }
  d.energy = ee_coded(d.plan, cache, lib, eta);
  return d;
}

// ---------------------------------------------------------------------------
// Closed-form comparison with equal service rate gamma for every user and subset.

enum class CachingRegime { free_backhaul, no_bs_cache };
enum class Winner { uncoded, coded, tie };

inline const char* to_string(Winner w) {
  switch (w) {
    case Winner::uncoded: return "uncoded";
    case Winner::coded: return "coded";
    case Winner::tie: return "tie";
  }
  return "unknown";
}

struct ComparisonResult {
  double ee_uncoded = 0.0;
  double ee_coded = 0.0;
  Winner winner = Winner::tie;
  double threshold_user_cache_files = 0.0;  // coded wins above this M_u
};

/// Free backhaul (M_b = N or eta = 0):
///   EE_unc = K / ((1 - M_u/N) P_unc / gamma),  EE_cod = (1 + K M_u/N) / ((1 - M_u/N) P_cod / gamma).
/// No BS cache (M_b = 0):
///   EE_unc = 1 / ((1 - M_u/N)(eta + P_unc/(gamma K))),  EE_cod = (1 + K M_u/N) / ((1 - M_u/N)(eta + P_cod/gamma)).
inline ComparisonResult analytic_comparison(CachingRegime regime, int users, double user_cache_files, double n_files,
                                            double p_unc, double p_cod, double gamma, double eta, double tie_tolerance = 1e-12) {
  validate_users(users);
  require(n_files > 0.0 && user_cache_files >= 0.0 && user_cache_files < n_files, "user cache must lie in [0, N)");
  require(p_unc > 0.0 && p_cod > 0.0 && gamma > 0.0, "powers and rate must be positive");
  validate_eta(eta);
  const double k = users;
  const double mu = user_cache_files / n_files;
  ComparisonResult r;
  if (regime == CachingRegime::free_backhaul) {
    r.ee_uncoded = k / ((1.0 - mu) * p_unc / gamma);
    r.ee_coded = (1.0 + k * mu) / ((1.0 - mu) * p_cod / gamma);
    r.threshold_user_cache_files = (p_cod / p_unc - 1.0 / k) * n_files;
  } else {
    r.ee_uncoded = 1.0 / ((1.0 - mu) * (eta + p_unc / (gamma * k)));
    r.ee_coded = (1.0 + k * mu) / ((1.0 - mu) * (eta + p_cod / gamma));
    r.threshold_user_cache_files = n_files / k * ((eta + p_cod / gamma) / (eta + p_unc / (gamma * k)) - 1.0);
  }
  const double diff = r.ee_coded - r.ee_uncoded;
  if (std::abs(diff) <= tie_tolerance * std::max(r.ee_coded, r.ee_uncoded))
    r.winner = Winner::tie;
  else
    r.winner = diff > 0.0 ? Winner::coded : Winner::uncoded;
  return r;
}

}  // namespace edgecache
