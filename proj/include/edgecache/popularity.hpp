#pragma once

// Non-uniform content popularity with whole-file, most-popular-first caching.
// Only users whose request misses their own cache are served over the air.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "edgecache/cache_model.hpp"
#include "edgecache/delay.hpp"
#include "edgecache/energy.hpp"
#include "edgecache/error.hpp"
#include "edgecache/random.hpp"
#include "edgecache/wireless.hpp"

namespace edgecache {

struct PopularityProfile {
  std::vector<std::vector<double>> per_user;  // q_k, one length-N vector per user
  std::vector<double> global;                 // q_G = mean of the q_k

  int users() const { return static_cast<int>(per_user.size()); }
  std::int64_t n_files() const { return static_cast<std::int64_t>(global.size()); }

  void validate() const {
    require(!per_user.empty(), "popularity profile needs at least one user");
    const std::size_t n = global.size();
    require(n >= 1, "popularity profile needs at least one file");
    auto check = [n](const std::vector<double>& q, const std::string& what) {
      require(q.size() == n, what + " has the wrong length");
      double s = 0.0;
      for (double x : q) {
        require(std::isfinite(x) && x >= 0.0, what + " has a negative or non-finite entry");
        s += x;
      }
      require(std::abs(s - 1.0) <= 1e-12 + 4e-16 * static_cast<double>(n),
              what + " does not sum to one");
    };
    for (std::size_t k = 0; k < per_user.size(); ++k) check(per_user[k], "popularity of user " + std::to_string(k));
    check(global, "global popularity");
  }
};

/// Per-user popularity vectors (need not be normalized beyond 1e-9); the
/// global vector is their average.
inline PopularityProfile custom_profile(std::vector<std::vector<double>> per_user) {
  require(!per_user.empty(), "popularity profile needs at least one user");
  const std::size_t n = per_user.front().size();
  require(n >= 1, "popularity profile needs at least one file");
  PopularityProfile p;
  p.global.assign(n, 0.0);
  for (auto& q : per_user) {
    require(q.size() == n, "all popularity vectors must have the same length");
    double s = 0.0;
    for (double x : q) {
      require(std::isfinite(x) && x >= 0.0, "popularity entries must be nonnegative");
      s += x;
    }
    require(std::abs(s - 1.0) <= 1e-9, "popularity vectors must sum to one");
    for (std::size_t i = 0; i < n; ++i) {
      q[i] /= s;
      p.global[i] += q[i];
    }
  }
  for (double& x : p.global) x /= static_cast<double>(per_user.size());
  p.per_user = std::move(per_user);
  return p;
}

/// q_n = n^{-alpha} / sum_i i^{-alpha} with 1-based popularity ranks, identical for all users.
inline PopularityProfile zipf_profile(std::int64_t n_files, double alpha, int users) {
  require(n_files >= 1, "library must contain at least one file");
  require(std::isfinite(alpha) && alpha >= 0.0, "Zipf exponent must be nonnegative");
  validate_users(users);
  std::vector<double> q(static_cast<std::size_t>(n_files));
  for (std::int64_t n = 0; n < n_files; ++n) q[static_cast<std::size_t>(n)] = std::pow(static_cast<double>(n + 1), -alpha);
  const double s = std::accumulate(q.begin(), q.end(), 0.0);
  for (double& x : q) x /= s;
  PopularityProfile p;
  p.per_user.assign(static_cast<std::size_t>(users), q);
  p.global = std::move(q);
  return p;
}

inline PopularityProfile uniform_profile(std::int64_t n_files, int users) { return zipf_profile(n_files, 0.0, users); }

/// Files sorted by decreasing popularity; ties keep ascending file index.
inline std::vector<std::int64_t> popularity_order(std::span<const double> q) {
  std::vector<std::int64_t> order(q.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    return q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(b)];
  });
  return order;
}

/// Inverse of an order: rank[file] is the 1-based popularity rank.
inline std::vector<std::int64_t> ranks_from_order(std::span<const std::int64_t> order) {
  std::vector<std::int64_t> rank(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) rank[static_cast<std::size_t>(order[i])] = static_cast<std::int64_t>(i) + 1;
  return rank;
}

struct PlacementMap {
  std::vector<std::vector<std::int64_t>> user_order;  // Pi_k as sorted file list
  std::vector<std::vector<std::int64_t>> user_rank;   // Pi_k(file), 1-based
  std::vector<std::int64_t> user_cache_files;         // n_k = M_k
  std::vector<std::int64_t> global_order;             // Pi_G
  std::vector<std::int64_t> global_rank;
  std::int64_t bs_cache_files = 0;                    // n_G = M_0

  int users() const { return static_cast<int>(user_order.size()); }
  std::int64_t n_files() const { return static_cast<std::int64_t>(global_order.size()); }

  std::vector<std::int64_t> user_cached(int k) const {
    const auto& o = user_order[static_cast<std::size_t>(k)];
    return {o.begin(), o.begin() + user_cache_files[static_cast<std::size_t>(k)]};
  }
  std::vector<std::int64_t> bs_cached() const { return {global_order.begin(), global_order.begin() + bs_cache_files}; }
};

/// User k stores its n_k = M_k most popular files; the BS stores the M_0 globally most popular.
inline PlacementMap make_placement(const PopularityProfile& profile, std::span<const std::int64_t> user_cache_files,
                                   std::int64_t bs_cache_files) {
  profile.validate();
  const auto n = profile.n_files();
  require(static_cast<int>(user_cache_files.size()) == profile.users(), "one cache size per user is required");
  require(bs_cache_files >= 0 && bs_cache_files <= n, "BS cache size must lie in [0, N]");
  PlacementMap p;
  for (int k = 0; k < profile.users(); ++k) {
    const auto m = user_cache_files[static_cast<std::size_t>(k)];
    require(m >= 0 && m <= n, "user cache sizes must lie in [0, N]");
    p.user_order.push_back(popularity_order(profile.per_user[static_cast<std::size_t>(k)]));
    p.user_rank.push_back(ranks_from_order(p.user_order.back()));
    p.user_cache_files.push_back(m);
  }
  p.global_order = popularity_order(profile.global);
  p.global_rank = ranks_from_order(p.global_order);
  p.bs_cache_files = bs_cache_files;
  return p;
}

inline PlacementMap make_placement(const PopularityProfile& profile, std::int64_t user_cache_files, std::int64_t bs_cache_files) {
  const std::vector<std::int64_t> m(static_cast<std::size_t>(profile.users()), user_cache_files);
  return make_placement(profile, m, bs_cache_files);
}

inline void validate_demands(const RequestVector& demands, const PlacementMap& placement) {
  require(demands.users() == placement.users(), "one demand per user is required");
  for (auto d : demands.demands) require(d >= 0 && d < placement.n_files(), "requested file index out of range");
}

/// Users whose requested file is not in their own cache.
inline std::vector<int> active_subset(const RequestVector& demands, const PlacementMap& placement) {
  validate_demands(demands, placement);
  std::vector<int> out;
  for (int k = 0; k < demands.users(); ++k) {
    const auto d = demands.demands[static_cast<std::size_t>(k)];
    if (placement.user_rank[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] > placement.user_cache_files[static_cast<std::size_t>(k)])
      out.push_back(k);
  }
  return out;
}

enum class BackhaulCounting {
  active_only,   // a request served from the user's own cache never reaches the backhaul
  all_requests,  // indicator sum over every user, regardless of the user cache
};

/// Access bits Q * |active users|; backhaul bits Q * |requests missing the BS cache|.
inline Throughputs nonuniform_throughput(const RequestVector& demands, const PlacementMap& placement, const LibraryConfig& lib,
                                         BackhaulCounting counting = BackhaulCounting::active_only) {
  validate_demands(demands, placement);
  lib.validate();
  require(lib.n_files == placement.n_files(), "placement and library disagree on N");
  Throughputs t;
  for (int k = 0; k < demands.users(); ++k) {
    const auto d = static_cast<std::size_t>(demands.demands[static_cast<std::size_t>(k)]);
    const bool miss_user = placement.user_rank[static_cast<std::size_t>(k)][d] > placement.user_cache_files[static_cast<std::size_t>(k)];
    const bool miss_bs = placement.global_rank[d] > placement.bs_cache_files;
    if (miss_user) t.access_bits += lib.q();
    if (miss_bs && (miss_user || counting == BackhaulCounting::all_requests)) t.backhaul_bits += lib.q();
  }
  return t;
}

/// Independent categorical draw per user by inverse CDF.
inline RequestVector sample_demands(const PopularityProfile& profile, std::uint64_t seed) {
  profile.validate();
  Rng rng(seed);
  RequestVector r;
  for (const auto& q : profile.per_user) {
    const double u = rng.uniform();
    double c = 0.0;
    std::int64_t pick = -1;
    for (std::size_t i = 0; i < q.size() && pick < 0; ++i) {
      c += q[i];
      if (u < c) pick = static_cast<std::int64_t>(i);
    }
    // Round-off can leave the total just below u; take the last file with mass.
    if (pick < 0) {
      pick = static_cast<std::int64_t>(q.size()) - 1;
      while (pick > 0 && q[static_cast<std::size_t>(pick)] == 0.0) --pick;
    }
    r.demands.push_back(pick);
  }
  return r;
}

enum class UnicastDesign { zf, sdr };

struct NonuniformEnergy {
  EnergyBreakdown energy;
  Throughputs throughput;
  std::vector<int> active;
  PrecodingSolution precoding;  // beams of the active users only
};

/// Whole-file QoS rate gamma_k for every active user; interference only among active users.
inline NonuniformEnergy nonuniform_ee(const ChannelMatrix& h, const RequestVector& demands, const PlacementMap& placement,
                                      const LibraryConfig& lib, std::span<const double> gamma, double noise_power,
                                      double bandwidth, double eta, UnicastDesign design = UnicastDesign::sdr,
                                      const SdrOptions& opt = {}) {
  require(h.users() == demands.users(), "one channel per user is required");
  require(static_cast<int>(gamma.size()) == h.users(), "one rate requirement per user is required");
  validate_eta(eta);
  NonuniformEnergy out;
  out.active = active_subset(demands, placement);
  out.throughput = nonuniform_throughput(demands, placement, lib);
  double access = 0.0;
  if (!out.active.empty()) {
    const ChannelMatrix ha = h.restricted(out.active);
    std::vector<double> g;
    for (int k : out.active) g.push_back(gamma[static_cast<std::size_t>(k)]);
    const QosTargets qos = whole_file_qos(g, bandwidth);
    if (design == UnicastDesign::zf) {
      const CMatrix dirs = zf_directions(ha);
      out.precoding.beams = dirs;
      for (int i = 0; i < ha.users(); ++i) out.precoding.beams.col(i) *= std::sqrt(qos.sinr_floor[static_cast<std::size_t>(i)] * noise_power);
      out.precoding.rates = unicast_rates(ha, out.precoding.beams, noise_power, bandwidth);
    } else {
      out.precoding = sdr_ee_max_uncoded(ha, qos, noise_power, bandwidth, opt).precoding;
    }
    for (int i = 0; i < ha.users(); ++i) access += lib.q() * out.precoding.power(i) / out.precoding.rates[static_cast<std::size_t>(i)];
  }
  out.energy = assemble_energy(h.users() * lib.q(), eta * out.throughput.backhaul_bits, access);
  return out;
}

struct NonuniformDelay {
  DelayResult delay;  // per active user Q/R_k; tau is their sum
  std::vector<int> active;
  PrecodingSolution precoding;
};

inline NonuniformDelay nonuniform_delay(const ChannelMatrix& h, const RequestVector& demands, const PlacementMap& placement,
                                        const LibraryConfig& lib, std::span<const double> gamma, double noise_power,
                                        double bandwidth, double power_budget, UnicastDesign design = UnicastDesign::sdr,
                                        const BisectionConfig& cfg = {}, const SdrOptions& opt = {}) {
  require(h.users() == demands.users(), "one channel per user is required");
  require(static_cast<int>(gamma.size()) == h.users(), "one rate requirement per user is required");
  NonuniformDelay out;
  out.active = active_subset(demands, placement);
  if (out.active.empty()) return out;
  const ChannelMatrix ha = h.restricted(out.active);
  std::vector<double> g;
  for (int k : out.active) g.push_back(gamma[static_cast<std::size_t>(k)]);
  const QosTargets qos = whole_file_qos(g, bandwidth);
  if (design == UnicastDesign::zf) {
    const CacheSizes none{};
    const LibraryConfig whole{lib.n_files, lib.file_size_bits};
    out.precoding = zf_delay_alloc(ha, qos, power_budget, noise_power, none, whole, bandwidth).precoding;
  } else {
    out.precoding = maxmin_sinr_bisection(ha, qos.sinr_floor, power_budget, noise_power, bandwidth, cfg, opt).precoding;
  }
  for (int i = 0; i < ha.users(); ++i) {
    const double r = out.precoding.rates[static_cast<std::size_t>(i)];
    require(r > 0.0, "active user has zero rate");
    out.delay.per_target_time.push_back(lib.q() / r);
    out.delay.powers.push_back(out.precoding.power(i));
    out.delay.tau += lib.q() / r;
  }
  return out;
}

}  // namespace edgecache
