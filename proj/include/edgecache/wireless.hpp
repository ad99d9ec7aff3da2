#pragma once

// Block Rayleigh channels, zero-forcing directions, and achievable rates of
// unicast and physical-layer multicast transmissions.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "edgecache/cache_model.hpp"
#include "edgecache/combinatorics.hpp"
#include "edgecache/error.hpp"
#include "edgecache/linalg.hpp"
#include "edgecache/random.hpp"

namespace edgecache {

enum class CachingStrategy { uncoded, coded };

/// Channel realization. Column k of `columns` is h_k (length L); user k
/// receives h_k^H w for a transmitted beam w.
struct ChannelMatrix {
  CMatrix columns;
  std::vector<double> per_user_variance;

  int users() const { return static_cast<int>(columns.cols()); }
  int antennas() const { return static_cast<int>(columns.rows()); }
  CVector user(int k) const { return columns.col(k); }
  /// K x L matrix whose rows are h_k^H.
  CMatrix stacked() const { return columns.adjoint(); }

  ChannelMatrix restricted(std::span<const int> members) const {
    ChannelMatrix out;
    out.columns.resize(columns.rows(), static_cast<Eigen::Index>(members.size()));
    for (std::size_t i = 0; i < members.size(); ++i) {
      require(members[i] >= 0 && members[i] < users(), "user index out of range");
      out.columns.col(static_cast<Eigen::Index>(i)) = columns.col(members[i]);
      if (!per_user_variance.empty()) out.per_user_variance.push_back(per_user_variance[static_cast<std::size_t>(members[i])]);
    }
    return out;
  }

  void validate() const {
    require(users() >= 1, "channel must have at least one user");
    require(users() <= antennas(), "channel requires K <= L");
    require(columns.allFinite(), "channel entries must be finite");
  }
};

inline ChannelMatrix sample_channels(int users, int antennas, std::span<const double> variances, std::uint64_t seed) {
  require(users >= 1 && antennas >= 1, "need at least one user and one antenna");
  require(users <= antennas, "channel requires K <= L");
  require(static_cast<int>(variances.size()) == users, "one variance per user is required");
  for (double v : variances) require(std::isfinite(v) && v > 0.0, "channel variances must be positive");
  Rng rng(seed);
  ChannelMatrix h;
  h.columns.resize(antennas, users);
  h.per_user_variance.assign(variances.begin(), variances.end());
  for (int k = 0; k < users; ++k)
    for (int l = 0; l < antennas; ++l) h.columns(l, k) = rng.complex_normal(variances[static_cast<std::size_t>(k)]);
  return h;
}

inline ChannelMatrix sample_channels(int users, int antennas, double variance, std::uint64_t seed) {
  const std::vector<double> v(static_cast<std::size_t>(std::max(users, 0)), variance);
  return sample_channels(users, antennas, v, seed);
}

inline double condition_number(const ChannelMatrix& h) {
  Eigen::JacobiSVD<CMatrix> svd(h.stacked());
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

inline constexpr double kMaxConditionNumber = 1e6;

/// Columns of H^H (H H^H)^{-1} with H = stacked channels, so that
/// h_l^H h~_k = 1 if l == k and 0 otherwise.
inline CMatrix zf_directions(const ChannelMatrix& h, double max_condition = kMaxConditionNumber) {
  h.validate();
  const double cond = condition_number(h);
  if (!(cond <= max_condition))
    throw IllConditionedChannel("channel condition number " + std::to_string(cond) + " exceeds " +
                                    std::to_string(max_condition),
                                cond);
  const CMatrix hs = h.stacked();
  const CMatrix gram = hs * hs.adjoint();
  return hs.adjoint() * gram.ldlt().solve(CMatrix::Identity(gram.rows(), gram.cols()));
}

/// SINR of every user when beam k (column k of `beams`) carries user k's stream.
inline std::vector<double> unicast_sinrs(const ChannelMatrix& h, const CMatrix& beams, double noise_power) {
  require(beams.rows() == h.antennas() && beams.cols() == h.users(), "beam matrix must be L x K");
  require(noise_power > 0.0, "noise power must be positive");
  const CMatrix g = h.stacked() * beams;  // g(k, l) = h_k^H w_l
  std::vector<double> out(static_cast<std::size_t>(h.users()));
  for (int k = 0; k < h.users(); ++k) {
    double interference = 0.0;
    for (int l = 0; l < h.users(); ++l)
      if (l != k) interference += std::norm(g(k, l));
    out[static_cast<std::size_t>(k)] = std::norm(g(k, k)) / (interference + noise_power);
  }
  return out;
}

inline double rate_from_sinr(double sinr, double bandwidth) { return bandwidth * std::log2(1.0 + sinr); }

inline std::vector<double> unicast_rates(const ChannelMatrix& h, const CMatrix& beams, double noise_power, double bandwidth) {
  auto r = unicast_sinrs(h, beams, noise_power);
  for (auto& x : r) x = rate_from_sinr(x, bandwidth);
  return r;
}

/// Smallest received SNR among the members of a multicast group.
inline double multicast_min_snr(const ChannelMatrix& h, std::span<const int> members, const CVector& beam, double noise_power) {
  require(!members.empty(), "multicast group must be nonempty");
  require(beam.size() == h.antennas(), "beam length must equal the antenna count");
  require(noise_power > 0.0, "noise power must be positive");
  double worst = std::numeric_limits<double>::infinity();
  for (int k : members) {
    require(k >= 0 && k < h.users(), "user index out of range");
    worst = std::min(worst, gain(h.user(k), beam) / noise_power);
  }
  return worst;
}

inline double multicast_rate(const ChannelMatrix& h, std::span<const int> members, const CVector& beam, double noise_power,
                             double bandwidth) {
  return rate_from_sinr(multicast_min_snr(h, members, beam, noise_power), bandwidth);
}

inline double multicast_rate(const ChannelMatrix& h, SubsetMask members, const CVector& beam, double noise_power,
                             double bandwidth) {
  const auto m = subset_members(members);
  return multicast_rate(h, m, beam, noise_power, bandwidth);
}

/// Unicast beams (one column per user) with their achieved rates.
struct PrecodingSolution {
  CMatrix beams;
  std::vector<double> rates;

  double power(int k) const { return beams.col(k).squaredNorm(); }
  double total_power() const { return beams.squaredNorm(); }
};

/// One multicast beam serving a subset of users.
struct MulticastBeam {
  SubsetMask members = 0;
  CVector beam;
  double rate = 0.0;

  double power() const { return beam.squaredNorm(); }
};

/// Rate requirement per user and its SINR equivalent 2^{rate/B} - 1.
struct QosTargets {
  std::vector<double> per_user_rate;   // gamma_k, bits/s for the whole file
  std::vector<double> effective_rate;  // rate the access link must sustain
  std::vector<double> sinr_floor;      // zeta_k

  int users() const { return static_cast<int>(per_user_rate.size()); }
  double min_effective_rate() const {
    double r = std::numeric_limits<double>::infinity();
    for (double x : effective_rate) r = std::min(r, x);
    return r;
  }
};

inline double sinr_for_rate(double rate, double bandwidth) { return std::exp2(rate / bandwidth) - 1.0; }

/// Uncoded: gamma_bar = (1 - M_u/N) gamma. Coded with session parameter m:
/// gamma_bar = gamma (K - m)/(m + 1).
inline QosTargets qos_targets(CachingStrategy strategy, std::span<const double> gamma, const CacheSizes& cache,
                              const LibraryConfig& lib, int m, double bandwidth) {
  require(bandwidth > 0.0, "bandwidth must be positive");
  const int k_users = static_cast<int>(gamma.size());
  validate_users(k_users);
  lib.validate();
  cache.validate(lib);
  QosTargets q;
  q.per_user_rate.assign(gamma.begin(), gamma.end());
  double factor = 0.0;
  if (strategy == CachingStrategy::uncoded) {
    factor = 1.0 - cache.user_fraction(lib);
  } else {
    require(m >= 0 && m <= k_users, "coded session parameter must lie in [0, K]");
    factor = static_cast<double>(k_users - m) / (m + 1.0);
  }
  for (double g : gamma) {
    require(std::isfinite(g) && g > 0.0, "rate requirements must be positive");
    q.effective_rate.push_back(factor * g);
    q.sinr_floor.push_back(sinr_for_rate(factor * g, bandwidth));
  }
  return q;
}

inline QosTargets uncoded_qos(std::span<const double> gamma, const CacheSizes& cache, const LibraryConfig& lib, double bandwidth) {
  return qos_targets(CachingStrategy::uncoded, gamma, cache, lib, 0, bandwidth);
}

/// QoS with the same whole-file rate gamma for every user and no cache discount.
inline QosTargets whole_file_qos(std::span<const double> gamma, double bandwidth) {
  QosTargets q;
  for (double g : gamma) {
    require(std::isfinite(g) && g > 0.0, "rate requirements must be positive");
    q.per_user_rate.push_back(g);
    q.effective_rate.push_back(g);
    q.sinr_floor.push_back(sinr_for_rate(g, bandwidth));
  }
  return q;
}

}  // namespace edgecache
