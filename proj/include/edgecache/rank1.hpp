#pragma once

// Recovering beamforming vectors from relaxed (lifted) SDP solutions by
// Gaussian randomization. The principal eigenvector is always tried first;
// when the relaxed solution is rank one it is returned without sampling.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "edgecache/error.hpp"
#include "edgecache/linalg.hpp"
#include "edgecache/random.hpp"
#include "edgecache/wireless.hpp"

namespace edgecache::sdp {

struct RandomizationOptions {
  int candidates = 100;
  std::uint64_t seed = 0;
  double rank1_threshold = 1e-6;  // lambda_2 / lambda_1 below this counts as rank one
};

/// Quadratic floor w^H A w >= floor.
struct QuadraticFloor {
  CMatrix a;
  double floor = 0.0;
};

struct Rank1Beam {
  CVector beam;
  double power = 0.0;
  bool exact_rank1 = false;
  int candidate = 0;  // 0 is the principal eigenvector branch
};

/// Eigen decomposition of a PSD matrix with negative round-off clipped.
class GaussianSampler {
public:
  explicit GaussianSampler(const CMatrix& x) {
    require(x.rows() == x.cols() && x.rows() >= 1, "covariance must be square");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(x));
    const auto n = x.rows();
    values_ = es.eigenvalues().cwiseMax(0.0);
    vectors_ = es.eigenvectors();
    scale_ = vectors_ * values_.cwiseSqrt().asDiagonal();
    const double l1 = values_(n - 1);
    const double l2 = n > 1 ? values_(n - 2) : 0.0;
    ratio_ = l1 > 0.0 ? l2 / l1 : std::numeric_limits<double>::infinity();
  }

  double largest_eigenvalue() const { return values_(values_.size() - 1); }
  /// lambda_2 / lambda_1
  double eigen_ratio() const { return ratio_; }
  /// sqrt(lambda_1) u_1
  CVector principal() const { return std::sqrt(largest_eigenvalue()) * vectors_.col(values_.size() - 1); }
  /// Draw w ~ CN(0, X).
  CVector draw(Rng& rng) const {
    CVector r(values_.size());
    for (auto& v : r) v = rng.complex_normal(1.0);
    return scale_ * r;
  }

private:
  RVector values_;
  CMatrix vectors_;
  CMatrix scale_;
  double ratio_ = 0.0;
};

/// Smallest s >= 0 such that s * w^H A_i w >= floor_i for all i; infinity if
/// some floor cannot be met along w.
inline double min_scale(const CVector& w, std::span<const QuadraticFloor> floors) {
  double s = 0.0;
  for (const auto& f : floors) {
    if (f.floor <= 0.0) continue;
    const double g = (w.adjoint() * f.a * w)(0, 0).real();
    if (!(g > 0.0)) return std::numeric_limits<double>::infinity();
    s = std::max(s, f.floor / g);
  }
  return s;
}

/// Candidate beams are drawn with covariance X*, each rescaled minimally to
/// satisfy every floor; the least-power candidate wins.
inline Rank1Beam extract_rank1(const CMatrix& x, std::span<const QuadraticFloor> floors, const RandomizationOptions& opt = {}) {
  require(opt.candidates >= 0, "candidate count must be nonnegative");
  for (const auto& f : floors) require(f.a.rows() == x.rows() && f.a.cols() == x.cols(), "floor matrix dimension mismatch");
  const GaussianSampler sampler(x);
  Rank1Beam best;
  best.power = std::numeric_limits<double>::infinity();
  auto consider = [&](CVector w, int index) {
    const double s = min_scale(w, floors);
    if (!std::isfinite(s)) return;
    w *= std::sqrt(s);
    const double power = w.squaredNorm();
    if (power < best.power) best = {std::move(w), power, false, index};
  };
  consider(sampler.principal(), 0);
  if (std::isfinite(best.power) && sampler.eigen_ratio() < opt.rank1_threshold) {
    best.exact_rank1 = true;
    return best;
  }
  Rng rng(opt.seed);
  for (int i = 1; i <= opt.candidates; ++i) consider(sampler.draw(rng), i);
  if (!std::isfinite(best.power)) throw SolverFailure("no randomized candidate satisfies the constraints");
  return best;
}

/// Multicast beam with ||w||^2 = power_budget maximizing min_k |h_k^H w|^2.
inline Rank1Beam extract_rank1_max_min(const CMatrix& x, std::span<const CVector> channels, double power_budget,
                                       const RandomizationOptions& opt = {}) {
  require(!channels.empty(), "need at least one channel");
  require(power_budget > 0.0, "power budget must be positive");
  const GaussianSampler sampler(x);
  Rank1Beam best;
  double best_gain = -1.0;
  auto consider = [&](CVector w, int index) {
    const double n2 = w.squaredNorm();
    if (!(n2 > 0.0)) return;
    w *= std::sqrt(power_budget / n2);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& h : channels) worst = std::min(worst, gain(h, w));
    if (worst > best_gain) {
      best_gain = worst;
      best = {std::move(w), power_budget, false, index};
    }
  };
  consider(sampler.principal(), 0);
  if (best_gain >= 0.0 && sampler.eigen_ratio() < opt.rank1_threshold) {
    best.exact_rank1 = true;
    return best;
  }
  Rng rng(opt.seed);
  for (int i = 1; i <= opt.candidates; ++i) consider(sampler.draw(rng), i);
  if (best_gain < 0.0) throw SolverFailure("relaxed solution is zero; no beam direction available");
  return best;
}

/// Minimum powers that give every user SINR equal to its floor with fixed unit
/// directions (columns of `directions`). Empty result when no nonnegative
/// solution exists.
inline std::vector<double> min_power_for_sinr(const ChannelMatrix& h, const CMatrix& directions,
                                              std::span<const double> floors, double noise_power) {
  const int k_users = h.users();
  const CMatrix g = h.stacked() * directions;
  RMatrix f(k_users, k_users);
  RVector rhs(k_users);
  for (int k = 0; k < k_users; ++k) {
    const double z = floors[static_cast<std::size_t>(k)];
    for (int l = 0; l < k_users; ++l) f(k, l) = l == k ? std::norm(g(k, k)) : -z * std::norm(g(k, l));
    rhs(k) = z * noise_power;
  }
  const RVector p = f.fullPivLu().solve(rhs);
  if (!p.allFinite() || (f * p - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) return {};
  std::vector<double> out(static_cast<std::size_t>(k_users));
  for (int k = 0; k < k_users; ++k) {
    if (p(k) < -1e-12 * (1.0 + p.cwiseAbs().maxCoeff())) return {};
    out[static_cast<std::size_t>(k)] = std::max(p(k), 0.0);
  }
  return out;
}

struct UnicastBeams {
  CMatrix beams;  // L x K
  double total_power = 0.0;
  bool exact_rank1 = false;
  int candidate = 0;
};

namespace detail {

template <class Score>
UnicastBeams randomize_unicast(std::span<const CMatrix> blocks, const ChannelMatrix& h, const RandomizationOptions& opt,
                               Score&& score) {
  require(static_cast<int>(blocks.size()) == h.users(), "one relaxed block per user is required");
  std::vector<GaussianSampler> samplers;
  samplers.reserve(blocks.size());
  bool all_rank1 = true;
  for (const auto& b : blocks) {
    samplers.emplace_back(b);
    all_rank1 = all_rank1 && samplers.back().eigen_ratio() < opt.rank1_threshold;
  }
  const int k_users = h.users();
  UnicastBeams best;
  double best_score = -std::numeric_limits<double>::infinity();
  CMatrix dirs(h.antennas(), k_users);
  auto consider = [&](int index) {
    for (int k = 0; k < k_users; ++k) {
      const double n = dirs.col(k).norm();
      if (!(n > 0.0)) return;
      dirs.col(k) /= n;
    }
    auto [ok, beams, value] = score(dirs);
    if (ok && value > best_score) {
      best_score = value;
      best = {std::move(beams), 0.0, false, index};
    }
  };
  for (int k = 0; k < k_users; ++k) dirs.col(k) = samplers[static_cast<std::size_t>(k)].principal();
  consider(0);
  if (best_score > -std::numeric_limits<double>::infinity() && all_rank1) {
    best.exact_rank1 = true;
  } else {
    Rng rng(opt.seed);
    for (int i = 1; i <= opt.candidates; ++i) {
      for (int k = 0; k < k_users; ++k) dirs.col(k) = samplers[static_cast<std::size_t>(k)].draw(rng);
      consider(i);
    }
  }
  if (best_score == -std::numeric_limits<double>::infinity())
    throw SolverFailure("no randomized candidate satisfies the SINR constraints");
  best.total_power = best.beams.squaredNorm();
  return best;
}

}  // namespace detail

/// Unicast beams meeting every SINR floor with least total power.
inline UnicastBeams extract_unicast_beams(std::span<const CMatrix> blocks, const ChannelMatrix& h,
                                          std::span<const double> floors, double noise_power,
                                          const RandomizationOptions& opt = {}) {
  require(static_cast<int>(floors.size()) == h.users(), "one SINR floor per user is required");
  return detail::randomize_unicast(blocks, h, opt, [&](const CMatrix& dirs) {
    auto p = min_power_for_sinr(h, dirs, floors, noise_power);
    CMatrix beams = dirs;
    if (p.empty()) return std::tuple{false, beams, 0.0};
    double total = 0.0;
    for (int k = 0; k < h.users(); ++k) {
      beams.col(k) *= std::sqrt(p[static_cast<std::size_t>(k)]);
      total += p[static_cast<std::size_t>(k)];
    }
    return std::tuple{true, beams, -total};
  });
}

/// Unicast beams reaching a common SINR target within `power_budget`, then
/// scaled up to use the whole budget; the candidate with the largest
/// resulting minimum SINR wins.
inline UnicastBeams extract_unicast_beams_max_min(std::span<const CMatrix> blocks, const ChannelMatrix& h,
                                                  double sinr_target, double noise_power, double power_budget,
                                                  const RandomizationOptions& opt = {}) {
  require(power_budget > 0.0, "power budget must be positive");
  const std::vector<double> floors(static_cast<std::size_t>(h.users()), sinr_target);
  return detail::randomize_unicast(blocks, h, opt, [&](const CMatrix& dirs) {
    auto p = min_power_for_sinr(h, dirs, floors, noise_power);
    CMatrix beams = dirs;
    double total = 0.0;
    for (double x : p) total += x;
    if (p.empty() || total > power_budget * (1.0 + 1e-9) || !(total > 0.0)) return std::tuple{false, beams, 0.0};
    const double up = power_budget / total;
    for (int k = 0; k < h.users(); ++k) beams.col(k) *= std::sqrt(p[static_cast<std::size_t>(k)] * up);
    const auto s = unicast_sinrs(h, beams, noise_power);
    double worst = std::numeric_limits<double>::infinity();
    for (double x : s) worst = std::min(worst, x);
    return std::tuple{true, beams, worst};
  });
}

}  // namespace edgecache::sdp
