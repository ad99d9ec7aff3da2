#pragma once

// Backhaul and access throughputs of the two caching strategies, together with
// bit-level simulation oracles that execute the placement and delivery phases.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "edgecache/combinatorics.hpp"
#include "edgecache/error.hpp"
#include "edgecache/random.hpp"

namespace edgecache {

struct LibraryConfig {
  std::int64_t n_files = 1000;                // N
  std::int64_t file_size_bits = 10'000'000;   // Q

  void validate() const {
    require(n_files >= 1, "library must contain at least one file");
    require(file_size_bits >= 1, "file size must be at least one bit");
  }
  double n() const { return static_cast<double>(n_files); }
  double q() const { return static_cast<double>(file_size_bits); }
};

/// Cache capacities in units of whole files.
struct CacheSizes {
  double bs_cache_files = 0.0;    // M_b
  double user_cache_files = 0.0;  // M_u

  void validate(const LibraryConfig& lib) const {
    require(std::isfinite(bs_cache_files) && bs_cache_files >= 0.0 && bs_cache_files <= lib.n(),
            "BS cache size must lie in [0, N]");
    require(std::isfinite(user_cache_files) && user_cache_files >= 0.0 && user_cache_files <= lib.n(),
            "user cache size must lie in [0, N]");
  }
  double bs_fraction(const LibraryConfig& lib) const { return bs_cache_files / lib.n(); }
  double user_fraction(const LibraryConfig& lib) const { return user_cache_files / lib.n(); }
};

/// K*M_u/N split into integer part m and remainder delta.
struct CodedParams {
  int m = 0;
  double delta = 0.0;
};

struct Throughputs {
  double backhaul_bits = 0.0;
  double access_bits = 0.0;
};

/// Requested file per user; file indices are zero-based in [0, N).
struct RequestVector {
  std::vector<std::int64_t> demands;
  int users() const { return static_cast<int>(demands.size()); }
};

inline void validate_users(int users) {
  require(users >= 1 && users <= kMaxUsers, "user count must lie in [1, 32]");
}

inline CodedParams coded_params(int users, const CacheSizes& cache, const LibraryConfig& lib) {
  validate_users(users);
  lib.validate();
  cache.validate(lib);
  const double x = users * cache.user_cache_files / lib.n();
  // Snap values that are integral up to rounding noise (e.g. 0.7 * 1000 files).
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, x)) return {static_cast<int>(nearest), 0.0};
  const double floor_x = std::floor(x);
  return {static_cast<int>(floor_x), x - floor_x};
}

inline Throughputs uncoded_throughput(int users, const CacheSizes& cache, const LibraryConfig& lib) {
  validate_users(users);
  lib.validate();
  cache.validate(lib);
  const double access = users * lib.q() * (1.0 - cache.user_fraction(lib));
  return {access * (1.0 - cache.bs_fraction(lib)), access};
}

/// Access and backhaul bits of one coded-delivery session with parameter m on
/// a sub-library whose files have `fraction` of the full size.
inline Throughputs coded_session_throughput(int users, int m, double fraction, double bs_prob, double q) {
  if (m >= users || fraction <= 0.0) return {0.0, 0.0};
  const double access = fraction * q * (users - m) / (m + 1.0);
  return {access * (1.0 - std::pow(bs_prob, m + 1)), access};
}

inline Throughputs coded_throughput(int users, const CacheSizes& cache, const LibraryConfig& lib) {
  const CodedParams cp = coded_params(users, cache, lib);
  const double p = cache.bs_fraction(lib);
  const Throughputs first = coded_session_throughput(users, cp.m, 1.0 - cp.delta, p, lib.q());
  const Throughputs second = coded_session_throughput(users, cp.m + 1, cp.delta, p, lib.q());
  return {first.backhaul_bits + second.backhaul_bits, first.access_bits + second.access_bits};
}

// ---------------------------------------------------------------------------
// Exact expected access throughput of uncoded caching. Counts request vectors
// by their number l of distinct files: N^K = sum_l a^K_l * N!/(N-l)!.

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

/// Table a[m][l] for 0 <= l <= m <= max_m with a^m_1 = a^m_m = 1 and
/// a^m_l = l*a^{m-1}_l + a^{m-1}_{l-1}. Row 0 is {1} by convention.
inline std::vector<std::vector<BigInt>> distinct_count_coefficients(int max_m) {
  require(max_m >= 0, "max_m must be nonnegative");
  std::vector<std::vector<BigInt>> a(static_cast<std::size_t>(max_m) + 1);
  a[0] = {BigInt(1)};
  for (int m = 1; m <= max_m; ++m) {
    auto& row = a[static_cast<std::size_t>(m)];
    const auto& prev = a[static_cast<std::size_t>(m) - 1];
    row.assign(static_cast<std::size_t>(m) + 1, BigInt(0));
    for (int l = 1; l <= m; ++l) {
      BigInt v = 0;
      if (l <= m - 1) v += BigInt(l) * prev[static_cast<std::size_t>(l)];
      v += prev[static_cast<std::size_t>(l) - 1];
      row[static_cast<std::size_t>(l)] = v;
    }
  }
  return a;
}

/// N!/(N-l)!
inline BigInt falling_factorial(std::int64_t n, int l) {
  BigInt r = 1;
  for (int i = 0; i < l; ++i) r *= BigInt(n - i);
  return r;
}

/// Exact E[number of distinct files among K uniform requests] as a rational.
inline BigRational expected_distinct_files_exact(int users, std::int64_t n_files) {
  require(users >= 1 && n_files >= 1, "need at least one user and one file");
  const auto a = distinct_count_coefficients(users);
  BigInt numerator = 0;
  const auto& row = a[static_cast<std::size_t>(users)];
  for (int l = 1; l <= users && l <= n_files; ++l)
    numerator += BigInt(l) * row[static_cast<std::size_t>(l)] * falling_factorial(n_files, l);
  BigInt denominator = boost::multiprecision::pow(BigInt(n_files), static_cast<unsigned>(users));
  return BigRational(numerator, denominator);
}

/// Same quantity in log-domain floating point for sizes past the exact range.
inline double expected_distinct_files_log(int users, std::int64_t n_files) {
  std::vector<long double> log_a(static_cast<std::size_t>(users) + 1, -INFINITY);
  // Recurrence in log space: a^m_l = l a^{m-1}_l + a^{m-1}_{l-1}.
  std::vector<long double> prev{0.0L};  // log a^0_0 = 0
  for (int m = 1; m <= users; ++m) {
    std::vector<long double> row(static_cast<std::size_t>(m) + 1, -INFINITY);
    for (int l = 1; l <= m; ++l) {
      const long double t1 = l <= m - 1 ? std::log(static_cast<long double>(l)) + prev[static_cast<std::size_t>(l)] : -INFINITY;
      const long double t2 = prev[static_cast<std::size_t>(l) - 1];
      const long double hi = std::max(t1, t2);
      row[static_cast<std::size_t>(l)] = hi == -INFINITY ? hi : hi + std::log1p(std::exp(std::min(t1, t2) - hi));
    }
    prev = std::move(row);
  }
  log_a = prev;
  const long double log_n = std::log(static_cast<long double>(n_files));
  long double sum = 0.0L;
  long double log_fall = 0.0L;
  for (int l = 1; l <= users && l <= n_files; ++l) {
    log_fall += std::log(static_cast<long double>(n_files - l + 1));
    sum += l * std::exp(log_a[static_cast<std::size_t>(l)] + log_fall - users * log_n);
  }
  return static_cast<double>(sum);
}

inline constexpr int kExactMaxUsers = 12;
inline constexpr std::int64_t kExactMaxFiles = 10'000;

/// Expected access bits when each distinct requested file is delivered once:
/// Q (1 - M_u/N) E[#distinct files].
inline double exact_uncoded_access_throughput(int users, const CacheSizes& cache, const LibraryConfig& lib) {
  validate_users(users);
  lib.validate();
  cache.validate(lib);
  double distinct;
  if (users <= kExactMaxUsers && lib.n_files <= kExactMaxFiles)
    distinct = static_cast<double>(expected_distinct_files_exact(users, lib.n_files));
  else
    distinct = expected_distinct_files_log(users, lib.n_files);
  return lib.q() * (1.0 - cache.user_fraction(lib)) * distinct;
}

// ---------------------------------------------------------------------------
// Bit-level oracles.

/// Running mean and standard error (Welford).
class RunningStat {
public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::int64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std_error() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }
  double min() const { return min_; }
  double max() const { return max_; }
  void track(double x) {
    add(x);
    min_ = std::min(min_, x);
    max_ = std::max(max_, x);
  }

private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double min_ = INFINITY;
  double max_ = -INFINITY;
};

struct ThroughputEstimate {
  Throughputs mean;
  Throughputs std_error;
  std::int64_t trials = 0;
  /// Coded oracles only: every user recovered its requested file in every trial.
  bool decoded_ok = true;
};

/// Monte-Carlo execution of uncoded caching: per-bit BS placement with
/// probability M_b/N, each user caching ceil(M_u Q / N) random bits of every
/// file, uniform independent requests, and unicast of each user's missing bits.
inline ThroughputEstimate oracle_uncoded(int users, const CacheSizes& cache, const LibraryConfig& lib,
                                         std::int64_t trials, std::uint64_t seed) {
  validate_users(users);
  lib.validate();
  cache.validate(lib);
  require(trials >= 1, "trials must be positive");
  const auto q = lib.file_size_bits;
  const auto cached = std::min<std::int64_t>(q, static_cast<std::int64_t>(std::ceil(cache.user_fraction(lib) * lib.q() - 1e-9)));
  const double p = cache.bs_fraction(lib);

  Rng rng(seed);
  RunningStat access_stat, backhaul_stat;
  std::vector<std::int64_t> demands(static_cast<std::size_t>(users));
  std::vector<std::int64_t> positions(static_cast<std::size_t>(q));
  std::unordered_map<std::int64_t, std::vector<std::uint8_t>> bs_bits;

  for (std::int64_t t = 0; t < trials; ++t) {
    bs_bits.clear();
    for (auto& d : demands) d = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(lib.n_files)));
    double access = 0.0, backhaul = 0.0;
    for (int k = 0; k < users; ++k) {
      auto [it, inserted] = bs_bits.try_emplace(demands[static_cast<std::size_t>(k)]);
      auto& bs = it->second;
      if (inserted) {
        bs.resize(static_cast<std::size_t>(q));
        for (auto& b : bs) b = rng.bernoulli(p) ? 1 : 0;
      }
      // Random subset of `cached` positions via a partial Fisher-Yates shuffle.
      std::iota(positions.begin(), positions.end(), std::int64_t{0});
      std::int64_t missing_not_at_bs = 0;
      for (auto b : bs) missing_not_at_bs += b ? 0 : 1;
      for (std::int64_t i = 0; i < cached; ++i) {
        const auto j = i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(q - i)));
        std::swap(positions[static_cast<std::size_t>(i)], positions[static_cast<std::size_t>(j)]);
        if (!bs[static_cast<std::size_t>(positions[static_cast<std::size_t>(i)])]) --missing_not_at_bs;
      }
      access += static_cast<double>(q - cached);
      backhaul += static_cast<double>(missing_not_at_bs);
    }
    access_stat.add(access);
    backhaul_stat.add(backhaul);
  }
  return {{backhaul_stat.mean(), access_stat.mean()},
          {backhaul_stat.std_error(), access_stat.std_error()},
          trials,
          true};
}

namespace detail {

struct SessionCounts {
  double access = 0.0;
  double backhaul = 0.0;
  bool decoded = true;
};

/// One placement/delivery round of the coded scheme with parameter m on files
/// of `file_bits` bits. Subfiles are indexed by m-subsets T; user k caches
/// F_{f,T} for every T containing k; every (m+1)-subset S receives
/// X_S = XOR_{s in S} F_{d_s, S\{s}}.
inline SessionCounts run_coded_session(int users, int m, std::int64_t file_bits, double bs_prob,
                                       const std::vector<std::int64_t>& demands, Rng& rng) {
  SessionCounts out;
  if (m >= users || file_bits <= 0) return out;
  const auto tags = subsets_of_size(users, m);
  std::unordered_map<SubsetMask, std::size_t> tag_index;
  for (std::size_t i = 0; i < tags.size(); ++i) tag_index.emplace(tags[i], i);
  const auto n_sub = static_cast<std::int64_t>(tags.size());
  const std::int64_t sub = (file_bits + n_sub - 1) / n_sub;  // zero-pad the tail
  const std::int64_t padded = sub * n_sub;

  // Content and BS membership of every requested file. Padding bits are known
  // zeros and never need the backhaul.
  struct FileState {
    std::vector<std::uint8_t> bits;
    std::vector<std::uint8_t> at_bs;
  };
  std::unordered_map<std::int64_t, FileState> files;
  for (auto d : demands) {
    auto [it, inserted] = files.try_emplace(d);
    if (!inserted) continue;
    auto& f = it->second;
    f.bits.assign(static_cast<std::size_t>(padded), 0);
    f.at_bs.assign(static_cast<std::size_t>(padded), 1);
    for (std::int64_t i = 0; i < file_bits; ++i) {
      f.bits[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rng.next_u64() & 1u);
      f.at_bs[static_cast<std::size_t>(i)] = rng.bernoulli(bs_prob) ? 1 : 0;
    }
  }
  auto subfile_offset = [&](SubsetMask tag) { return static_cast<std::int64_t>(tag_index.at(tag)) * sub; };

  // Reassembled files per user: start with cached subfiles, fill from deliveries.
  std::vector<std::vector<std::uint8_t>> recovered(static_cast<std::size_t>(users));
  std::vector<std::vector<std::uint8_t>> have(static_cast<std::size_t>(users));
  for (int k = 0; k < users; ++k) {
    const auto& f = files.at(demands[static_cast<std::size_t>(k)]);
    recovered[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(padded), 0);
    have[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(n_sub), 0);
    for (std::size_t i = 0; i < tags.size(); ++i) {
      if (!(tags[i] & (SubsetMask{1} << k))) continue;
      std::copy_n(f.bits.begin() + static_cast<std::ptrdiff_t>(i) * sub, sub,
                  recovered[static_cast<std::size_t>(k)].begin() + static_cast<std::ptrdiff_t>(i) * sub);
      have[static_cast<std::size_t>(k)][i] = 1;
    }
  }

  std::vector<std::uint8_t> message(static_cast<std::size_t>(sub));
  for (SubsetMask s : subsets_of_size(users, m + 1)) {
    const auto members = subset_members(s);
    std::fill(message.begin(), message.end(), 0);
    for (std::int64_t j = 0; j < sub; ++j) {
      bool all_at_bs = true;
      std::uint8_t x = 0;
      for (int member : members) {
        const auto& f = files.at(demands[static_cast<std::size_t>(member)]);
        const auto pos = static_cast<std::size_t>(subfile_offset(s & ~(SubsetMask{1} << member)) + j);
        x ^= f.bits[pos];
        all_at_bs = all_at_bs && f.at_bs[pos];
      }
      message[static_cast<std::size_t>(j)] = x;
      if (!all_at_bs) out.backhaul += 1.0;
    }
    out.access += static_cast<double>(sub);

    // Each member cancels the other members' subfiles using its cache.
    for (int k : members) {
      const SubsetMask want = s & ~(SubsetMask{1} << k);
      const auto want_offset = subfile_offset(want);
      for (std::int64_t j = 0; j < sub; ++j) {
        std::uint8_t x = message[static_cast<std::size_t>(j)];
        for (int other : members) {
          if (other == k) continue;
          const auto& f = files.at(demands[static_cast<std::size_t>(other)]);
          x ^= f.bits[static_cast<std::size_t>(subfile_offset(s & ~(SubsetMask{1} << other)) + j)];
        }
        recovered[static_cast<std::size_t>(k)][static_cast<std::size_t>(want_offset + j)] = x;
      }
      have[static_cast<std::size_t>(k)][tag_index.at(want)] = 1;
    }
  }

  for (int k = 0; k < users; ++k) {
    const auto& f = files.at(demands[static_cast<std::size_t>(k)]);
    const bool complete = std::all_of(have[static_cast<std::size_t>(k)].begin(), have[static_cast<std::size_t>(k)].end(),
                                      [](std::uint8_t h) { return h != 0; });
    out.decoded = out.decoded && complete && recovered[static_cast<std::size_t>(k)] == f.bits;
  }
  return out;
}

}  // namespace detail

/// Bit-level execution of coded caching with integer parameter m.
inline ThroughputEstimate oracle_coded(int users, const LibraryConfig& lib, int m, double bs_cache_prob,
                                       std::int64_t trials, std::uint64_t seed) {
  validate_users(users);
  lib.validate();
  require(m >= 0, "m must be nonnegative");
  require(m < users, "coded oracle requires m < K");
  require(bs_cache_prob >= 0.0 && bs_cache_prob <= 1.0, "BS cache probability must lie in [0, 1]");
  require(trials >= 1, "trials must be positive");
  Rng rng(seed);
  RunningStat access_stat, backhaul_stat;
  bool ok = true;
  std::vector<std::int64_t> demands(static_cast<std::size_t>(users));
  for (std::int64_t t = 0; t < trials; ++t) {
    for (auto& d : demands) d = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(lib.n_files)));
    const auto c = detail::run_coded_session(users, m, lib.file_size_bits, bs_cache_prob, demands, rng);
    access_stat.add(c.access);
    backhaul_stat.add(c.backhaul);
    ok = ok && c.decoded;
  }
  return {{backhaul_stat.mean(), access_stat.mean()}, {backhaul_stat.std_error(), access_stat.std_error()}, trials, ok};
}

/// Bits of each file assigned to the first (parameter m) and second
/// (parameter m+1) sessions of the time-splitting construction.
inline std::pair<std::int64_t, std::int64_t> split_file_bits(const CodedParams& cp, std::int64_t file_bits) {
  const double first = (1.0 - cp.delta) * static_cast<double>(file_bits);
  const double nearest = std::round(first);
  const auto q1 = static_cast<std::int64_t>(std::abs(first - nearest) <= 1e-9 * std::max(1.0, first) ? nearest : std::ceil(first));
  return {q1, file_bits - q1};
}

/// Coded caching for arbitrary M_u: the library is split at (1-delta)Q bits,
/// the first part served by the m-scheme and the rest by the (m+1)-scheme.
inline ThroughputEstimate oracle_coded_split(int users, const CacheSizes& cache, const LibraryConfig& lib,
                                             std::int64_t trials, std::uint64_t seed) {
  const CodedParams cp = coded_params(users, cache, lib);
  require(trials >= 1, "trials must be positive");
  const auto [q1, q2] = split_file_bits(cp, lib.file_size_bits);
  const double p = cache.bs_fraction(lib);
  Rng rng(seed);
  RunningStat access_stat, backhaul_stat;
  bool ok = true;
  std::vector<std::int64_t> demands(static_cast<std::size_t>(users));
  for (std::int64_t t = 0; t < trials; ++t) {
    for (auto& d : demands) d = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(lib.n_files)));
    const auto a = detail::run_coded_session(users, cp.m, q1, p, demands, rng);
    const auto b = detail::run_coded_session(users, cp.m + 1, q2, p, demands, rng);
    access_stat.add(a.access + b.access);
    backhaul_stat.add(a.backhaul + b.backhaul);
    ok = ok && a.decoded && b.decoded;
  }
  return {{backhaul_stat.mean(), access_stat.mean()}, {backhaul_stat.std_error(), access_stat.std_error()}, trials, ok};
}

}  // namespace edgecache
