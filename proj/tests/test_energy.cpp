#include <cmath>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "edgecache/energy.hpp"

using namespace edgecache;

namespace {

ChannelMatrix from_columns(const CMatrix& c) {
  ChannelMatrix h;
  h.columns = c;
  return h;
}

// Orthogonal channels with the given norms: h_k = norm_k * e_k in C^L.
ChannelMatrix orthogonal(std::vector<double> norms, int antennas) {
  CMatrix c = CMatrix::Zero(antennas, static_cast<Eigen::Index>(norms.size()));
  for (std::size_t k = 0; k < norms.size(); ++k) c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = norms[k];
  return from_columns(c);
}

// EE written from its definition: K Q over backhaul energy plus sum of
// (bits per user) * power / rate.
double ee_by_definition(const PrecodingSolution& p, double mu_frac, double mb_frac, double q, double eta) {
  const int k = static_cast<int>(p.rates.size());
  double e = eta * k * q * (1.0 - mu_frac) * (1.0 - mb_frac);
  for (int i = 0; i < k; ++i) e += q * (1.0 - mu_frac) * p.beams.col(i).squaredNorm() / p.rates[static_cast<std::size_t>(i)];
  return k * q / e;
}

double zf_min_budget_for_test(const ChannelMatrix& h, const QosTargets& qos) {
  const CMatrix d = zf_directions(h);
  double s = 0.0;
  for (int k = 0; k < h.users(); ++k) s += qos.sinr_floor[static_cast<std::size_t>(k)] * d.col(k).squaredNorm();
  return s;
}

double golden_min(const std::function<double(double)>& f, double a, double b) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  for (int i = 0; i < 200; ++i) {
    if (f(c) < f(d)) b = d;
    else a = c;
    c = b - r * (b - a);
    d = a + r * (b - a);
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST(EeUncoded, MatchesDefinition) {
  const auto h = sample_channels(3, 5, 1.0, 4);
  PrecodingSolution p;
  p.beams = sample_channels(3, 5, 0.5, 5).columns;
  p.rates = unicast_rates(h, p.beams, 1.0, 1e6);
  const LibraryConfig lib{100, 1000000};
  const auto e = ee_uncoded(p, {40, 30}, lib, 2e-6);
  ASSERT_TRUE(e.ee_bits_per_joule);
  EXPECT_NEAR(*e.ee_bits_per_joule, ee_by_definition(p, 0.3, 0.4, 1e6, 2e-6), 1e-12 * *e.ee_bits_per_joule);
}

TEST(EeUncoded, FullUserCacheGivesInfiniteEe) {
  PrecodingSolution p;
  p.beams = CMatrix::Zero(4, 2);
  p.rates = {0.0, 0.0};
  const auto e = ee_uncoded(p, {0, 10}, {10, 100}, 1e-6);
  EXPECT_TRUE(e.infinite_ee());
  EXPECT_EQ(e.total_joules, 0.0);
}

TEST(EeUncoded, FreeBackhaulIgnoresBsCache) {
  const auto h = sample_channels(3, 4, 1.0, 8);
  PrecodingSolution p;
  p.beams = zf_directions(h);
  p.rates = unicast_rates(h, p.beams, 1.0, 1e6);
  const LibraryConfig lib{100, 1000};
  const double base = *ee_uncoded(p, {0, 20}, lib, 0.0).ee_bits_per_joule;
  for (double mb : {10.0, 50.0, 100.0}) EXPECT_DOUBLE_EQ(*ee_uncoded(p, {mb, 20}, lib, 0.0).ee_bits_per_joule, base);
}

TEST(EeUncoded, InvariantToFileSize) {
  const auto h = sample_channels(4, 6, 1.0, 2);
  PrecodingSolution p;
  p.beams = sample_channels(4, 6, 1.0, 3).columns;
  p.rates = unicast_rates(h, p.beams, 1.0, 1e6);
  const double a = *ee_uncoded(p, {30, 20}, {100, 1000}, 1e-6).ee_bits_per_joule;
  const double b = *ee_uncoded(p, {30, 20}, {100, 7000000}, 1e-6).ee_bits_per_joule;
  EXPECT_NEAR(a, b, 1e-12 * a);
}

TEST(ZfEe, PipelineMatchesClosedForm) {
  const LibraryConfig lib{1000, 10000000};
  const CacheSizes cache{400, 250};
  const std::vector<double> gamma{1e6, 2e6, 1.5e6, 2e6};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto h = sample_channels(4, 7, 1.0, seed);
    const double noise = 0.3;
    const auto qos = uncoded_qos(gamma, cache, lib, 1e6);
    const auto d = zf_ee_max(h, qos, cache, lib, noise, 1e6, 1e-6);
    // Closed form assembled here from its ingredients.
    const CMatrix dirs = zf_directions(h);
    double s = 0.0;
    for (int k = 0; k < 4; ++k) {
      const double gbar = 0.75 * gamma[static_cast<std::size_t>(k)];
      s += noise * (std::exp2(gbar / 1e6) - 1.0) * dirs.col(k).squaredNorm() / gbar;
    }
    const double expected = 4.0 / (0.75 * (1e-6 * 4 * 0.6 + s));
    ASSERT_TRUE(d.energy.ee_bits_per_joule);
    EXPECT_NEAR(*d.energy.ee_bits_per_joule, expected, 1e-10 * expected);
    EXPECT_NEAR(*zf_closed_form_ee(zf_gains(dirs), qos, noise, cache, lib, 1e-6), expected, 1e-12 * expected);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(d.precoding.rates[static_cast<std::size_t>(k)], qos.effective_rate[static_cast<std::size_t>(k)], 1e-6 * qos.effective_rate[static_cast<std::size_t>(k)]);
  }
}

TEST(ZfEe, UnitCaseAndIdentityChannel) {
  const LibraryConfig lib{10, 1000};
  const std::vector<double> gamma(3, 1e6);
  const auto qos = uncoded_qos(gamma, {0, 0}, lib, 1e6);
  EXPECT_DOUBLE_EQ(qos.sinr_floor[0], 1.0);
  const auto h = from_columns(CMatrix::Identity(3, 3));
  const auto d = zf_ee_max(h, qos, {5, 0}, lib, 1.0, 1e6, 1e-6);
  for (double p : d.powers) EXPECT_DOUBLE_EQ(p, 1.0);
  const double expected = 3.0 / (1.0 * (1e-6 * 3 * 0.5 + 3.0 / 1e6));
  EXPECT_NEAR(*d.energy.ee_bits_per_joule, expected, 1e-12 * expected);
}

TEST(ZfEe, FloorPowerIsTheNumericalOptimum) {
  // Per-user energy Q' p a / (B log2(1 + p/sigma^2)) over p >= zeta sigma^2.
  const double a = 0.7, noise = 0.5, zeta = 3.0, b = 1e6;
  const auto energy = [&](double p) { return p * a / (b * std::log2(1.0 + p / noise)); };
  const double lo = zeta * noise;
  const double best = golden_min(energy, lo, 100.0 * lo);
  EXPECT_NEAR(best, lo, 1e-6 * lo);
  for (double p = lo; p < 50 * lo; p *= 1.5) EXPECT_LT(energy(p), energy(p * 1.5));
}

TEST(ZfEe, IllConditionedChannelIsReported) {
  CMatrix c = sample_channels(2, 3, 1.0, 1).columns;
  c.col(1) = c.col(0);
  const std::vector<double> gamma(2, 1e6);
  const LibraryConfig lib{10, 10};
  EXPECT_THROW(zf_ee_max(from_columns(c), uncoded_qos(gamma, {0, 0}, lib, 1e6), {0, 0}, lib, 1.0, 1e6, 1e-6),
               IllConditionedChannel);
}

TEST(SdrUncoded, SingleUserMatchedFilter) {
  const auto h = sample_channels(1, 4, 1.0, 6);
  const std::vector<double> gamma{2e6};
  const auto qos = uncoded_qos(gamma, {0, 0}, {10, 1}, 1e6);
  const auto d = sdr_ee_max_uncoded(h, qos, 0.5, 1e6);
  const double expected = 3.0 * 0.5 / h.user(0).squaredNorm();
  EXPECT_NEAR(d.precoding.total_power(), expected, 1e-7 * expected);
  EXPECT_NEAR(d.sdp_power, expected, 1e-7 * expected);
  // Beam parallel to h.
  const double cos2 = gain(h.user(0), d.precoding.beams.col(0)) / (h.user(0).squaredNorm() * d.precoding.power(0));
  EXPECT_NEAR(cos2, 1.0, 1e-9);
}

TEST(SdrUncoded, OrthogonalChannelsEqualZf) {
  const auto h = orthogonal({1.0, 2.0, 0.5}, 5);
  const std::vector<double> gamma{1e6, 2e6, 3e6};
  const auto qos = uncoded_qos(gamma, {0, 0}, {10, 1}, 1e6);
  const auto d = sdr_ee_max_uncoded(h, qos, 1.0, 1e6);
  const std::vector<double> n2{1.0, 4.0, 0.25};
  for (int k = 0; k < 3; ++k) {
    const double zf = qos.sinr_floor[static_cast<std::size_t>(k)] / n2[static_cast<std::size_t>(k)];
    EXPECT_NEAR(d.precoding.power(k), zf, 1e-6 * zf);
  }
  EXPECT_TRUE(d.exact_rank1);
}

TEST(SdrUncoded, NoMorePowerThanZfAndMeetsQos) {
  const LibraryConfig lib{1000, 1};
  const std::vector<double> gamma(4, 2e6);
  const auto qos = uncoded_qos(gamma, {0, 200}, lib, 1e6);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto h = sample_channels(4, 6, 1.0, 40 + seed);
    const auto d = sdr_ee_max_uncoded(h, qos, 1.0, 1e6);
    const double zf_power = zf_min_budget_for_test(h, qos);
    EXPECT_LE(d.sdp_power, zf_power * (1.0 + 1e-8));
    EXPECT_GE(d.precoding.total_power(), d.sdp_power * (1.0 - 1e-7));
    for (int k = 0; k < 4; ++k) EXPECT_GE(d.precoding.rates[static_cast<std::size_t>(k)], qos.effective_rate[0] * (1.0 - 1e-6));
  }
}

TEST(SdrCoded, SingleMemberAndDuplicates) {
  const auto h1 = sample_channels(1, 4, 1.0, 3);
  const double floor = std::exp2(1.5) - 1.0;
  const auto single = sdr_ee_max_coded(h1, 1u, 1.5e6, 0.8, 1e6);
  const double expected = 0.8 * floor / h1.user(0).squaredNorm();
  EXPECT_NEAR(single.beam.power(), expected, 1e-7 * expected);
  CMatrix c(4, 2);
  c.col(0) = h1.user(0);
  c.col(1) = h1.user(0);
  const auto dup = sdr_ee_max_coded(from_columns(c), 3u, 1.5e6, 0.8, 1e6);
  EXPECT_NEAR(dup.beam.power(), expected, 1e-6 * expected);
}

TEST(SdrCoded, PowerScalesInverselyWithChannelGain) {
  const auto h = sample_channels(3, 4, 1.0, 77);
  ChannelMatrix scaled = h;
  scaled.columns *= 3.0;
  const auto a = sdr_ee_max_coded(h, 7u, 1e6, 1.0, 1e6);
  const auto b = sdr_ee_max_coded(scaled, 7u, 1e6, 1.0, 1e6);
  EXPECT_NEAR(b.sdp_power, a.sdp_power / 9.0, 1e-6 * a.sdp_power);
  EXPECT_GE(a.beam.rate, 1e6 * (1.0 - 1e-6));
  EXPECT_GE(b.beam.rate, 1e6 * (1.0 - 1e-6));
}

TEST(EeCoded, SingleSubsetWhenAllButOneFileCached) {
  // K=3, N=3, M_u=2: m = 2 = K-1, one subset with every user.
  const LibraryConfig lib{3, 900};
  const CacheSizes cache{1, 2};
  auto plan = coded_plan(3, cache, lib);
  ASSERT_EQ(plan.sessions.size(), 1u);
  ASSERT_EQ(plan.sessions[0].m, 2);
  CVector w = CVector::Constant(4, Complex(0.5, 0.0));
  plan.sessions[0].beams.push_back({7u, w, 2e6});
  const double q_ac = 900.0 / 3.0, q_bh = q_ac * (1.0 - std::pow(1.0 / 3.0, 3));
  const double expected = 3 * 900.0 / (1e-6 * q_bh + q_ac * w.squaredNorm() / 2e6);
  EXPECT_NEAR(*ee_coded(plan, cache, lib, 1e-6).ee_bits_per_joule, expected, 1e-12 * expected);
}

TEST(EeCoded, EqualSubsetsMatchClosedForm) {
  const LibraryConfig lib{1000, 5000};
  const double eta = 3e-6, p = 0.8, r = 1.3e6;
  for (int k : {4, 5, 8})
    for (int m = 0; m < k; ++m) {
      const CacheSizes cache{400, m * lib.n() / k};
      auto plan = coded_plan(k, cache, lib);
      ASSERT_EQ(plan.sessions.size(), 1u);
      for (SubsetMask s : subsets_of_size(k, m + 1)) plan.sessions[0].beams.push_back({s, CVector::Constant(1, std::sqrt(p)), r});
      const double mu = cache.user_fraction(lib);
      const double expected = (1.0 + k * mu) / ((1.0 - mu) * (eta * (1.0 - std::pow(0.4, k * mu + 1.0)) + p / r));
      EXPECT_NEAR(*ee_coded(plan, cache, lib, eta).ee_bits_per_joule, expected, 1e-10 * expected) << k << " " << m;
    }
}

TEST(EeCoded, MissingSubsetIsAnError) {
  const LibraryConfig lib{4, 12};
  const CacheSizes cache{0, 1};
  auto plan = coded_plan(4, cache, lib);
  for (SubsetMask s : subsets_of_size(4, 2))
    if (s != 3u) plan.sessions[0].beams.push_back({s, CVector::Ones(1), 1.0});
  EXPECT_THROW(ee_coded(plan, cache, lib, 1e-6), InvalidArgument);
}

TEST(EeCoded, FileSizeInvariance) {
  const auto h = sample_channels(4, 5, 1.0, 9);
  const std::vector<double> gamma(4, 1e6);
  const CacheSizes cache{50, 37};
  const auto d = coded_ee_design(h, gamma, cache, {100, 1000}, 1.0, 1e6, 1e-6);
  auto scaled = ee_coded(d.plan, cache, {100, 9000000}, 1e-6);
  EXPECT_NEAR(*scaled.ee_bits_per_joule, *d.energy.ee_bits_per_joule, 1e-12 * *d.energy.ee_bits_per_joule);
}

TEST(EeCoded, TwoSessionsWhenCacheIsFractional) {
  const auto h = sample_channels(4, 5, 1.0, 19);
  const std::vector<double> gamma(4, 1e6);
  const LibraryConfig lib{100, 1000};
  const CacheSizes cache{20, 37};  // K M_u / N = 1.48
  const auto d = coded_ee_design(h, gamma, cache, lib, 1.0, 1e6, 1e-6);
  ASSERT_EQ(d.plan.sessions.size(), 2u);
  EXPECT_EQ(d.plan.sessions[0].beams.size(), 6u);
  EXPECT_EQ(d.plan.sessions[1].beams.size(), 4u);
  // Energy rebuilt from the beams.
  const auto t = coded_throughput(4, cache, lib);
  double e = 1e-6 * t.backhaul_bits;
  for (const auto& s : d.plan.sessions) {
    const double bits = s.fraction * lib.q() / static_cast<double>(binomial(4, s.m));
    for (const auto& b : s.beams) {
      EXPECT_GE(b.rate, coded_session_rate(1e6, 4, s.m) * (1.0 - 1e-6));
      e += bits * b.power() / b.rate;
    }
  }
  EXPECT_NEAR(*d.energy.ee_bits_per_joule, 4 * lib.q() / e, 1e-10 * 4 * lib.q() / e);
}

TEST(EeCoded, NoUserCacheStillFinite) {
  const auto h = sample_channels(3, 4, 1.0, 1);
  const std::vector<double> gamma(3, 1e6);
  const auto d = coded_ee_design(h, gamma, {0, 0}, {10, 100}, 1.0, 1e6, 0.0);
  ASSERT_TRUE(d.energy.ee_bits_per_joule);
  EXPECT_GT(*d.energy.ee_bits_per_joule, 0.0);
}

TEST(AnalyticComparison, FreeBackhaulEqualPowers) {
  const int k = 8;
  for (double mu = 0.0; mu < 0.99; mu += 0.01) {
    const auto r = analytic_comparison(CachingRegime::free_backhaul, k, mu * 1000, 1000, 1.0, 1.0, 2e6, 1e-6);
    const double boundary = (k - 1.0) / k;
    if (mu < boundary - 1e-9) EXPECT_EQ(r.winner, Winner::uncoded) << mu;
    else if (mu > boundary + 1e-9) EXPECT_EQ(r.winner, Winner::coded) << mu;
  }
}

TEST(AnalyticComparison, ThresholdIsATie) {
  const double n = 1000, p_unc = 2.0, p_cod = 0.6;
  const int k = 8;
  const double thr = (p_cod / p_unc - 1.0 / k) * n;
  const auto at = analytic_comparison(CachingRegime::free_backhaul, k, thr, n, p_unc, p_cod, 2e6, 1e-6);
  EXPECT_EQ(at.winner, Winner::tie);
  EXPECT_NEAR(at.threshold_user_cache_files, thr, 1e-9);
  EXPECT_EQ(analytic_comparison(CachingRegime::free_backhaul, k, thr - 1, n, p_unc, p_cod, 2e6, 1e-6).winner, Winner::uncoded);
  EXPECT_EQ(analytic_comparison(CachingRegime::free_backhaul, k, thr + 1, n, p_unc, p_cod, 2e6, 1e-6).winner, Winner::coded);
}

TEST(AnalyticComparison, NoBsCacheFavoursCoded) {
  const auto r = analytic_comparison(CachingRegime::no_bs_cache, 8, 500, 1000, 1.0, 1.0, 2e6, 1e-6);
  EXPECT_EQ(r.winner, Winner::coded);
  const double expected_unc = 1.0 / (0.5 * (1e-6 + 1.0 / (2e6 * 8)));
  EXPECT_NEAR(r.ee_uncoded, expected_unc, 1e-12 * expected_unc);
  // The returned threshold separates the two regions.
  const double thr = r.threshold_user_cache_files;
  EXPECT_EQ(analytic_comparison(CachingRegime::no_bs_cache, 8, thr * 0.99, 1000, 1.0, 1.0, 2e6, 1e-6).winner, Winner::uncoded);
  EXPECT_EQ(analytic_comparison(CachingRegime::no_bs_cache, 8, thr * 1.01, 1000, 1.0, 1.0, 2e6, 1e-6).winner, Winner::coded);
}
