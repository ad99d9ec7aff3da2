#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "edgecache/popularity.hpp"

using namespace edgecache;

namespace {

RequestVector demands_of(std::vector<std::int64_t> d) { return RequestVector{std::move(d)}; }

}  // namespace

TEST(Zipf, ReferenceProfiles) {
  const auto u = zipf_profile(5, 0.0, 3);
  for (double x : u.global) EXPECT_DOUBLE_EQ(x, 0.2);
  const auto z = zipf_profile(2, 1.0, 2);
  EXPECT_NEAR(z.global[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(z.global[1], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(z.per_user[1], z.global);
  for (double alpha : {0.3, 0.8, 1.5, 3.0}) {
    const auto p = zipf_profile(1000, alpha, 2);
    for (std::size_t i = 1; i < p.global.size(); ++i) EXPECT_LE(p.global[i], p.global[i - 1]);
    EXPECT_NEAR(std::accumulate(p.global.begin(), p.global.end(), 0.0), 1.0, 1e-12);
  }
  EXPECT_THROW(zipf_profile(10, -0.1, 2), InvalidArgument);
}

TEST(Profile, GlobalIsTheUserAverage) {
  const auto p = custom_profile({{0.5, 0.5, 0.0}, {0.1, 0.2, 0.7}});
  EXPECT_NEAR(p.global[0], 0.3, 1e-15);
  EXPECT_NEAR(p.global[1], 0.35, 1e-15);
  EXPECT_NEAR(p.global[2], 0.35, 1e-15);
  EXPECT_THROW(custom_profile({{0.5, 0.6}}), InvalidArgument);
  EXPECT_THROW(custom_profile({{0.5, 0.5}, {1.0}}), InvalidArgument);
}

TEST(Placement, OrderIsAPermutationWithIndexTieBreak) {
  const std::vector<double> q{0.1, 0.3, 0.1, 0.3, 0.2};
  const auto order = popularity_order(q);
  EXPECT_EQ(order, (std::vector<std::int64_t>{1, 3, 4, 0, 2}));
  const auto rank = ranks_from_order(order);
  std::vector<std::int64_t> sorted = rank;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<std::int64_t>{1, 2, 3, 4, 5}));
  for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(rank[static_cast<std::size_t>(order[i])], static_cast<std::int64_t>(i) + 1);
}

TEST(Placement, CachedSetSizes) {
  const auto p = custom_profile({{0.1, 0.2, 0.3, 0.4}, {0.4, 0.3, 0.2, 0.1}});
  const std::vector<std::int64_t> sizes{1, 3};
  const auto m = make_placement(p, sizes, 2);
  EXPECT_EQ(m.user_cached(0), (std::vector<std::int64_t>{3}));
  EXPECT_EQ(m.user_cached(1), (std::vector<std::int64_t>{0, 1, 2}));
  EXPECT_EQ(m.bs_cached().size(), 2u);
}

TEST(NonuniformThroughput, ReferenceCases) {
  const LibraryConfig lib{3, 10};
  // q decreasing in the index, so popularity order is 0, 1, 2.
  const auto p = custom_profile({{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}});
  auto placement = make_placement(p, 1, 2);
  auto t = nonuniform_throughput(demands_of({1, 2}), placement, lib);
  EXPECT_EQ(t.access_bits, 20.0);
  EXPECT_EQ(t.backhaul_bits, 10.0);
  t = nonuniform_throughput(demands_of({0, 0}), placement, lib);
  EXPECT_EQ(t.access_bits, 0.0);
  EXPECT_EQ(t.backhaul_bits, 0.0);
  placement = make_placement(p, 0, 0);
  t = nonuniform_throughput(demands_of({0, 2}), placement, lib);
  EXPECT_EQ(t.access_bits, 20.0);
  EXPECT_EQ(t.backhaul_bits, 20.0);
}

TEST(NonuniformThroughput, BackhaulCountingModes) {
  const LibraryConfig lib{3, 1};
  const auto p = custom_profile({{0.5, 0.3, 0.2}, {0.2, 0.3, 0.5}});
  // User 0 caches file 0, user 1 caches file 2; BS caches nothing.
  const auto placement = make_placement(p, 1, 0);
  const auto d = demands_of({0, 0});
  EXPECT_EQ(nonuniform_throughput(d, placement, lib).backhaul_bits, 1.0);
  EXPECT_EQ(nonuniform_throughput(d, placement, lib, BackhaulCounting::all_requests).backhaul_bits, 2.0);
}

TEST(NonuniformThroughput, BoundsAndMonotonicity) {
  const LibraryConfig lib{20, 7};
  const auto p = zipf_profile(20, 0.9, 5);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto d = sample_demands(p, seed);
    double prev_ac = 1e300, prev_bh = 1e300;
    for (std::int64_t m = 0; m <= 20; m += 4) {
      const auto t = nonuniform_throughput(d, make_placement(p, m, m), lib);
      EXPECT_LE(t.access_bits, 5 * 7.0);
      EXPECT_LE(t.backhaul_bits, 5 * 7.0);
      EXPECT_LE(t.access_bits, prev_ac);
      prev_ac = t.access_bits;
      const auto all = nonuniform_throughput(d, make_placement(p, 0, m), lib, BackhaulCounting::all_requests);
      EXPECT_LE(all.backhaul_bits, prev_bh);
      prev_bh = all.backhaul_bits;
    }
  }
}

TEST(ActiveSubset, ConsistentWithAccessCount) {
  const LibraryConfig lib{3, 10};
  const auto p = custom_profile({{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}});
  const auto placement = make_placement(p, 1, 2);
  EXPECT_EQ(active_subset(demands_of({1, 2}), placement), (std::vector<int>{0, 1}));
  EXPECT_EQ(active_subset(demands_of({0, 2}), placement), (std::vector<int>{1}));
  EXPECT_TRUE(active_subset(demands_of({0, 1}), make_placement(p, 3, 0)).empty());
  EXPECT_EQ(active_subset(demands_of({0, 1}), make_placement(p, 0, 0)).size(), 2u);
  const auto z = zipf_profile(50, 1.1, 6);
  const auto zp = make_placement(z, 7, 20);
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    const auto d = sample_demands(z, seed);
    EXPECT_EQ(static_cast<double>(active_subset(d, zp).size()) * 10.0, nonuniform_throughput(d, zp, {50, 10}).access_bits);
  }
}

TEST(SampleDemands, DegenerateAndReproducible) {
  const auto p = custom_profile({{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
  for (std::uint64_t seed = 0; seed < 100; ++seed) EXPECT_EQ(sample_demands(p, seed).demands, (std::vector<std::int64_t>{1, 2}));
  const auto z = zipf_profile(100, 0.8, 8);
  EXPECT_EQ(sample_demands(z, 42).demands, sample_demands(z, 42).demands);
}

TEST(SampleDemands, UniformFrequencies) {
  const std::int64_t n = 10;
  const auto p = uniform_profile(n, 1);
  std::vector<double> counts(static_cast<std::size_t>(n), 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[static_cast<std::size_t>(sample_demands(p, derive_seed(9, {static_cast<std::uint64_t>(i)})).demands[0])] += 1;
  const double sigma = std::sqrt(draws * 0.1 * 0.9);
  for (double c : counts) EXPECT_LE(std::abs(c - draws * 0.1), 3.0 * sigma);
}

TEST(SampleDemands, UniformHitRateMatchesUncodedStructure) {
  // Whole-file placement with integer M_u: expected access bits K Q (1 - M_u/N).
  const LibraryConfig lib{20, 1};
  const int k = 6;
  const auto p = uniform_profile(20, k);
  const auto placement = make_placement(p, 5, 0);
  RunningStat s;
  for (std::uint64_t t = 0; t < 20000; ++t) s.add(nonuniform_throughput(sample_demands(p, t), placement, lib).access_bits);
  EXPECT_LE(std::abs(s.mean() - k * 0.75), 3.0 * s.std_error());
}

TEST(NonuniformEe, EmptyActiveSetSpendsNoAccessEnergy) {
  const LibraryConfig lib{3, 1000};
  const auto p = custom_profile({{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}});
  const auto placement = make_placement(p, 1, 0);
  const auto h = sample_channels(2, 3, 1.0, 1);
  const std::vector<double> gamma(2, 1e6);
  const auto e = nonuniform_ee(h, demands_of({0, 0}), placement, lib, gamma, 1.0, 1e6, 1e-6);
  EXPECT_TRUE(e.active.empty());
  EXPECT_EQ(e.energy.access_joules, 0.0);
  EXPECT_TRUE(e.energy.infinite_ee());
}

TEST(NonuniformEe, SingletonUsesMatchedFilterPower) {
  const LibraryConfig lib{3, 1000};
  const auto p = custom_profile({{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}});
  const auto placement = make_placement(p, 1, 1);
  const auto h = sample_channels(2, 3, 1.0, 2);
  const std::vector<double> gamma(2, 2e6);
  const auto e = nonuniform_ee(h, demands_of({0, 2}), placement, lib, gamma, 0.5, 1e6, 1e-6);
  ASSERT_EQ(e.active, (std::vector<int>{1}));
  const double power = 3.0 * 0.5 / h.user(1).squaredNorm();
  EXPECT_NEAR(e.precoding.total_power(), power, 1e-7 * power);
  const double expected_access = 1000.0 * power / 2e6;
  EXPECT_NEAR(e.energy.access_joules, expected_access, 1e-6 * expected_access);
  EXPECT_DOUBLE_EQ(e.energy.backhaul_joules, 1e-6 * 1000.0);
}

TEST(NonuniformEe, BackhaulEnergyIsPricedThroughput) {
  const LibraryConfig lib{30, 1000};
  const auto p = uniform_profile(30, 3);
  const auto placement = make_placement(p, 0, 10);
  const auto h = sample_channels(3, 4, 1.0, 3);
  const std::vector<double> gamma(3, 1e6);
  const auto d = demands_of({5, 15, 25});
  const auto e = nonuniform_ee(h, d, placement, lib, gamma, 1.0, 1e6, 2e-6, UnicastDesign::zf);
  EXPECT_EQ(e.active.size(), 3u);
  EXPECT_DOUBLE_EQ(e.energy.backhaul_joules, 2e-6 * nonuniform_throughput(d, placement, lib).backhaul_bits);
  EXPECT_DOUBLE_EQ(e.energy.backhaul_joules, 2e-6 * 2000.0);
}

TEST(NonuniformDelay, EmptySingletonAndCachedUsers) {
  const LibraryConfig lib{3, 1000};
  const auto p = custom_profile({{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}});
  const auto placement = make_placement(p, 1, 0);
  const auto h = sample_channels(3, 4, 1.0, 4);
  const std::vector<double> gamma(3, 1e5);
  const auto none = nonuniform_delay(h, demands_of({0, 0, 0}), placement, lib, gamma, 1.0, 1e6, 10.0);
  EXPECT_EQ(none.delay.tau, 0.0);
  const auto one = nonuniform_delay(h, demands_of({0, 2, 0}), placement, lib, gamma, 1.0, 1e6, 10.0);
  const double rate = 1e6 * std::log2(1.0 + 10.0 * h.user(1).squaredNorm());
  EXPECT_NEAR(one.delay.tau, 1000.0 / rate, 1e-4 * 1000.0 / rate);
  // A user served from its own cache leaves the delivery time of the others unchanged.
  const auto two = nonuniform_delay(h, demands_of({1, 2, 0}), placement, lib, gamma, 1.0, 1e6, 10.0);
  const auto p2 = custom_profile({{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}});
  const std::vector<int> first_two{0, 1};
  const std::vector<double> gamma2(2, 1e5);
  const auto alone = nonuniform_delay(h.restricted(first_two), demands_of({1, 2}), make_placement(p2, 1, 0), lib, gamma2, 1.0, 1e6, 10.0);
  EXPECT_NEAR(two.delay.tau, alone.delay.tau, 1e-9 * alone.delay.tau);
  const std::vector<std::int64_t> sizes{1, 1, 0};
  const auto with_third = nonuniform_delay(h, demands_of({1, 2, 0}), make_placement(p, sizes, 0), lib, gamma, 1.0, 1e6, 10.0);
  EXPECT_EQ(with_third.active.size(), 3u);
}
