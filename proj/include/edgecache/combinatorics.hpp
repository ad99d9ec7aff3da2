#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "edgecache/error.hpp"

namespace edgecache {

/// A set of users encoded as a bit mask (bit k set means user k is a member).
using SubsetMask = std::uint32_t;
inline constexpr int kMaxUsers = 32;

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

inline int subset_size(SubsetMask s) { return std::popcount(s); }

inline std::vector<int> subset_members(SubsetMask s) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(std::popcount(s)));
  for (int k = 0; s != 0; ++k, s >>= 1)
    if (s & 1u) out.push_back(k);
  return out;
}

inline SubsetMask mask_of(const std::vector<int>& members) {
  SubsetMask s = 0;
  for (int k : members) {
    require(k >= 0 && k < kMaxUsers, "subset member out of range");
    s |= SubsetMask{1} << k;
  }
  return s;
}

/// All r-element subsets of {0..n-1} in increasing mask order.
inline std::vector<SubsetMask> subsets_of_size(int n, int r) {
  require(n >= 0 && n <= kMaxUsers, "subset universe too large");
  std::vector<SubsetMask> out;
  if (r < 0 || r > n) return out;
  if (r == 0) return {SubsetMask{0}};
  out.reserve(binomial(n, r));
  // Gosper's hack.
  std::uint64_t s = (std::uint64_t{1} << r) - 1;
  const std::uint64_t limit = std::uint64_t{1} << n;
  while (s < limit) {
    out.push_back(static_cast<SubsetMask>(s));
    const std::uint64_t c = s & (~s + 1);
    const std::uint64_t t = s + c;
    s = (((t ^ s) >> 2) / c) | t;
  }
  return out;
}

}  // namespace edgecache
