#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "edgecache/energy.hpp"
#include "edgecache/rank1.hpp"
#include "edgecache/sdp.hpp"

using namespace edgecache;
using namespace edgecache::sdp;

namespace {

CMatrix scalar(double x) { return CMatrix::Constant(1, 1, Complex(x, 0.0)); }

CMatrix random_hermitian(int n, std::uint64_t seed) {
  Rng rng(seed);
  CMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.complex_normal(1.0);
  return hermitian_part(a);
}

double min_eigenvalue(const CMatrix& x) {
  return Eigen::SelfAdjointEigenSolver<CMatrix>(hermitian_part(x)).eigenvalues()(0);
}

double constraint_value(const Constraint& c, const std::vector<CMatrix>& x) {
  double s = 0.0;
  for (const auto& t : c.terms) s += trace_product(t.coefficient, x[static_cast<std::size_t>(t.block)]);
  return s;
}

// Optimality certificate from first principles: primal feasibility, dual
// feasibility (y >= 0 on >= rows, Z_j = C_j - sum_i y_i A_ij PSD), and a
// vanishing duality gap b^T y = <C, X>.
void expect_certificate(const HermitianSDP& p, const SDPSolution& s, double tol) {
  ASSERT_TRUE(s.optimal());
  double primal = 0.0;
  for (std::size_t j = 0; j < p.block_sizes.size(); ++j) {
    primal += trace_product(p.objective[j], s.blocks[j]);
    EXPECT_GE(min_eigenvalue(s.blocks[j]), -tol * std::max(1.0, s.blocks[j].norm()));
  }
  EXPECT_NEAR(primal, s.primal_objective, tol * (1.0 + std::abs(primal)));
  double dual = 0.0;
  std::vector<CMatrix> z = p.objective;
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    const auto& c = p.constraints[i];
    const double y = s.multipliers[i];
    const double v = constraint_value(c, s.blocks);
    if (c.sense == Sense::greater_equal) {
      EXPECT_GE(y, -tol);
      EXPECT_GE(v, c.rhs - tol * (1.0 + std::abs(c.rhs)));
    } else if (c.sense == Sense::less_equal) {
      EXPECT_LE(y, tol);
      EXPECT_LE(v, c.rhs + tol * (1.0 + std::abs(c.rhs)));
    } else {
      EXPECT_NEAR(v, c.rhs, tol * (1.0 + std::abs(c.rhs)));
    }
    dual += y * c.rhs;
    for (const auto& t : c.terms) z[static_cast<std::size_t>(t.block)] -= y * t.coefficient;
  }
  for (const auto& zj : z) EXPECT_GE(min_eigenvalue(zj), -tol * std::max(1.0, zj.norm()));
  EXPECT_NEAR(dual, primal, tol * (1.0 + std::abs(primal)));
}

}  // namespace

TEST(RealEmbedding, IdentityAndTrace) {
  const RMatrix e = real_embedding(CMatrix::Identity(3, 3));
  EXPECT_EQ(e, RMatrix::Identity(6, 6));
  const CMatrix a = random_hermitian(4, 1);
  EXPECT_NEAR(real_embedding(a).trace(), 2.0 * a.trace().real(), 1e-12);
}

TEST(RealEmbedding, SkewPartRoundTrips) {
  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 1) = Complex(0.0, 1.5);
  a(1, 0) = Complex(0.0, -1.5);
  EXPECT_LT((complex_from_embedding(real_embedding(a)) - a).norm(), 1e-15);
  const CMatrix b = random_hermitian(5, 2);
  EXPECT_LT((complex_from_embedding(real_embedding(b)) - b).norm(), 1e-14);
}

TEST(RealEmbedding, EigenvaluesAreDoubled) {
  const CMatrix a = random_hermitian(5, 3);
  const RVector ev = Eigen::SelfAdjointEigenSolver<CMatrix>(a).eigenvalues();
  const RVector ee = Eigen::SelfAdjointEigenSolver<RMatrix>(real_embedding(a)).eigenvalues();
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(ee(2 * i), ev(i), 1e-12);
    EXPECT_NEAR(ee(2 * i + 1), ev(i), 1e-12);
  }
}

TEST(Solve, ScalarProblem) {
  HermitianSDP p;
  p.block_sizes = {1};
  p.objective = {scalar(1.0)};
  p.constraints = {{{{0, scalar(2.0)}}, Sense::greater_equal, 3.0}};
  const auto s = solve(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.blocks[0](0, 0).real(), 1.5, 1e-7);
  EXPECT_NEAR(s.primal_objective, 1.5, 1e-7);
  expect_certificate(p, s, 1e-6);
}

TEST(Solve, InfeasiblePair) {
  HermitianSDP p;
  p.block_sizes = {1};
  p.objective = {scalar(1.0)};
  p.constraints = {{{{0, scalar(1.0)}}, Sense::greater_equal, 1.0}, {{{0, scalar(-1.0)}}, Sense::greater_equal, 0.0}};
  EXPECT_EQ(solve(p).status, Status::infeasible);
}

TEST(Solve, UnboundedProblem) {
  HermitianSDP p;
  p.block_sizes = {1};
  p.objective = {scalar(-1.0)};
  p.constraints = {{{{0, scalar(1.0)}}, Sense::greater_equal, 1.0}};
  EXPECT_EQ(solve(p).status, Status::unbounded);
}

TEST(Solve, RejectsNonHermitian) {
  HermitianSDP p;
  p.block_sizes = {2};
  CMatrix c = CMatrix::Identity(2, 2);
  c(0, 1) = 1.0;
  p.objective = {c};
  EXPECT_THROW(solve(p), InvalidArgument);
}

TEST(Solve, SingleUserMulticastClosedForm) {
  const auto h = sample_channels(1, 4, 1.0, 5);
  const double c = 3.0;
  const std::vector<int> members{0};
  const auto p = multicast_qos_sdp(h, members, c, 1.0);
  const auto s = solve(p);
  const double n2 = h.user(0).squaredNorm();
  EXPECT_NEAR(s.primal_objective, c / n2, 1e-7 * c / n2);
  // Rank one along h.
  const CMatrix expected = (c / (n2 * n2)) * h.user(0) * h.user(0).adjoint();
  EXPECT_LT((s.blocks[0] - expected).norm(), 1e-6 * expected.norm());
  expect_certificate(p, s, 1e-6);
}

TEST(Solve, UnicastRelaxationCertificates) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto h = sample_channels(3, 5, 1.0, seed);
    const std::vector<double> floors{1.0, 2.0, 0.5};
    const auto p = unicast_qos_sdp(h, floors, 0.8);
    const auto s = solve(p);
    expect_certificate(p, s, 1e-6);
    EXPECT_LE(s.relative_gap, 1e-8);
  }
}

TEST(Solve, LessEqualAndEqualityRows) {
  // min Tr(C X) s.t. Tr(X) = 1, X_00 <= 0.25 with C = diag(1, 2): optimum 1*0.25 + 2*0.75.
  HermitianSDP p;
  p.block_sizes = {2};
  CMatrix c = CMatrix::Zero(2, 2);
  c(0, 0) = 1.0;
  c(1, 1) = 2.0;
  p.objective = {c};
  CMatrix e00 = CMatrix::Zero(2, 2);
  e00(0, 0) = 1.0;
  p.constraints = {{{{0, CMatrix::Identity(2, 2)}}, Sense::equal, 1.0}, {{{0, e00}}, Sense::less_equal, 0.25}};
  const auto s = solve(p);
  EXPECT_NEAR(s.primal_objective, 1.75, 1e-7);
  expect_certificate(p, s, 1e-6);
}

TEST(Solve, WeakDualityAlongTheIterates) {
  const auto h = sample_channels(4, 6, 1.0, 12);
  const std::vector<double> floors{1.0, 1.0, 1.0, 1.0};
  const auto s = solve(unicast_qos_sdp(h, floors, 1.0));
  ASSERT_TRUE(s.optimal());
  ASSERT_FALSE(s.history.empty());
  EXPECT_GE(s.primal_objective, s.dual_objective - 1e-8 * (1.0 + std::abs(s.primal_objective)));
  for (const auto& it : s.history)
    EXPECT_GE(it.primal_objective - it.dual_objective, -1e-8 * (1.0 + std::abs(it.primal_objective) + std::abs(it.dual_objective)))
        << "iteration " << it.iteration;
}

TEST(Rank1, ExactExtractionFromRankOne) {
  CVector w(3);
  w << Complex(1.0, 0.5), Complex(-0.3, 0.2), Complex(0.0, 2.0);
  const CMatrix x = w * w.adjoint();
  const std::vector<QuadraticFloor> floors{{CMatrix::Identity(3, 3), w.squaredNorm()}};
  const auto b = extract_rank1(x, floors);
  EXPECT_TRUE(b.exact_rank1);
  EXPECT_EQ(b.candidate, 0);
  EXPECT_NEAR(b.power, w.squaredNorm(), 1e-12);
  EXPECT_LT((b.beam * b.beam.adjoint() - x).norm(), 1e-10);
}

TEST(Rank1, RandomizedPowerBoundedBySdpValue) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto h = sample_channels(4, 4, 1.0, seed);
    const std::vector<int> members{0, 1, 2, 3};
    const auto s = solve(multicast_qos_sdp(h, members, 2.0, 1.0));
    ASSERT_TRUE(s.optimal());
    std::vector<QuadraticFloor> floors;
    for (int k : members) floors.push_back({outer(h.user(k)), 2.0});
    RandomizationOptions opt;
    opt.seed = seed;
    const auto b = extract_rank1(s.blocks[0], floors, opt);
    EXPECT_GE(b.power, s.primal_objective * (1.0 - 1e-7));
    for (const auto& f : floors) EXPECT_GE(trace_product(f.a, b.beam * b.beam.adjoint()), f.floor * (1.0 - 1e-8));
  }
}

TEST(Rank1, SingleMemberMatchesClosedForm) {
  const auto h = sample_channels(1, 5, 1.0, 21);
  const auto d = sdr_ee_max_coded(h, 1u, 1e6, 1.0, 1e6);
  EXPECT_NEAR(d.beam.power(), 1.0 / h.user(0).squaredNorm(), 1e-7);
  EXPECT_TRUE(d.exact_rank1);
}

TEST(Rank1, NoFeasibleCandidateIsReported) {
  // A zero covariance yields no direction that can meet a positive floor.
  const std::vector<QuadraticFloor> floors{{CMatrix::Identity(2, 2), 1.0}};
  EXPECT_THROW(extract_rank1(CMatrix::Zero(2, 2), floors), SolverFailure);
}

TEST(Rank1, ExtractedUnicastBeamsMeetFloors) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto h = sample_channels(4, 6, 1.0, 100 + seed);
    const std::vector<double> floors{1.0, 2.0, 3.0, 0.5};
    const auto s = solve(unicast_qos_sdp(h, floors, 1.0));
    ASSERT_TRUE(s.optimal());
    const auto beams = extract_unicast_beams(s.blocks, h, floors, 1.0);
    const auto sinr = unicast_sinrs(h, beams.beams, 1.0);
    for (int k = 0; k < 4; ++k) EXPECT_GE(sinr[static_cast<std::size_t>(k)] - floors[static_cast<std::size_t>(k)], -1e-8);
    EXPECT_GE(beams.total_power, s.primal_objective * (1.0 - 1e-7));
  }
}
