#pragma once

// Small dense Hermitian semidefinite programs
//
//   minimize   sum_j Tr(C_j X_j)
//   subject to sum_j Tr(A_ij X_j) (>= | <= | =) b_i,   X_j Hermitian PSD,
//
// solved by an infeasible primal-dual path-following method with the HKM
// search direction and Mehrotra predictor-corrector steps. Complex blocks are
// mapped to real symmetric blocks of twice the size; inequality rows get a
// nonnegative scalar slack each.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "edgecache/error.hpp"
#include "edgecache/linalg.hpp"

namespace edgecache::sdp {

enum class Sense { greater_equal, less_equal, equal };

struct Term {
  int block = 0;
  CMatrix coefficient;
};

struct Constraint {
  std::vector<Term> terms;
  Sense sense = Sense::greater_equal;
  double rhs = 0.0;
};

struct HermitianSDP {
  std::vector<int> block_sizes;
  std::vector<CMatrix> objective;  // one Hermitian matrix per block
  std::vector<Constraint> constraints;

  void validate() const {
    require(!block_sizes.empty(), "SDP needs at least one variable block");
    require(objective.size() == block_sizes.size(), "one objective matrix per block is required");
    for (std::size_t j = 0; j < block_sizes.size(); ++j) {
      require(block_sizes[j] >= 1, "block sizes must be positive");
      require(objective[j].rows() == block_sizes[j] && objective[j].cols() == block_sizes[j],
              "objective matrix dimension does not match its block");
      require(is_hermitian(objective[j]), "objective matrices must be Hermitian");
    }
    for (const auto& c : constraints) {
      require(std::isfinite(c.rhs), "constraint right-hand sides must be finite");
      for (const auto& t : c.terms) {
        require(t.block >= 0 && t.block < static_cast<int>(block_sizes.size()), "constraint references an unknown block");
        const int n = block_sizes[static_cast<std::size_t>(t.block)];
        require(t.coefficient.rows() == n && t.coefficient.cols() == n, "constraint matrix dimension does not match its block");
        require(is_hermitian(t.coefficient), "constraint matrices must be Hermitian");
      }
    }
  }
};

enum class Status { optimal, infeasible, unbounded, max_iter };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::max_iter: return "max_iter";
  }
  return "unknown";
}

struct IterationLog {
  int iteration = 0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_infeasibility = 0.0;  // relative, scaled problem
  double dual_infeasibility = 0.0;    // relative, scaled problem
  double complementarity = 0.0;       // <X, Z>, scaled problem
};

struct SDPSolution {
  Status status = Status::max_iter;
  std::vector<CMatrix> blocks;      // primal X_j
  std::vector<double> multipliers;  // dual y_i, one per constraint
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double relative_gap = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;
  std::vector<IterationLog> history;

  bool optimal() const { return status == Status::optimal; }
};

struct SolverOptions {
  double tolerance = 1e-8;
  int max_iterations = 200;
  double infeasibility_tolerance = 1e-8;
};

/// [[Re A, -Im A], [Im A, Re A]]. Hermitian A maps to a symmetric matrix with
/// every eigenvalue of A appearing twice, so PSD is preserved both ways and
/// the trace doubles.
inline RMatrix real_embedding(const CMatrix& a) {
  const auto n = a.rows();
  RMatrix out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = a.real();
  out.topRightCorner(n, n) = -a.imag();
  out.bottomLeftCorner(n, n) = a.imag();
  out.bottomRightCorner(n, n) = a.real();
  return out;
}

/// Hermitian matrix whose embedding is the structured projection of `y`.
/// Exact inverse of real_embedding on its range; for a general PSD `y` the
/// result is PSD with the same inner products against embedded data.
inline CMatrix complex_from_embedding(const RMatrix& y) {
  const auto n = y.rows() / 2;
  const RMatrix re = 0.5 * (y.topLeftCorner(n, n) + y.bottomRightCorner(n, n));
  const RMatrix im = 0.5 * (y.bottomLeftCorner(n, n) - y.topRightCorner(n, n));
  CMatrix out(n, n);
  out.real() = re;
  out.imag() = im;
  return hermitian_part(out);
}

namespace detail {

struct Entry {
  int row = 0;
  RMatrix a;
};

/// Real standard form: min <C, X> s.t. <A_i, X> = b_i, X block-diagonal PSD.
struct RealProblem {
  std::vector<int> sizes;
  std::vector<RMatrix> c;
  std::vector<std::vector<Entry>> by_block;  // constraint entries grouped by block
  RVector b;
};

struct RealResult {
  Status status = Status::max_iter;
  std::vector<RMatrix> x, z;
  RVector y;
  double primal_objective = 0.0, dual_objective = 0.0, relative_gap = 0.0;
  double primal_infeasibility = 0.0, dual_infeasibility = 0.0;
  int iterations = 0;
  std::vector<IterationLog> history;
};

inline double frob_inner(const RMatrix& a, const RMatrix& b) { return a.cwiseProduct(b).sum(); }

inline RMatrix sym(const RMatrix& a) { return 0.5 * (a + a.transpose()); }

/// Largest alpha with x + alpha dx PSD (infinity when unbounded).
inline double max_step(const RMatrix& x, const RMatrix& dx) {
  if (x.rows() == 1) {
    const double d = dx(0, 0);
    return d >= 0.0 ? std::numeric_limits<double>::infinity() : -x(0, 0) / d;
  }
  Eigen::LLT<RMatrix> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  const RMatrix l = llt.matrixL();
  RMatrix t = l.triangularView<Eigen::Lower>().solve(dx);
  t = l.triangularView<Eigen::Lower>().solve(t.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<RMatrix> es(sym(t), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

inline double lambda_max(const RMatrix& a) {
  if (a.rows() == 1) return a(0, 0);
  Eigen::SelfAdjointEigenSolver<RMatrix> es(sym(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

inline RealResult solve_real(const RealProblem& p, const SolverOptions& opt) {
  const auto nb = p.sizes.size();
  const auto m = static_cast<Eigen::Index>(p.b.size());
  double n_total = 0.0;
  for (int s : p.sizes) n_total += s;

  auto apply_a = [&](const std::vector<RMatrix>& v) {
    RVector out = RVector::Zero(m);
    for (std::size_t j = 0; j < nb; ++j)
      for (const auto& e : p.by_block[j]) out(e.row) += frob_inner(e.a, v[j]);
    return out;
  };
  auto apply_at = [&](const RVector& y) {
    std::vector<RMatrix> out(nb);
    for (std::size_t j = 0; j < nb; ++j) {
      out[j] = RMatrix::Zero(p.sizes[j], p.sizes[j]);
      for (const auto& e : p.by_block[j]) out[j] += y(e.row) * e.a;
    }
    return out;
  };

  const double b_norm = p.b.norm();
  double c_norm = 0.0;
  for (const auto& c : p.c) c_norm += c.squaredNorm();
  c_norm = std::sqrt(c_norm);

  RealResult r;
  r.x.resize(nb);
  r.z.resize(nb);
  r.y = RVector::Zero(m);
  for (std::size_t j = 0; j < nb; ++j) {
    const double n = p.sizes[j];
    double xi = std::max(10.0, std::sqrt(n));
    double eta = std::max({10.0, std::sqrt(n), p.c[j].norm()});
    for (const auto& e : p.by_block[j]) {
      xi = std::max(xi, std::sqrt(n) * (1.0 + std::abs(p.b(e.row))) / (1.0 + e.a.norm()));
      eta = std::max(eta, e.a.norm());
    }
    r.x[j] = xi * RMatrix::Identity(p.sizes[j], p.sizes[j]);
    r.z[j] = eta * RMatrix::Identity(p.sizes[j], p.sizes[j]);
  }

  std::vector<RMatrix> zinv(nb), rd(nb), dxa(nb), dza(nb), dx(nb), dz(nb);
  for (int iter = 0;; ++iter) {
    const RVector rp = p.b - apply_a(r.x);
    const auto aty = apply_at(r.y);
    double pobj = 0.0, xz = 0.0, rd_norm = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      rd[j] = p.c[j] - aty[j] - r.z[j];
      pobj += frob_inner(p.c[j], r.x[j]);
      xz += frob_inner(r.x[j], r.z[j]);
      rd_norm += rd[j].squaredNorm();
    }
    const double dobj = p.b.dot(r.y);
    const double pinf = rp.norm() / (1.0 + b_norm);
    const double dinf = std::sqrt(rd_norm) / (1.0 + c_norm);
    const double relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    r.primal_objective = pobj;
    r.dual_objective = dobj;
    r.relative_gap = relgap;
    r.primal_infeasibility = pinf;
    r.dual_infeasibility = dinf;
    r.iterations = iter;
    r.history.push_back({iter, pobj, dobj, pinf, dinf, xz});

    if (pinf <= opt.tolerance && dinf <= opt.tolerance && relgap <= opt.tolerance) {
      r.status = Status::optimal;
      return r;
    }
    // Farkas certificates: y with A*(y) <= 0 and b'y > 0 proves primal
    // infeasibility; X >= 0 with A(X) = 0 and <C, X> < 0 proves unboundedness.
    if (dobj > 0.0 && pinf > opt.tolerance) {
      double worst = 0.0;
      for (std::size_t j = 0; j < nb; ++j) worst = std::max(worst, lambda_max(aty[j]));
      if (worst / dobj <= opt.infeasibility_tolerance) {
        r.status = Status::infeasible;
        return r;
      }
    }
    if (pobj < 0.0 && dinf > opt.tolerance) {
      const double ax = (p.b - rp).norm();
      if (ax / -pobj <= opt.infeasibility_tolerance) {
        r.status = Status::unbounded;
        return r;
      }
    }
    if (iter >= opt.max_iterations) {
      r.status = Status::max_iter;
      return r;
    }

    // Schur complement M_ik = sum_j <A_ij, X_j A_kj Z_j^{-1}>.
    RMatrix schur = RMatrix::Zero(m, m);
    for (std::size_t j = 0; j < nb; ++j) {
      const auto n = p.sizes[j];
      Eigen::LLT<RMatrix> llt(r.z[j]);
      if (llt.info() != Eigen::Success) throw SolverFailure("dual slack lost positive definiteness");
      zinv[j] = sym(llt.solve(RMatrix::Identity(n, n)));
      const auto& entries = p.by_block[j];
      for (const auto& ek : entries) {
        const RMatrix g = r.x[j] * ek.a * zinv[j];
        for (const auto& ei : entries) schur(ei.row, ek.row) += frob_inner(ei.a, g);
      }
    }
    schur = 0.5 * (schur + schur.transpose());
    Eigen::LLT<RMatrix> schur_llt(schur);
    Eigen::LDLT<RMatrix> schur_ldlt;
    const bool use_llt = schur_llt.info() == Eigen::Success;
    if (!use_llt) schur_ldlt.compute(schur);

    const double mu = xz / n_total;

    // Returns the HKM direction for target sigma*mu and optional second-order term.
    auto direction = [&](double sigma_mu, bool corrector) {
      RVector rhs = rp;
      std::vector<RMatrix> rc(nb);
      for (std::size_t j = 0; j < nb; ++j) {
        rc[j] = sigma_mu * zinv[j] - r.x[j];
        if (corrector) rc[j] -= dxa[j] * dza[j] * zinv[j];
        const RMatrix t = rc[j] - r.x[j] * rd[j] * zinv[j];
        for (const auto& e : p.by_block[j]) rhs(e.row) -= frob_inner(e.a, t);
      }
      const RVector dy = use_llt ? RVector(schur_llt.solve(rhs)) : RVector(schur_ldlt.solve(rhs));
      const auto atdy = apply_at(dy);
      std::vector<RMatrix> ddx(nb), ddz(nb);
      for (std::size_t j = 0; j < nb; ++j) {
        ddz[j] = rd[j] - atdy[j];
        ddx[j] = sym(rc[j] - r.x[j] * ddz[j] * zinv[j]);
      }
      return std::tuple{std::move(ddx), dy, std::move(ddz)};
    };
    auto steps = [&](const std::vector<RMatrix>& ddx, const std::vector<RMatrix>& ddz) {
      double ap = std::numeric_limits<double>::infinity(), ad = ap;
      for (std::size_t j = 0; j < nb; ++j) {
        ap = std::min(ap, max_step(r.x[j], ddx[j]));
        ad = std::min(ad, max_step(r.z[j], ddz[j]));
      }
      return std::pair{ap, ad};
    };

    // Predictor.
    auto [pdx, pdy, pdz] = direction(0.0, false);
    dxa = std::move(pdx);
    dza = std::move(pdz);
    auto [apa, ada] = steps(dxa, dza);
    apa = std::min(1.0, apa);
    ada = std::min(1.0, ada);
    double mu_aff = 0.0;
    for (std::size_t j = 0; j < nb; ++j) mu_aff += frob_inner(r.x[j] + apa * dxa[j], r.z[j] + ada * dza[j]);
    mu_aff /= n_total;
    const double expon = std::max(1.0, 3.0 * std::min(apa, ada) * std::min(apa, ada));
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, expon), 0.0, 1.0);

    // Corrector.
    auto [cdx, cdy, cdz] = direction(sigma * mu, true);
    auto [ap, ad] = steps(cdx, cdz);
    const double gamma = 0.9 + 0.09 * std::min(apa, ada);
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (!(ap > 1e-14) && !(ad > 1e-14)) {
      r.status = Status::max_iter;
      return r;
    }
    for (std::size_t j = 0; j < nb; ++j) {
      r.x[j] = sym(r.x[j] + ap * cdx[j]);
      r.z[j] = sym(r.z[j] + ad * cdz[j]);
    }
    r.y += ad * cdy;
  }
}

}  // namespace detail

/// Solve a Hermitian SDP. Infeasibility and unboundedness are reported through
/// `status`; malformed input throws InvalidArgument.
inline SDPSolution solve(const HermitianSDP& problem, const SolverOptions& options = {}) {
  problem.validate();
  require(options.tolerance > 0.0 && options.max_iterations >= 1, "invalid solver options");
  const auto n_blocks = problem.block_sizes.size();
  const auto n_rows = problem.constraints.size();

  detail::RealProblem rp;
  for (int s : problem.block_sizes) rp.sizes.push_back(2 * s);
  std::vector<int> slack_block(n_rows, -1);
  for (std::size_t i = 0; i < n_rows; ++i) {
    if (problem.constraints[i].sense == Sense::equal) continue;
    slack_block[i] = static_cast<int>(rp.sizes.size());
    rp.sizes.push_back(1);
  }
  rp.by_block.resize(rp.sizes.size());
  rp.b.resize(static_cast<Eigen::Index>(n_rows));

  // Row equilibration, then global scaling of b and C.
  std::vector<double> row_scale(n_rows, 1.0);
  for (std::size_t i = 0; i < n_rows; ++i) {
    const auto& con = problem.constraints[i];
    double norm2 = con.sense == Sense::equal ? 0.0 : 1.0;
    std::vector<RMatrix> parts;
    for (const auto& t : con.terms) {
      // Tr(A X) = <emb(A), emb(X)> / 2 for Hermitian A and X.
      RMatrix a = 0.5 * detail::sym(real_embedding(hermitian_part(t.coefficient)));
      norm2 += a.squaredNorm();
      rp.by_block[static_cast<std::size_t>(t.block)].push_back({static_cast<int>(i), std::move(a)});
    }
    row_scale[i] = norm2 > 0.0 ? std::sqrt(norm2) : 1.0;
    if (slack_block[i] >= 0) {
      const double sign = con.sense == Sense::greater_equal ? -1.0 : 1.0;
      rp.by_block[static_cast<std::size_t>(slack_block[i])].push_back({static_cast<int>(i), RMatrix::Constant(1, 1, sign)});
    }
  }
  for (auto& entries : rp.by_block)
    for (auto& e : entries) e.a /= row_scale[static_cast<std::size_t>(e.row)];
  for (std::size_t i = 0; i < n_rows; ++i)
    rp.b(static_cast<Eigen::Index>(i)) = problem.constraints[i].rhs / row_scale[i];

  const double b_scale = std::max(1.0, rp.b.norm());
  rp.b /= b_scale;
  double c_norm2 = 0.0;
  for (std::size_t j = 0; j < rp.sizes.size(); ++j) {
    if (j < n_blocks)
      rp.c.push_back(0.5 * detail::sym(real_embedding(hermitian_part(problem.objective[j]))));
    else
      rp.c.push_back(RMatrix::Zero(1, 1));
    c_norm2 += rp.c.back().squaredNorm();
  }
  const double c_scale = std::max(1.0, std::sqrt(c_norm2));
  for (auto& c : rp.c) c /= c_scale;

  auto rr = detail::solve_real(rp, options);

  SDPSolution out;
  out.status = rr.status;
  out.iterations = rr.iterations;
  out.history = std::move(rr.history);
  for (auto& h : out.history) {
    h.primal_objective *= b_scale * c_scale;
    h.dual_objective *= b_scale * c_scale;
  }
  out.primal_objective = rr.primal_objective * b_scale * c_scale;
  out.dual_objective = rr.dual_objective * b_scale * c_scale;
  out.relative_gap = rr.relative_gap;
  out.primal_infeasibility = rr.primal_infeasibility;
  out.dual_infeasibility = rr.dual_infeasibility;
  for (std::size_t j = 0; j < n_blocks; ++j) out.blocks.push_back(complex_from_embedding(rr.x[j] * b_scale));
  for (std::size_t i = 0; i < n_rows; ++i)
    out.multipliers.push_back(rr.y(static_cast<Eigen::Index>(i)) * c_scale / row_scale[i]);
  return out;
}

}  // namespace edgecache::sdp
