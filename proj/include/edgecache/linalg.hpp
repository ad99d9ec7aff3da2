#pragma once

#include <complex>

#include <Eigen/Dense>

namespace edgecache {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Hermitian inner product a^H b.
inline Complex inner(const CVector& a, const CVector& b) { return a.dot(b); }

/// |a^H b|^2
inline double gain(const CVector& a, const CVector& b) { return std::norm(inner(a, b)); }

inline bool is_hermitian(const CMatrix& a, double tol = 1e-10) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline CMatrix hermitian_part(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

/// Real part of Tr(A X) for Hermitian A and X.
inline double trace_product(const CMatrix& a, const CMatrix& x) {
  return (a.conjugate().cwiseProduct(x)).sum().real();
}

}  // namespace edgecache
