// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pnfc/errors.hpp"

namespace pnfc {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

using namespace std::complex_literals;

inline constexpr double pi = 3.14159265358979323846;

/// Default upper bound on any Kronecker-assembled dimension.
inline constexpr Eigen::Index default_dimension_cap = 4096;

struct EigenResult {
  std::vector<Complex> eigenvalues;
  ComplexMatrix right_eigenvectors;  // columns
  double backward_error = 0.0;
};

inline ComplexMatrix identity(Eigen::Index n) { return ComplexMatrix::Identity(n, n); }

/// J_m(lambda): lambda on the diagonal, ones on the first superdiagonal.
inline ComplexMatrix jordan_block(Eigen::Index m, Complex lambda) {
  ComplexMatrix j = lambda * identity(m);
  for (Eigen::Index i = 0; i + 1 < m; ++i) j(i, i + 1) = 1.0;
  return j;
}

inline ComplexMatrix block_diagonal(std::span<const ComplexMatrix> blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  ComplexMatrix out = ComplexMatrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a * b - b * a;
}

inline bool all_finite(const ComplexMatrix& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (!std::isfinite(a(i, j).real()) || !std::isfinite(a(i, j).imag())) return false;
  return true;
}

inline void require_square(const ComplexMatrix& a, const char* module, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw DimensionError(module, std::string(what) + " must be a nonempty square matrix");
}

/// Standard Kronecker product, (a (x) b)(u (x) v) = (au) (x) (bv).
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b,
                          Eigen::Index cap = default_dimension_cap) {
  const Eigen::Index rows = a.rows() * b.rows();
  const Eigen::Index cols = a.cols() * b.cols();
  if (rows > cap || cols > cap)
    throw DimensionCapError("numerics", "Kronecker product of dimension " + std::to_string(rows) +
                                            "x" + std::to_string(cols) + " exceeds the cap " +
                                            std::to_string(cap));
  ComplexMatrix out(rows, cols);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Left-to-right Kronecker product of a list of factors.
inline ComplexMatrix kron_all(std::span<const ComplexMatrix> factors,
                              Eigen::Index cap = default_dimension_cap) {
  if (factors.empty()) return identity(1);
  ComplexMatrix out = factors.front();
  for (std::size_t k = 1; k < factors.size(); ++k) out = kron(out, factors[k], cap);
  return out;
}

/// Spectral norm (largest singular value).
inline double op_norm(const ComplexMatrix& a) {
  if (a.size() == 0) return 0.0;
  if (a.rows() == 1 || a.cols() == 1) return a.norm();
  Eigen::BDCSVD<ComplexMatrix> svd(a);
  return svd.singularValues()(0);
}

/// Smallest singular value; 1/smin is the norm of the inverse.
inline double min_singular_value(const ComplexMatrix& a) {
  Eigen::BDCSVD<ComplexMatrix> svd(a);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

/// Condition-number threshold above which a resolvent solve is refused.
inline constexpr double resolvent_condition_limit = 1e14;

/// (zI - x)^{-1}.
inline ComplexMatrix resolvent(const ComplexMatrix& x, Complex z) {
  require_square(x, "numerics", "resolvent argument");
  ComplexMatrix shifted = -x;
  shifted.diagonal().array() += z;
  Eigen::PartialPivLU<ComplexMatrix> lu(shifted);
  // The LAPACK-style estimate misses exactly zero pivots, so the pivot ratio is checked too.
  const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
  const double rcond = std::min(lu.rcond(), pivots.minCoeff() / pivots.maxCoeff());
  auto fail = [&] {
    return NearSingularError("numerics", "zI - X is numerically singular at z = (" +
                                             std::to_string(z.real()) + ", " +
                                             std::to_string(z.imag()) + ")");
  };
  if (!(rcond * resolvent_condition_limit > 1.0)) throw fail();
  ComplexMatrix r = lu.solve(identity(x.rows()));
  if (!all_finite(r)) throw fail();
  return r;
}

/// Dense nonsymmetric eigensolver (complex Schur based).
inline EigenResult eig(const ComplexMatrix& x) {
  require_square(x, "numerics", "eig argument");
  if (!all_finite(x)) throw DimensionError("numerics", "eig argument has non-finite entries");
  Eigen::ComplexEigenSolver<ComplexMatrix> solver(x, true);
  if (solver.info() != Eigen::Success)
    throw ConvergenceError("numerics", "eigenvalue iteration did not converge");
  EigenResult out;
  out.eigenvalues.assign(solver.eigenvalues().data(),
                         solver.eigenvalues().data() + solver.eigenvalues().size());
  out.right_eigenvectors = solver.eigenvectors();
  const double xnorm = op_norm(x);
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    const ComplexVector v = out.right_eigenvectors.col(k);
    const double vnorm = v.norm();
    if (xnorm == 0.0 || vnorm == 0.0) continue;
    const double r = (x * v - out.eigenvalues[static_cast<std::size_t>(k)] * v).norm();
    out.backward_error = std::max(out.backward_error, r / (xnorm * vnorm));
  }
  return out;
}

/// Eigenvalues only, for callers that never touch the eigenvectors.
inline std::vector<Complex> eigenvalues(const ComplexMatrix& x) {
  require_square(x, "numerics", "eigenvalues argument");
  Eigen::ComplexEigenSolver<ComplexMatrix> solver(x, false);
  if (solver.info() != Eigen::Success)
    throw ConvergenceError("numerics", "eigenvalue iteration did not converge");
  return {solver.eigenvalues().data(), solver.eigenvalues().data() + solver.eigenvalues().size()};
}

}  // namespace pnfc
