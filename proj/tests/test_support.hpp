// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <vector>

#include "pnfc/numerics.hpp"

namespace pnfc::fixtures {

/// The non-commuting pair with X1 = I + N1 and X2 nilpotent.
inline ComplexMatrix pair_x1() {
  ComplexMatrix x(2, 2);
  x << 1.0, 1.0, 0.0, 1.0;
  return x;
}
inline ComplexMatrix pair_x2() {
  ComplexMatrix x(2, 2);
  x << 0.0, 0.0, 1.0, 0.0;
  return x;
}
inline ComplexMatrix pair_n1() {
  ComplexMatrix x(2, 2);
  x << 0.0, 1.0, 0.0, 0.0;
  return x;
}

inline ComplexMatrix diag(std::initializer_list<Complex> d) {
  ComplexMatrix m = ComplexMatrix::Zero(static_cast<Eigen::Index>(d.size()),
                                        static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (Complex v : d) m(i, i) = v, ++i;
  return m;
}

inline ComplexMatrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> g;
  ComplexMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = Complex(g(rng), g(rng));
  return m;
}

inline ComplexMatrix random_unitary(std::mt19937_64& rng, Eigen::Index n) {
  Eigen::HouseholderQR<ComplexMatrix> qr(random_matrix(rng, n, n));
  return qr.householderQ() * identity(n);
}

inline ComplexMatrix random_hermitian(std::mt19937_64& rng, Eigen::Index n) {
  ComplexMatrix a = random_matrix(rng, n, n);
  return (a + a.adjoint()) / 2.0;
}

/// U diag(sigma) V with singular values spread geometrically over [1, cond].
inline ComplexMatrix conditioned_similarity(std::mt19937_64& rng, Eigen::Index n, double cond) {
  ComplexMatrix s = ComplexMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    s(i, i) = n == 1 ? 1.0 : std::pow(cond, static_cast<double>(i) / static_cast<double>(n - 1));
  return random_unitary(rng, n) * s * random_unitary(rng, n);
}

inline double cond2(const ComplexMatrix& s) {
  Eigen::JacobiSVD<ComplexMatrix> svd(s);
  const auto& sv = svd.singularValues();
  return sv(0) / sv(sv.size() - 1);
}

}  // namespace pnfc::fixtures
