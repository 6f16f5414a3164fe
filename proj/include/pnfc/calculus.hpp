// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pnfc/cmat.hpp"
#include "pnfc/funcspace.hpp"
#include "pnfc/numerics.hpp"
#include "pnfc/spectra.hpp"

namespace pnfc {

/// Operators X_1..X_r embedded as X~_j = I (x) ... (x) X_j (x) ... (x) I on the tensor space.
struct LiftedSystem {
  std::vector<ComplexMatrix> factors;
  std::vector<Eigen::Index> factor_dims;
  std::vector<ComplexMatrix> lifted;
  std::vector<Decomposition> decompositions;

  std::size_t arity() const { return factors.size(); }
  Eigen::Index dim() const {
    Eigen::Index d = 1;
    for (auto n : factor_dims) d *= n;
    return d;
  }
};

struct LiftOptions {
  DecomposeOptions decompose;
  Eigen::Index dimension_cap = default_dimension_cap;
  /// Above this tensor dimension the commutator check runs on probe vectors instead of full
  /// matrix products.
  Eigen::Index dense_commutator_check_limit = 256;
};

namespace detail {

inline ComplexMatrix lift_one(std::span<const ComplexMatrix> factors, std::size_t j,
                              Eigen::Index cap) {
  std::vector<ComplexMatrix> parts;
  parts.reserve(factors.size());
  for (std::size_t i = 0; i < factors.size(); ++i)
    parts.push_back(i == j ? factors[i] : identity(factors[i].rows()));
  return kron_all(parts, cap);
}

inline void check_lifted_commute(const LiftedSystem& sys, const LiftOptions& opt) {
  const std::size_t r = sys.arity();
  std::vector<double> norms(r);
  for (std::size_t j = 0; j < r; ++j) norms[j] = op_norm(sys.factors[j]);
  const Eigen::Index d = sys.dim();
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> gauss;
  ComplexMatrix probes(d, 4);
  for (Eigen::Index i = 0; i < probes.size(); ++i) probes(i) = Complex(gauss(rng), gauss(rng));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i + 1; j < r; ++j) {
      const double bound = 1e-12 * norms[i] * norms[j];
      double residual;
      if (d <= opt.dense_commutator_check_limit) {
        residual = op_norm(commutator(sys.lifted[i], sys.lifted[j]));
      } else {
        const ComplexMatrix c =
            sys.lifted[i] * (sys.lifted[j] * probes) - sys.lifted[j] * (sys.lifted[i] * probes);
        residual = 0.0;
        for (Eigen::Index k = 0; k < probes.cols(); ++k)
          residual = std::max(residual, c.col(k).norm() / probes.col(k).norm());
      }
      if (residual > bound)
        throw ToleranceError("calculus", "lifted operators " + std::to_string(i + 1) + " and " +
                                             std::to_string(j + 1) + " fail to commute");
    }
  }
}

}  // namespace detail

/// Tensor lifting with caller-supplied decompositions (e.g. cluster-restricted ones).
inline LiftedSystem lift_with(std::vector<ComplexMatrix> factors,
                              std::vector<Decomposition> decompositions,
                              const LiftOptions& opt = {}) {
  if (factors.empty()) throw PreconditionError("calculus", "lift needs at least one factor");
  if (decompositions.size() != factors.size())
    throw PreconditionError("calculus", "one decomposition per factor is required");
  LiftedSystem sys;
  Eigen::Index d = 1;
  for (const auto& x : factors) {
    require_square(x, "calculus", "lift factor");
    d *= x.rows();
    if (d > opt.dimension_cap)
      throw DimensionCapError("calculus", "tensor dimension exceeds the cap " +
                                              std::to_string(opt.dimension_cap));
    sys.factor_dims.push_back(x.rows());
  }
  for (std::size_t j = 0; j < factors.size(); ++j)
    if (decompositions[j].source_dim != factors[j].rows())
      throw DimensionError("calculus", "decomposition does not match its factor");
  sys.factors = std::move(factors);
  sys.decompositions = std::move(decompositions);
  for (std::size_t j = 0; j < sys.factors.size(); ++j)
    sys.lifted.push_back(detail::lift_one(sys.factors, j, opt.dimension_cap));
  detail::check_lifted_commute(sys, opt);
  return sys;
}

inline LiftedSystem lift(std::vector<ComplexMatrix> factors, const LiftOptions& opt = {}) {
  Eigen::Index d = 1;
  for (const auto& x : factors) {
    require_square(x, "calculus", "lift factor");
    d *= x.rows();
    if (d > opt.dimension_cap)
      throw DimensionCapError("calculus", "tensor dimension exceeds the cap " +
                                              std::to_string(opt.dimension_cap));
  }
  std::vector<Decomposition> decs;
  decs.reserve(factors.size());
  for (const auto& x : factors) decs.push_back(decompose(x, opt.decompose));
  return lift_with(std::move(factors), std::move(decs), opt);
}

struct LedgerEntry {
  std::vector<std::size_t> components;  // component index per factor
  std::vector<Complex> lambdas;
  MultiIndex alpha;
  Complex coefficient;        // partial^alpha f(lambda) / alpha!
  double contribution_norm;   // |coefficient| * prod_j ||N_j^alpha_j P_j||
};

struct ThreeTermSplit {
  ComplexMatrix s0;       // alpha = 0
  ComplexMatrix s_mixed;  // 0 < |support(alpha)| < r
  ComplexMatrix s_full;   // support(alpha) = {1..r}
};

struct CalculusResult {
  ComplexMatrix value;
  std::vector<LedgerEntry> term_ledger;
  ThreeTermSplit split;
};

namespace detail {

/// N^q P for q = 0..nu-1 of one component.
inline std::vector<ComplexMatrix> nilpotent_powers(const SpectralComponent& c) {
  std::vector<ComplexMatrix> out;
  out.push_back(c.projector);
  for (int q = 1; q < c.nilpotency_index; ++q) out.push_back(c.nilpotent * out.back());
  return out;
}

}  // namespace detail

/// f(X) = sum_k sum_{q < nu_k} f^{(q)}(lambda_k)/q! N_k^q P_k.
inline ComplexMatrix func_univariate(const AnalyticFunction& f, const Decomposition& dec) {
  if (f.arity() != 1) throw PreconditionError("calculus", "func_univariate needs arity 1");
  ComplexMatrix out = ComplexMatrix::Zero(dec.source_dim, dec.source_dim);
  for (const auto& c : dec.components) {
    const Jet j = f.jet(std::span<const Complex>(&c.lambda, 1), {c.nilpotency_index - 1});
    ComplexMatrix term = c.projector;
    for (int q = 0; q < c.nilpotency_index; ++q) {
      if (q > 0) term = c.nilpotent * term;
      out += j[static_cast<std::size_t>(q)] * term;
    }
  }
  return out;
}

/// Projector-nilpotent multivariate calculus on the lifted system: the sum over eigenvalue
/// tuples and multi-indices alpha (alpha_j < nu_j) of
/// [partial^alpha f(lambda) / alpha!] (x)_j N_j^{alpha_j} P_j, split by support(alpha).
inline CalculusResult func_multivariate(const AnalyticFunction& f, const LiftedSystem& sys) {
  const std::size_t r = sys.arity();
  if (f.arity() != r)
    throw PreconditionError("calculus", "function arity " + std::to_string(f.arity()) +
                                            " differs from the number of factors " +
                                            std::to_string(r));
  const Eigen::Index d = sys.dim();
  CalculusResult res;
  res.split.s0 = ComplexMatrix::Zero(d, d);
  res.split.s_mixed = ComplexMatrix::Zero(d, d);
  res.split.s_full = ComplexMatrix::Zero(d, d);

  std::vector<std::vector<std::vector<ComplexMatrix>>> powers(r);
  std::vector<std::vector<std::vector<double>>> power_norms(r);
  for (std::size_t j = 0; j < r; ++j) {
    for (const auto& c : sys.decompositions[j].components) {
      powers[j].push_back(detail::nilpotent_powers(c));
      std::vector<double> norms;
      for (const auto& m : powers[j].back()) norms.push_back(op_norm(m));
      power_norms[j].push_back(std::move(norms));
    }
    if (powers[j].empty()) throw PreconditionError("calculus", "factor has no spectral components");
  }

  std::vector<std::size_t> tuple(r, 0);
  std::vector<Complex> lambdas(r);
  std::vector<int> caps(r);
  std::vector<ComplexMatrix> parts(r);
  while (true) {
    for (std::size_t j = 0; j < r; ++j) {
      const auto& c = sys.decompositions[j].components[tuple[j]];
      lambdas[j] = c.lambda;
      caps[j] = c.nilpotency_index - 1;
    }
    const Jet coeffs = f.jet(lambdas, caps);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      MultiIndex alpha{coeffs.multi_index(i)};
      const Complex a = coeffs[i];
      double norm = std::abs(a);
      for (std::size_t j = 0; j < r; ++j)
        norm *= power_norms[j][tuple[j]][static_cast<std::size_t>(alpha[j])];
      res.term_ledger.push_back({tuple, lambdas, alpha, a, norm});
      if (a == Complex(0.0)) continue;
      for (std::size_t j = 0; j < r; ++j)
        parts[j] = powers[j][tuple[j]][static_cast<std::size_t>(alpha[j])];
      const ComplexMatrix term = a * kron_all(parts, d);
      const std::size_t support = alpha.support_size();
      if (support == 0)
        res.split.s0 += term;
      else if (support == r)
        res.split.s_full += term;
      else
        res.split.s_mixed += term;
    }
    std::size_t j = r;
    while (j-- > 0) {
      if (++tuple[j] < powers[j].size()) break;
      tuple[j] = 0;
    }
    if (j == static_cast<std::size_t>(-1)) break;
  }
  res.value = res.split.s0 + res.split.s_mixed + res.split.s_full;
  return res;
}

inline ThreeTermSplit three_term_split(const CalculusResult& result) { return result.split; }

/// Trapezoidal Dunford integral (1/2 pi i) \oint f(z) (zI - x)^{-1} dz.
inline ComplexMatrix dunford(const AnalyticFunction& f, const ComplexMatrix& x,
                             const Contour& contour, bool require_full_enclosure = true) {
  if (f.arity() != 1) throw PreconditionError("calculus", "dunford needs arity 1");
  require_square(x, "calculus", "dunford argument");
  const auto eigs = eigenvalues(x);
  check_contour_clearance(eigs, contour, 0.05, "calculus");
  if (require_full_enclosure)
    for (Complex mu : eigs)
      if (!contour.encloses(mu))
        throw ContourTooCloseError("calculus", "contour does not enclose the whole spectrum");
  return contour_integral(x, contour, [&](Complex z) { return f({z}); });
}

struct DunfordOptions {
  /// Upper bound on nodes^r * dim^2 (complex multiply-adds of the tensor assembly).
  double cost_budget = 4e10;
  bool require_full_enclosure = true;
};

/// Iterated r-fold Dunford integral on the lifted system, assembled from Kronecker products of
/// per-factor resolvents of the original factors.
inline ComplexMatrix dunford_multivariate(const AnalyticFunction& f, const LiftedSystem& sys,
                                          std::span<const Contour> contours,
                                          const DunfordOptions& opt = {}) {
  const std::size_t r = sys.arity();
  if (r > 3) throw CostGuardError("calculus", "the Dunford oracle is limited to r <= 3");
  if (contours.size() != r || f.arity() != r)
    throw PreconditionError("calculus", "need one contour per factor and an arity-r function");
  double cost = static_cast<double>(sys.dim()) * static_cast<double>(sys.dim());
  for (const auto& c : contours) cost *= c.nodes;
  if (cost > opt.cost_budget)
    throw CostGuardError("calculus", "nodes^r * dim^2 exceeds the Dunford cost budget");

  std::vector<std::vector<ComplexMatrix>> weighted(r);
  std::vector<std::vector<Complex>> nodes(r);
  for (std::size_t j = 0; j < r; ++j) {
    const auto eigs = eigenvalues(sys.factors[j]);
    check_contour_clearance(eigs, contours[j], 0.05, "calculus");
    if (opt.require_full_enclosure)
      for (Complex mu : eigs)
        if (!contours[j].encloses(mu))
          throw ContourTooCloseError("calculus", "contour " + std::to_string(j + 1) +
                                                     " does not enclose its factor's spectrum");
    for (int k = 0; k < contours[j].nodes; ++k) {
      nodes[j].push_back(contours[j].node(k));
      weighted[j].push_back(contours[j].weight(k) * resolvent(sys.factors[j], nodes[j].back()));
    }
  }

  std::vector<Complex> z(r);
  // integrate(j) = sum_k w_k R_j(z_k) (x) integrate(j+1), with f folded into the last level.
  std::function<ComplexMatrix(std::size_t)> integrate = [&](std::size_t j) -> ComplexMatrix {
    const Eigen::Index tail_dim = [&] {
      Eigen::Index t = 1;
      for (std::size_t i = j; i < r; ++i) t *= sys.factor_dims[i];
      return t;
    }();
    ComplexMatrix acc = ComplexMatrix::Zero(tail_dim, tail_dim);
    for (std::size_t k = 0; k < nodes[j].size(); ++k) {
      z[j] = nodes[j][k];
      if (j + 1 == r)
        acc += f(z) * weighted[j][k];
      else
        acc += kron(weighted[j][k], integrate(j + 1), sys.dim());
    }
    return acc;
  };
  return integrate(0);
}

/// Contour per factor enclosing its whole spectrum with a margin.
inline Contour enclosing_contour(const ComplexMatrix& x, int nodes = 64, double margin = 1.0) {
  const auto eigs = eigenvalues(x);
  Complex c = 0.0;
  for (Complex mu : eigs) c += mu;
  c /= static_cast<double>(eigs.size());
  double rho = 0.0;
  for (Complex mu : eigs) rho = std::max(rho, std::abs(mu - c));
  return {c, rho + margin, nodes};
}

struct PowerSeriesOptions {
  double tail_tol = 1e-12;
};

/// Mean of the cluster representatives of each factor.
inline std::vector<Complex> default_series_center(const LiftedSystem& sys) {
  std::vector<Complex> center;
  for (const auto& dec : sys.decompositions) {
    Complex s = 0.0;
    for (const auto& c : dec.components) s += c.lambda;
    center.push_back(s / static_cast<double>(dec.components.size()));
  }
  return center;
}

/// Truncated lifted power series sum_{alpha <= cap} a_alpha prod_j (X~_j - c_j I)^{alpha_j}.
/// The tail is estimated from the shell cap < max_j alpha_j <= 2 cap with the majorant
/// sum |a_alpha| prod_j ||X_j - c_j I||^{alpha_j}.
inline ComplexMatrix power_series_apply(const AnalyticFunction& f, const LiftedSystem& sys,
                                        std::span<const Complex> center, int degree_cap,
                                        const PowerSeriesOptions& opt = {}) {
  const std::size_t r = sys.arity();
  if (f.arity() != r || center.size() != r)
    throw PreconditionError("calculus", "power series needs arity r and one center per factor");
  if (degree_cap < 1) throw PreconditionError("calculus", "degree_cap must be positive");

  std::vector<ComplexMatrix> shifted(r);
  std::vector<double> s(r);
  for (std::size_t j = 0; j < r; ++j) {
    shifted[j] = sys.factors[j];
    shifted[j].diagonal().array() -= center[j];
    s[j] = op_norm(shifted[j]);
  }
  const Jet coeffs = f.jet(center, std::vector<int>(r, 2 * degree_cap));
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const auto alpha = coeffs.multi_index(i);
    double m = std::abs(coeffs[i]);
    bool in_head = true;
    for (std::size_t j = 0; j < r; ++j) {
      m *= std::pow(s[j], alpha[j]);
      in_head = in_head && alpha[j] <= degree_cap;
    }
    (in_head ? head : tail) += m;
  }
  if (!(tail <= opt.tail_tol * std::max(1.0, head)))
    throw TailBoundError("calculus", "power series tail estimate " + std::to_string(tail) +
                                         " exceeds the tolerance at degree cap " +
                                         std::to_string(degree_cap));

  std::vector<std::vector<ComplexMatrix>> powers(r);
  for (std::size_t j = 0; j < r; ++j) {
    powers[j].push_back(identity(sys.factor_dims[j]));
    for (int q = 1; q <= degree_cap; ++q) powers[j].push_back(shifted[j] * powers[j].back());
  }
  std::vector<int> alpha(r, 0);
  std::function<ComplexMatrix(std::size_t)> assemble = [&](std::size_t j) -> ComplexMatrix {
    if (j == r) return ComplexMatrix::Constant(1, 1, coeffs.at(alpha));
    Eigen::Index tail_dim = 1;
    for (std::size_t i = j; i < r; ++i) tail_dim *= sys.factor_dims[i];
    ComplexMatrix acc = ComplexMatrix::Zero(tail_dim, tail_dim);
    for (int q = 0; q <= degree_cap; ++q) {
      alpha[j] = q;
      const ComplexMatrix inner = assemble(j + 1);
      if (j + 1 == r)
        acc += inner(0, 0) * powers[j][static_cast<std::size_t>(q)];
      else
        acc += kron(powers[j][static_cast<std::size_t>(q)], inner, sys.dim());
    }
    alpha[j] = 0;
    return acc;
  };
  return assemble(0);
}

/// power_series_apply with the degree cap doubled from `start` until the tail bound holds.
inline ComplexMatrix power_series_apply_auto(const AnalyticFunction& f, const LiftedSystem& sys,
                                             std::span<const Complex> center, int start = 8,
                                             int max_cap = 64,
                                             const PowerSeriesOptions& opt = {}) {
  for (int cap = start;; cap *= 2) {
    try {
      return power_series_apply(f, sys, center, cap, opt);
    } catch (const TailBoundError&) {
      if (cap * 2 > max_cap) throw;
    }
  }
}

/// value in cmat, ledger as CSV (lambda_tuple, alpha, contribution_norm), split as cmat blocks.
inline void write_ledger_csv(std::ostream& os, const CalculusResult& res) {
  using cmat::detail::format_double;
  os << "lambda_tuple,alpha,contribution_norm\n";
  for (const auto& e : res.term_ledger) {
    std::string lam, al;
    for (std::size_t j = 0; j < e.lambdas.size(); ++j) {
      if (j) {
        lam += ';';
        al += ';';
      }
      lam += format_double(e.lambdas[j].real()) + ' ' + format_double(e.lambdas[j].imag());
      al += std::to_string(e.alpha[j]);
    }
    os << lam << ',' << al << ',' << format_double(e.contribution_norm) << '\n';
  }
}

}  // namespace pnfc
