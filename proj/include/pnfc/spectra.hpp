// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pnfc/cmat.hpp"
#include "pnfc/numerics.hpp"

namespace pnfc {

/// Positively oriented circle discretized by the periodic trapezoidal rule.
struct Contour {
  Complex center{0.0, 0.0};
  double radius = 1.0;
  int nodes = 128;

  void validate() const {
    if (!(radius > 0.0) || !std::isfinite(radius))
      throw PreconditionError("spectra", "contour radius must be positive and finite");
    if (nodes < 16) throw PreconditionError("spectra", "contour needs at least 16 nodes");
  }

  Complex node(int k) const {
    const double theta = 2.0 * pi * static_cast<double>(k) / static_cast<double>(nodes);
    return center + radius * Complex(std::cos(theta), std::sin(theta));
  }

  /// Weight w_k with sum_k w_k g(z_k) ~ (1/2 pi i) \oint g(z) dz.
  Complex weight(int k) const { return (node(k) - center) / static_cast<double>(nodes); }

  double length() const { return 2.0 * pi * radius; }

  bool encloses(Complex z) const { return std::abs(z - center) < radius; }

  Contour with_nodes(int m) const { return {center, radius, m}; }
};

/// Throws unless every eigenvalue keeps a distance of at least margin*radius from the circle.
inline void check_contour_clearance(std::span<const Complex> eigs, const Contour& contour,
                                    double margin = 0.05, const char* module = "spectra") {
  contour.validate();
  for (Complex lambda : eigs) {
    const double d = std::abs(std::abs(lambda - contour.center) - contour.radius);
    if (d < margin * contour.radius) {
      std::ostringstream msg;
      msg << "eigenvalue (" << lambda.real() << ", " << lambda.imag() << ") lies within "
          << margin << "*radius of the contour centered at (" << contour.center.real() << ", "
          << contour.center.imag() << ") with radius " << contour.radius;
      throw ContourTooCloseError(module, msg.str());
    }
  }
}

/// sum_k weight(z_k) * (z_k I - x)^{-1} with the weights premultiplied by the trapezoid weights.
/// Fixed node order, so the reduction is deterministic.
template <typename ScalarFn>
ComplexMatrix contour_integral(const ComplexMatrix& x, const Contour& contour, ScalarFn&& scalar) {
  ComplexMatrix acc = ComplexMatrix::Zero(x.rows(), x.cols());
  for (int k = 0; k < contour.nodes; ++k) {
    const Complex z = contour.node(k);
    acc += (contour.weight(k) * scalar(z)) * resolvent(x, z);
  }
  return acc;
}

struct EigenCluster {
  Complex representative;
  std::vector<std::size_t> members;
};

/// Single-linkage clustering with link distance cluster_tol. Representatives are member means;
/// clusters come back sorted by (Re, Im) of the representative.
inline std::vector<EigenCluster> cluster_eigenvalues(std::span<const Complex> eigs,
                                                     double cluster_tol) {
  const std::size_t n = eigs.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(eigs[i] - eigs[j]) <= cluster_tol) parent[find(i)] = find(j);

  std::vector<EigenCluster> clusters;
  std::vector<std::ptrdiff_t> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = find(i);
    if (slot[root] < 0) {
      slot[root] = static_cast<std::ptrdiff_t>(clusters.size());
      clusters.push_back({});
    }
    clusters[static_cast<std::size_t>(slot[root])].members.push_back(i);
  }
  for (auto& c : clusters) {
    Complex sum = 0.0;
    for (auto m : c.members) sum += eigs[m];
    c.representative = sum / static_cast<double>(c.members.size());
  }
  std::stable_sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
    if (a.representative.real() != b.representative.real())
      return a.representative.real() < b.representative.real();
    return a.representative.imag() < b.representative.imag();
  });
  return clusters;
}

/// Riesz projector (1/2 pi i) \oint (zI - x)^{-1} dz, without the clearance check.
inline ComplexMatrix riesz_projector_unchecked(const ComplexMatrix& x, const Contour& contour) {
  return contour_integral(x, contour, [](Complex) { return Complex(1.0); });
}

inline ComplexMatrix riesz_projector(const ComplexMatrix& x, const Contour& contour) {
  require_square(x, "spectra", "riesz_projector argument");
  check_contour_clearance(eigenvalues(x), contour);
  return riesz_projector_unchecked(x, contour);
}

/// (x - lambda I) p.
inline ComplexMatrix nilpotent_part(const ComplexMatrix& x, Complex lambda, const ComplexMatrix& p) {
  ComplexMatrix shifted = x;
  shifted.diagonal().array() -= lambda;
  return shifted * p;
}

/// Smallest nu >= 1 with ||n^nu|| <= tol_nil * scale^nu, capped at the dimension.
inline int nilpotency_index(const ComplexMatrix& n, double scale, double tol_nil) {
  if (!(scale > 0.0)) throw PreconditionError("spectra", "nilpotency scale must be positive");
  const int dim = static_cast<int>(n.rows());
  ComplexMatrix power = n;
  double scale_power = scale;
  for (int nu = 1; nu < dim; ++nu) {
    if (op_norm(power) <= tol_nil * scale_power) return nu;
    power = power * n;
    scale_power *= scale;
  }
  return std::max(dim, 1);
}

struct SpectralComponent {
  Complex lambda;
  ComplexMatrix projector;
  ComplexMatrix nilpotent;
  int nilpotency_index = 1;
  int algebraic_multiplicity = 1;
};

struct Decomposition {
  int source_dim = 0;
  std::vector<SpectralComponent> components;
  double residual_reconstruction = 0.0;
  double residual_resolution = 0.0;
  double tol_dec = 1e-8;
  double tol_nil = 1e-8;
};

struct DecomposeOptions {
  /// Link distance for eigenvalue clustering; unset means 1e-6 * ||X||.
  std::optional<double> cluster_tol;
  double tol_dec = 1e-8;
  double tol_nil = 1e-8;
  int nodes = 128;
};

namespace detail {

inline double effective_cluster_tol(const DecomposeOptions& opt, double xnorm) {
  if (opt.cluster_tol) {
    if (!(*opt.cluster_tol > 0.0))
      throw PreconditionError("spectra", "cluster_tol must be positive");
    return *opt.cluster_tol;
  }
  return std::max(1e-6 * xnorm, std::numeric_limits<double>::min());
}

/// Circle isolating one cluster: a third of the distance to the nearest foreign eigenvalue, or a
/// generous circle when there is nothing else to exclude.
inline Contour isolating_contour(const EigenCluster& cluster, std::span<const Complex> eigs,
                                 std::span<const Complex> foreign, double cluster_tol,
                                 double xnorm, int nodes) {
  double spread = 0.0;
  for (auto m : cluster.members)
    spread = std::max(spread, std::abs(eigs[m] - cluster.representative));
  double nearest = std::numeric_limits<double>::infinity();
  for (Complex mu : foreign) nearest = std::min(nearest, std::abs(mu - cluster.representative));
  double radius = std::isfinite(nearest)
                      ? nearest / 3.0
                      : std::max(10.0 * spread + cluster_tol, std::max(1.0, xnorm));
  if (!(spread < 0.95 * radius))
    throw ClusterSeparationError(
        "spectra", "cluster spread " + std::to_string(spread) +
                       " does not fit inside its isolating circle of radius " +
                       std::to_string(radius));
  return {cluster.representative, radius, nodes};
}

inline SpectralComponent build_component(const ComplexMatrix& x, const Contour& contour,
                                         double xnorm, const DecomposeOptions& opt) {
  SpectralComponent c;
  c.projector = riesz_projector_unchecked(x, contour);
  const Complex tr = c.projector.trace();
  c.algebraic_multiplicity = static_cast<int>(std::lround(tr.real()));
  if (c.algebraic_multiplicity < 1)
    throw IdempotenceError("spectra", "projector trace rounds to zero multiplicity");
  c.lambda = (x * c.projector).trace() / tr;
  c.nilpotent = nilpotent_part(x, c.lambda, c.projector);
  const double pnorm = op_norm(c.projector);
  const double idem = op_norm(c.projector * c.projector - c.projector);
  if (idem > opt.tol_dec * pnorm)
    throw IdempotenceError("spectra", "projector idempotence residual " + std::to_string(idem) +
                                          " exceeds tol_dec*||P|| (ill-conditioned Jordan "
                                          "structure at this cluster_tol)");
  const double scale = xnorm > 0.0 ? xnorm : 1.0;
  c.nilpotency_index = nilpotency_index(c.nilpotent, scale, opt.tol_nil);
  if (c.nilpotency_index > c.algebraic_multiplicity)
    throw ToleranceError("spectra", "detected nilpotency index exceeds algebraic multiplicity");
  return c;
}

inline void sort_components(std::vector<SpectralComponent>& comps) {
  std::stable_sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
    if (a.lambda.real() != b.lambda.real()) return a.lambda.real() < b.lambda.real();
    return a.lambda.imag() < b.lambda.imag();
  });
}

inline ComplexMatrix reconstruction(const Decomposition& dec) {
  ComplexMatrix sum = ComplexMatrix::Zero(dec.source_dim, dec.source_dim);
  for (const auto& c : dec.components) sum += c.lambda * c.projector + c.nilpotent;
  return sum;
}

inline ComplexMatrix projector_sum(const Decomposition& dec) {
  ComplexMatrix sum = ComplexMatrix::Zero(dec.source_dim, dec.source_dim);
  for (const auto& c : dec.components) sum += c.projector;
  return sum;
}

inline void check_cluster_gaps(std::span<const Complex> eigs,
                               const std::vector<EigenCluster>& clusters, double cluster_tol) {
  for (std::size_t a = 0; a < clusters.size(); ++a)
    for (std::size_t b = a + 1; b < clusters.size(); ++b)
      for (auto i : clusters[a].members)
        for (auto j : clusters[b].members)
          if (std::abs(eigs[i] - eigs[j]) <= 4.0 * cluster_tol)
            throw ClusterSeparationError(
                "spectra", "eigenvalue clusters are closer than 4*cluster_tol; the "
                           "Jordan structure is undecidable at this cluster_tol");
}

}  // namespace detail

/// Projector-nilpotent decomposition X = sum_k (lambda_k P_k + N_k), one component per
/// eigenvalue cluster. Jordan structure of nearly defective matrices is decided by cluster_tol.
inline Decomposition decompose(const ComplexMatrix& x, const DecomposeOptions& opt = {}) {
  require_square(x, "spectra", "decompose argument");
  const double xnorm = op_norm(x);
  const double ctol = detail::effective_cluster_tol(opt, xnorm);
  const std::vector<Complex> eigs = eigenvalues(x);
  const auto clusters = cluster_eigenvalues(eigs, ctol);
  detail::check_cluster_gaps(eigs, clusters, ctol);

  Decomposition dec;
  dec.source_dim = static_cast<int>(x.rows());
  dec.tol_dec = opt.tol_dec;
  dec.tol_nil = opt.tol_nil;
  for (const auto& cl : clusters) {
    std::vector<Complex> foreign;
    for (std::size_t i = 0; i < eigs.size(); ++i)
      if (std::find(cl.members.begin(), cl.members.end(), i) == cl.members.end())
        foreign.push_back(eigs[i]);
    const Contour contour =
        detail::isolating_contour(cl, eigs, foreign, ctol, xnorm, opt.nodes);
    check_contour_clearance(eigs, contour);
    dec.components.push_back(detail::build_component(x, contour, xnorm, opt));
  }
  detail::sort_components(dec.components);

  dec.residual_resolution = op_norm(detail::projector_sum(dec) - identity(x.rows()));
  dec.residual_reconstruction = op_norm(detail::reconstruction(dec) - x);
  int total = 0;
  for (const auto& c : dec.components) total += c.algebraic_multiplicity;
  if (total != dec.source_dim)
    throw ToleranceError("spectra", "algebraic multiplicities do not sum to the dimension");
  if (dec.residual_resolution > opt.tol_dec)
    throw ToleranceError("spectra", "resolution of identity residual " +
                                        std::to_string(dec.residual_resolution) +
                                        " exceeds tol_dec");
  if (dec.residual_reconstruction > opt.tol_dec * std::max(xnorm, 1e-300))
    throw ToleranceError("spectra", "reconstruction residual " +
                                        std::to_string(dec.residual_reconstruction) +
                                        " exceeds tol_dec*||X||");
  return dec;
}

/// Decomposition restricted to the eigenvalues enclosed by `region`. The residuals are measured
/// against the Riesz projector P_region of the whole region: ||sum P_k - P_region|| and
/// ||sum (lambda_k P_k + N_k) - X P_region||.
inline Decomposition decompose_within(const ComplexMatrix& x, const Contour& region,
                                      const DecomposeOptions& opt = {}) {
  require_square(x, "spectra", "decompose_within argument");
  const double xnorm = op_norm(x);
  const double ctol = detail::effective_cluster_tol(opt, xnorm);
  const std::vector<Complex> eigs = eigenvalues(x);
  check_contour_clearance(eigs, region);
  std::vector<Complex> inside, outside;
  for (Complex mu : eigs) (region.encloses(mu) ? inside : outside).push_back(mu);
  if (inside.empty()) throw PreconditionError("spectra", "contour encloses no eigenvalue");
  const auto clusters = cluster_eigenvalues(inside, ctol);
  detail::check_cluster_gaps(inside, clusters, ctol);

  Decomposition dec;
  dec.source_dim = static_cast<int>(x.rows());
  dec.tol_dec = opt.tol_dec;
  dec.tol_nil = opt.tol_nil;
  for (const auto& cl : clusters) {
    std::vector<Complex> foreign = outside;
    for (std::size_t i = 0; i < inside.size(); ++i)
      if (std::find(cl.members.begin(), cl.members.end(), i) == cl.members.end())
        foreign.push_back(inside[i]);
    const Contour contour =
        detail::isolating_contour(cl, inside, foreign, ctol, xnorm, opt.nodes);
    check_contour_clearance(eigs, contour);
    dec.components.push_back(detail::build_component(x, contour, xnorm, opt));
  }
  detail::sort_components(dec.components);

  const ComplexMatrix region_projector = riesz_projector_unchecked(x, region.with_nodes(opt.nodes));
  dec.residual_resolution = op_norm(detail::projector_sum(dec) - region_projector);
  dec.residual_reconstruction = op_norm(detail::reconstruction(dec) - x * region_projector);
  return dec;
}

struct DecompositionDiagnostics {
  double idempotence = 0.0;         // max_k ||P_k^2 - P_k||
  double idempotence_relative = 0.0;  // max_k ||P_k^2 - P_k|| / ||P_k||
  double projector_nilpotent = 0.0;   // max_k max(||P N - N||, ||N P - N||) / max(1, ||N||)
  double nilpotency = 0.0;            // max_k ||N^nu|| / ||X||^nu
  double cross_orthogonality = 0.0;   // max_{k != l} ||P_k P_l||
  double resolution = 0.0;            // ||sum P - I||
  double reconstruction = 0.0;        // ||sum (lambda P + N) - X|| / ||X||
  bool multiplicities_ok = true;
  bool index_bounded = true;          // nu <= m_alg for all components
  bool pass = true;
};

inline DecompositionDiagnostics verify_decomposition(const Decomposition& dec,
                                                     const ComplexMatrix& x) {
  if (x.rows() != dec.source_dim || x.cols() != dec.source_dim)
    throw DimensionError("spectra", "decomposition and matrix dimensions differ");
  DecompositionDiagnostics d;
  const double xnorm = op_norm(x);
  const double scale = xnorm > 0.0 ? xnorm : 1.0;
  int total = 0;
  bool idem_ok = true, pn_ok = true, nil_ok = true;
  for (std::size_t k = 0; k < dec.components.size(); ++k) {
    const auto& c = dec.components[k];
    const double pnorm = op_norm(c.projector);
    const double idem = op_norm(c.projector * c.projector - c.projector);
    d.idempotence = std::max(d.idempotence, idem);
    d.idempotence_relative = std::max(d.idempotence_relative, pnorm > 0 ? idem / pnorm : idem);
    idem_ok = idem_ok && idem <= dec.tol_dec * pnorm;

    const double nscale = std::max(1.0, op_norm(c.nilpotent));
    const double pn = std::max(op_norm(c.projector * c.nilpotent - c.nilpotent),
                               op_norm(c.nilpotent * c.projector - c.nilpotent)) /
                      nscale;
    d.projector_nilpotent = std::max(d.projector_nilpotent, pn);
    pn_ok = pn_ok && pn <= dec.tol_dec;

    ComplexMatrix power = identity(dec.source_dim);
    for (int i = 0; i < c.nilpotency_index; ++i) power = power * c.nilpotent;
    const double nil = op_norm(power) / std::pow(scale, c.nilpotency_index);
    d.nilpotency = std::max(d.nilpotency, nil);
    nil_ok = nil_ok && nil <= dec.tol_nil;

    d.index_bounded = d.index_bounded && c.nilpotency_index <= c.algebraic_multiplicity;
    total += c.algebraic_multiplicity;
    for (std::size_t l = 0; l < dec.components.size(); ++l)
      if (l != k)
        d.cross_orthogonality = std::max(
            d.cross_orthogonality, op_norm(c.projector * dec.components[l].projector));
  }
  d.multiplicities_ok = total == dec.source_dim;
  d.resolution = op_norm(detail::projector_sum(dec) - identity(dec.source_dim));
  d.reconstruction = op_norm(detail::reconstruction(dec) - x) / scale;
  d.pass = idem_ok && pn_ok && nil_ok && d.index_bounded && d.multiplicities_ok &&
           d.cross_orthogonality <= dec.tol_dec && d.resolution <= dec.tol_dec &&
           d.reconstruction <= dec.tol_dec;
  return d;
}

// Structured text record:
//
//   decomposition v1
//   source_dim <d>
//   tol_dec <t>
//   tol_nil <t>
//   residual_reconstruction <r>
//   residual_resolution <r>
//   components <k>
//   component <i>
//   lambda <re> <im>
//   algebraic_multiplicity <m>
//   nilpotency_index <nu>
//   projector
//   <cmat block>
//   nilpotent
//   <cmat block>
//   ...

inline void write_decomposition(std::ostream& os, const Decomposition& dec) {
  using cmat::detail::format_double;
  os << "decomposition v1\n";
  os << "source_dim " << dec.source_dim << '\n';
  os << "tol_dec " << format_double(dec.tol_dec) << '\n';
  os << "tol_nil " << format_double(dec.tol_nil) << '\n';
  os << "residual_reconstruction " << format_double(dec.residual_reconstruction) << '\n';
  os << "residual_resolution " << format_double(dec.residual_resolution) << '\n';
  os << "components " << dec.components.size() << '\n';
  for (std::size_t k = 0; k < dec.components.size(); ++k) {
    const auto& c = dec.components[k];
    os << "component " << k << '\n';
    os << "lambda " << format_double(c.lambda.real()) << ' ' << format_double(c.lambda.imag())
       << '\n';
    os << "algebraic_multiplicity " << c.algebraic_multiplicity << '\n';
    os << "nilpotency_index " << c.nilpotency_index << '\n';
    os << "projector\n";
    cmat::write(os, c.projector);
    os << "nilpotent\n";
    cmat::write(os, c.nilpotent);
  }
}

inline Decomposition read_decomposition(std::istream& is) {
  auto expect = [&](const std::string& key) {
    std::string line;
    while (std::getline(is, line) && line.find_first_not_of(" \t\r") == std::string::npos) {
    }
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) throw ParseError("spectra", "decomposition record: expected '" + key + "'");
    std::string rest;
    std::getline(ls, rest);
    return rest;
  };
  auto as_double = [](const std::string& s) {
    std::istringstream ls(s);
    std::string tok;
    ls >> tok;
    return cmat::detail::parse_double(tok, 0);
  };
  Decomposition dec;
  if (expect("decomposition").find("v1") == std::string::npos)
    throw ParseError("spectra", "decomposition record: unsupported version");
  dec.source_dim = std::stoi(expect("source_dim"));
  dec.tol_dec = as_double(expect("tol_dec"));
  dec.tol_nil = as_double(expect("tol_nil"));
  dec.residual_reconstruction = as_double(expect("residual_reconstruction"));
  dec.residual_resolution = as_double(expect("residual_resolution"));
  const int count = std::stoi(expect("components"));
  for (int k = 0; k < count; ++k) {
    expect("component");
    SpectralComponent c;
    std::istringstream ls(expect("lambda"));
    std::string re, im;
    ls >> re >> im;
    c.lambda = Complex(cmat::detail::parse_double(re, 0), cmat::detail::parse_double(im, 0));
    c.algebraic_multiplicity = std::stoi(expect("algebraic_multiplicity"));
    c.nilpotency_index = std::stoi(expect("nilpotency_index"));
    expect("projector");
    c.projector = cmat::read(is);
    expect("nilpotent");
    c.nilpotent = cmat::read(is);
    dec.components.push_back(std::move(c));
  }
  return dec;
}

}  // namespace pnfc
