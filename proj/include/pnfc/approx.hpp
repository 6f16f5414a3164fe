// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pnfc/calculus.hpp"
#include "pnfc/cmat.hpp"
#include "pnfc/funcspace.hpp"
#include "pnfc/numerics.hpp"
#include "pnfc/spectra.hpp"

namespace pnfc {

enum class ModelKind { harmonic, anharmonic_x4, complex_harmonic, jordan_toy, custom_file };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::harmonic:
      return "harmonic";
    case ModelKind::anharmonic_x4:
      return "anharmonic_x4";
    case ModelKind::complex_harmonic:
      return "complex_harmonic";
    case ModelKind::jordan_toy:
      return "jordan_toy";
    case ModelKind::custom_file:
      return "custom_file";
  }
  return {};
}

inline ModelKind model_kind_from_string(const std::string& s) {
  for (ModelKind k : {ModelKind::harmonic, ModelKind::anharmonic_x4, ModelKind::complex_harmonic,
                      ModelKind::jordan_toy, ModelKind::custom_file})
    if (to_string(k) == s) return k;
  throw ParseError("approx", "unknown model kind '" + s + "'");
}

/// Finite reference surrogate of an operator, in the Hermite basis for the oscillator models.
struct OperatorModel {
  ModelKind kind = ModelKind::harmonic;
  int ref_dim = 0;
  int guard = 0;
  ComplexMatrix matrix_ref;

  std::string name() const { return to_string(kind); }
};

/// Lowering operator, a(n-1, n) = sqrt(n).
inline ComplexMatrix ladder(int dim) {
  ComplexMatrix a = ComplexMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

/// Fixed 4x4 toy S blkdiag(J2(1), J2(i)) S^{-1} with cond(S) = 10.
inline ComplexMatrix jordan_toy_matrix() {
  // Deterministic unitaries from Householder QR of fixed integer matrices.
  ComplexMatrix a(4, 4), b(4, 4);
  a << Complex(1, 2), Complex(-3, 0), Complex(2, 1), Complex(0, -1),  //
      Complex(0, 1), Complex(2, -2), Complex(1, 0), Complex(3, 1),     //
      Complex(-1, 0), Complex(1, 1), Complex(-2, 3), Complex(1, 0),    //
      Complex(2, -1), Complex(0, 0), Complex(1, -1), Complex(-1, 2);
  b << Complex(3, 0), Complex(1, -1), Complex(0, 2), Complex(-1, 0),  //
      Complex(-1, 1), Complex(2, 0), Complex(1, 1), Complex(0, -2),    //
      Complex(0, -1), Complex(-2, 1), Complex(3, 0), Complex(1, 1),    //
      Complex(1, 0), Complex(0, 1), Complex(-1, -1), Complex(2, 0);
  const ComplexMatrix u = Eigen::HouseholderQR<ComplexMatrix>(a).householderQ();
  const ComplexMatrix v = Eigen::HouseholderQR<ComplexMatrix>(b).householderQ();
  ComplexMatrix sigma = ComplexMatrix::Zero(4, 4);
  for (int k = 0; k < 4; ++k) sigma(k, k) = std::pow(10.0, k / 3.0);
  const ComplexMatrix s = u * sigma * v.adjoint();
  const ComplexMatrix s_inv = v * sigma.inverse() * u.adjoint();
  const std::vector<ComplexMatrix> blocks = {jordan_block(2, 1.0), jordan_block(2, Complex(0.0, 1.0))};
  return s * block_diagonal(blocks) * s_inv;
}

inline constexpr int jordan_toy_dim = 4;

/// Oscillator models assembled at ref_dim + guard and truncated, so the retained block equals the
/// compression of the infinite banded operator.
inline OperatorModel build_model(ModelKind kind, int ref_dim, int guard) {
  OperatorModel m;
  m.kind = kind;
  m.ref_dim = ref_dim;
  m.guard = guard;
  if (kind == ModelKind::jordan_toy) {
    if (ref_dim != jordan_toy_dim)
      throw PreconditionError("approx", "jordan_toy has fixed dimension 4");
    m.matrix_ref = jordan_toy_matrix();
    return m;
  }
  if (kind == ModelKind::custom_file)
    throw PreconditionError("approx", "custom_file models are loaded with load_custom_model");
  if (ref_dim < 16) throw PreconditionError("approx", "ref_dim must be at least 16");
  const int need = kind == ModelKind::anharmonic_x4 ? 4 : 2;
  if (guard < need)
    throw PreconditionError("approx", "guard " + std::to_string(guard) + " is too small for " +
                                          to_string(kind) + " (needs " + std::to_string(need) + ")");
  const int big = ref_dim + guard;
  const ComplexMatrix a = ladder(big);
  const ComplexMatrix ad = a.adjoint();
  const ComplexMatrix x = (a + ad) / std::sqrt(2.0);
  const ComplexMatrix p = (a - ad) / Complex(0.0, std::sqrt(2.0));
  const ComplexMatrix p2 = p * p;
  const ComplexMatrix x2 = x * x;
  ComplexMatrix full;
  switch (kind) {
    case ModelKind::harmonic:
      full = p2 + x2;
      break;
    case ModelKind::anharmonic_x4:
      full = p2 + x2 * x2;
      break;
    case ModelKind::complex_harmonic:
      full = p2 + Complex(0.0, 1.0) * x2;
      break;
    default:
      break;
  }
  m.matrix_ref = full.topLeftCorner(ref_dim, ref_dim);
  return m;
}

inline OperatorModel load_custom_model(const std::string& path) {
  OperatorModel m;
  m.kind = ModelKind::custom_file;
  m.matrix_ref = cmat::read_file(path);
  require_square(m.matrix_ref, "approx", "custom model matrix");
  m.ref_dim = static_cast<int>(m.matrix_ref.rows());
  return m;
}

/// Largest |i - j| with a nonzero entry.
inline int bandwidth(const ComplexMatrix& m, double tol = 0.0) {
  int bw = 0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (std::abs(m(i, j)) > tol) bw = std::max(bw, static_cast<int>(std::abs(i - j)));
  return bw;
}

/// One approximation step: X_n (or a perturbed operator) and its errors against the reference.
struct TruncationPoint {
  int n = 0;
  double parameter = 0.0;  // perturbation size for perturbation families, 0 otherwise
  ComplexMatrix x_n;
  ComplexMatrix x_n_padded;
  double eps_n = 0.0;        // ||(X_n - X) R(z0)||
  double eps_cluster = 0.0;  // ||(X_n - X) R(z0) P_cluster||
  std::vector<double> eps_factors;          // per factor, multivariate only
  std::vector<double> eps_cluster_factors;  // per factor, multivariate only
  double func_error_norm = 0.0;
  std::vector<double> func_error_vectors;
  double bound_rhs = 0.0;
  bool level2_ok = false;
};

/// Leading n x n block and its zero-padded embedding.
inline TruncationPoint compress(const OperatorModel& model, int n) {
  if (n < 1 || (n > model.ref_dim / 2 && n != model.ref_dim))
    throw PreconditionError("approx", "truncation n = " + std::to_string(n) +
                                          " leaves no reference headroom (ref_dim " +
                                          std::to_string(model.ref_dim) + ")");
  TruncationPoint pt;
  pt.n = n;
  pt.x_n = model.matrix_ref.topLeftCorner(n, n);
  pt.x_n_padded = ComplexMatrix::Zero(model.ref_dim, model.ref_dim);
  pt.x_n_padded.topLeftCorner(n, n) = pt.x_n;
  return pt;
}

/// Requires z0 to keep distance >= 1 from the spectra of the reference and the approximant.
inline void check_z0(const ComplexMatrix& x, Complex z0, const char* what) {
  for (Complex mu : eigenvalues(x))
    if (std::abs(mu - z0) < 1.0 - 1e-9)
      throw PreconditionError("approx", std::string("z0 lies within distance 1 of the spectrum of ") +
                                            what);
}

inline double resolvent_error(const ComplexMatrix& reference, TruncationPoint& point, Complex z0) {
  check_z0(reference, z0, "the reference operator");
  check_z0(point.x_n_padded, z0, "the approximant");
  point.eps_n = op_norm((point.x_n_padded - reference) * resolvent(reference, z0));
  return point.eps_n;
}

inline double resolvent_error(const OperatorModel& model, TruncationPoint& point, Complex z0) {
  return resolvent_error(model.matrix_ref, point, z0);
}

/// Reference operator plus a sequence of approximants of the same dimension.
struct ApproximationFamily {
  std::string name;
  ComplexMatrix reference;
  std::vector<TruncationPoint> points;
};

inline ApproximationFamily compression_family(const OperatorModel& model,
                                              std::span<const int> n_list) {
  ApproximationFamily fam;
  fam.name = model.name();
  fam.reference = model.matrix_ref;
  for (int n : n_list) fam.points.push_back(compress(model, n));
  return fam;
}

/// Unit-norm rank-one direction E = e_1 v^* maximizing ||E R(z0)||, so eps(delta) = delta ||R(z0)||.
inline ComplexMatrix worst_case_direction(const ComplexMatrix& x, Complex z0) {
  const ComplexMatrix r = resolvent(x, z0);
  Eigen::BDCSVD<ComplexMatrix> svd(r, Eigen::ComputeThinU);
  const ComplexVector v = svd.matrixU().col(0);
  ComplexMatrix e = ComplexMatrix::Zero(x.rows(), x.cols());
  e.row(0) = v.adjoint();
  return e;
}

/// x + delta E for each delta; point n counts from 1.
inline ApproximationFamily perturbation_family(const OperatorModel& model,
                                               std::span<const double> deltas, Complex z0) {
  ApproximationFamily fam;
  fam.name = model.name();
  fam.reference = model.matrix_ref;
  const ComplexMatrix e = worst_case_direction(model.matrix_ref, z0);
  int index = 0;
  for (double delta : deltas) {
    TruncationPoint pt;
    pt.n = ++index;
    pt.parameter = delta;
    pt.x_n = model.matrix_ref + delta * e;
    pt.x_n_padded = pt.x_n;
    fam.points.push_back(std::move(pt));
  }
  return fam;
}

/// (I + delta E) X (I + delta E)^{-1} for each delta: same eigenvalues and Jordan structure, so
/// the projector-nilpotent calculus applies to every approximant.
inline ApproximationFamily similarity_family(const OperatorModel& model,
                                             std::span<const double> deltas, Complex z0) {
  ApproximationFamily fam;
  fam.name = model.name();
  fam.reference = model.matrix_ref;
  const ComplexMatrix e = worst_case_direction(model.matrix_ref, z0);
  const ComplexMatrix id = identity(model.matrix_ref.rows());
  int index = 0;
  for (double delta : deltas) {
    if (!(std::abs(delta) < 0.5))
      throw PreconditionError("approx", "similarity perturbation needs |delta| < 0.5");
    const ComplexMatrix s = id + delta * e;
    TruncationPoint pt;
    pt.n = ++index;
    pt.parameter = delta;
    pt.x_n = s * model.matrix_ref * s.inverse();
    pt.x_n_padded = pt.x_n;
    fam.points.push_back(std::move(pt));
  }
  return fam;
}

struct ResolventSups {
  double reference = 0.0;    // sup_z ||(zI - X)^{-1}||
  double approximant = 0.0;  // sup_n sup_z ||(zI - X_n)^{-1}||
  double m_f = 0.0;          // max |f| over the nodes
};

inline double sup_resolvent_norm(const ComplexMatrix& x, const Contour& contour) {
  check_contour_clearance(eigenvalues(x), contour, 0.05, "approx");
  double s = 0.0;
  for (int k = 0; k < contour.nodes; ++k) s = std::max(s, op_norm(resolvent(x, contour.node(k))));
  return s;
}

inline ResolventSups resolvent_sups(const ComplexMatrix& reference,
                                    std::span<const ComplexMatrix> approximants,
                                    const Contour& contour) {
  ResolventSups out;
  out.reference = sup_resolvent_norm(reference, contour);
  for (const auto& xn : approximants)
    out.approximant = std::max(out.approximant, sup_resolvent_norm(xn, contour));
  return out;
}

/// C_f = L/(2 pi) M_f sup||R_n|| sup||R||.
inline double error_constant(const AnalyticFunction& f, const ComplexMatrix& reference,
                             std::span<const ComplexMatrix> approximants, const Contour& contour) {
  if (f.arity() != 1) throw PreconditionError("approx", "error_constant needs an arity-1 function");
  const ResolventSups s = resolvent_sups(reference, approximants, contour);
  double m_f = 0.0;
  for (int k = 0; k < contour.nodes; ++k) m_f = std::max(m_f, std::abs(f({contour.node(k)})));
  return contour.length() / (2.0 * pi) * m_f * s.approximant * s.reference;
}

inline double error_constant(const AnalyticFunction& f, const OperatorModel& model,
                             const Contour& contour, std::span<const int> n_range) {
  std::vector<ComplexMatrix> xs;
  for (int n : n_range) xs.push_back(compress(model, n).x_n_padded);
  return error_constant(f, model.matrix_ref, xs, contour);
}

/// Multivariate constant: (2 pi)^{-r} prod_j L_j  M_f  prod_j sup||R_{j,n}||  prod_j sup||R_j||  r.
inline double error_constant_multivariate(const AnalyticFunction& f,
                                          std::span<const ComplexMatrix> references,
                                          std::span<const std::vector<ComplexMatrix>> approximants,
                                          std::span<const Contour> contours) {
  const std::size_t r = references.size();
  if (f.arity() != r || approximants.size() != r || contours.size() != r)
    throw PreconditionError("approx", "one reference, approximant list and contour per variable");
  double c = static_cast<double>(r);
  for (std::size_t j = 0; j < r; ++j) {
    const ResolventSups s = resolvent_sups(references[j], approximants[j], contours[j]);
    c *= contours[j].length() / (2.0 * pi) * s.approximant * s.reference;
  }
  // M_f over the product grid of nodes.
  double m_f = 0.0;
  std::vector<int> k(r, 0);
  std::vector<Complex> z(r);
  while (true) {
    for (std::size_t j = 0; j < r; ++j) z[j] = contours[j].node(k[j]);
    m_f = std::max(m_f, std::abs(f(z)));
    std::size_t j = r;
    while (j-- > 0) {
      if (++k[j] < contours[j].nodes) break;
      k[j] = 0;
    }
    if (j == static_cast<std::size_t>(-1)) break;
  }
  return c * m_f;
}

struct ConvergenceReport {
  std::string model;
  std::string function;
  Complex z0{-1.0, 0.0};
  std::vector<Contour> contours;
  std::vector<TruncationPoint> points;
  double c_f = 0.0;
  bool level1_pass = false;
  bool level2_pass = false;
  std::optional<double> reference_stability;
  double factorization_error = -1.0;  // multivariate exp-of-sum check, when requested
};

struct LevelOptions {
  /// Absolute slack for rounding noise in the Level-1 monotonicity test and the Level-2 bound.
  double noise_floor = 1e-14;
  double level1_target = 1e-6;
  double bound_slack = 1e-6;
  /// Denominator floor of the reference-stability ratio.
  double stability_floor = 1e-10;
};

namespace detail {

inline bool level1_verdict(const std::vector<TruncationPoint>& points, std::size_t probes,
                           const LevelOptions& opt) {
  if (points.empty()) return false;
  for (std::size_t p = 0; p < probes; ++p) {
    const double final_value = points.back().func_error_vectors[p];
    if (!(final_value < opt.level1_target)) return false;
    for (std::size_t i = 1; i < points.size(); ++i)
      if (points[i].func_error_vectors[p] > points[i - 1].func_error_vectors[p] + opt.noise_floor)
        return false;
  }
  return true;
}

inline std::size_t enclosed_count(const ComplexMatrix& x, const Contour& c) {
  std::size_t k = 0;
  for (Complex mu : eigenvalues(x)) k += c.encloses(mu) ? 1 : 0;
  return k;
}

inline std::vector<ComplexVector> default_probes(Eigen::Index dim, int count = 4) {
  std::vector<ComplexVector> out;
  for (int k = 0; k < count && k < dim; ++k) out.push_back(ComplexVector::Unit(dim, k));
  return out;
}

}  // namespace detail

/// Level-1 / Level-2 experiment on one approximation family. f(X_n) and f(X) are Dunford
/// integrals over `contour`, which encloses the same spectral cluster for every approximant.
inline ConvergenceReport level_experiment(const ApproximationFamily& family,
                                          const AnalyticFunction& f, Complex z0,
                                          const Contour& contour,
                                          std::vector<ComplexVector> probes = {},
                                          const LevelOptions& opt = {}) {
  if (f.arity() != 1) throw PreconditionError("approx", "level_experiment needs an arity-1 function");
  if (family.points.empty()) throw PreconditionError("approx", "empty approximation family");
  const ComplexMatrix& x = family.reference;
  if (probes.empty()) probes = detail::default_probes(x.rows());
  for (const auto& u : probes)
    if (u.size() != x.rows()) throw DimensionError("approx", "probe length differs from dimension");

  check_contour_clearance(eigenvalues(x), contour, 0.05, "approx");
  const std::size_t cluster = detail::enclosed_count(x, contour);
  if (cluster == 0) throw PreconditionError("approx", "contour encloses no reference eigenvalue");
  auto scalar = [&](Complex z) { return f({z}); };
  const ComplexMatrix fx = contour_integral(x, contour, scalar);
  const ComplexMatrix p_cluster = riesz_projector_unchecked(x, contour);
  const ComplexMatrix r0 = resolvent(x, z0);
  const ComplexMatrix r0_cluster = r0 * p_cluster;

  ConvergenceReport rep;
  rep.model = family.name;
  rep.function = f.to_string();
  rep.z0 = z0;
  rep.contours = {contour};
  std::vector<ComplexMatrix> approximants;
  for (auto pt : family.points) {
    check_contour_clearance(eigenvalues(pt.x_n_padded), contour, 0.05, "approx");
    if (detail::enclosed_count(pt.x_n_padded, contour) != cluster)
      throw PreconditionError("approx", "contour does not enclose the same cluster at n = " +
                                            std::to_string(pt.n));
    resolvent_error(x, pt, z0);
    pt.eps_cluster = op_norm((pt.x_n_padded - x) * r0_cluster);
    const ComplexMatrix diff = contour_integral(pt.x_n_padded, contour, scalar) - fx;
    pt.func_error_norm = op_norm(diff);
    for (const auto& u : probes) pt.func_error_vectors.push_back((diff * u).norm());
    approximants.push_back(pt.x_n_padded);
    rep.points.push_back(std::move(pt));
  }
  rep.c_f = error_constant(f, x, approximants, contour);
  const double floor = opt.noise_floor * std::max(1.0, op_norm(fx));
  rep.level2_pass = true;
  for (auto& pt : rep.points) {
    pt.bound_rhs = rep.c_f * pt.eps_cluster;
    pt.level2_ok = pt.func_error_norm <= pt.bound_rhs * (1.0 + opt.bound_slack) + floor;
    rep.level2_pass = rep.level2_pass && pt.level2_ok;
  }
  rep.level1_pass = detail::level1_verdict(rep.points, probes.size(), opt);
  return rep;
}

/// Relative change of every reported metric between two runs over matching n.
inline double stability_between(const ConvergenceReport& fine, const ConvergenceReport& coarse,
                                 const LevelOptions& opt = {}) {
  double worst = 0.0;
  auto compare = [&](double a, double b) {
    worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), opt.stability_floor));
  };
  for (const auto& c : coarse.points) {
    for (const auto& p : fine.points) {
      if (p.n != c.n) continue;
      compare(p.func_error_norm, c.func_error_norm);
      for (std::size_t k = 0; k < p.func_error_vectors.size() && k < c.func_error_vectors.size(); ++k)
        compare(p.func_error_vectors[k], c.func_error_vectors[k]);
    }
  }
  return worst;
}

/// Compression experiment on a model, with the reference-stability check against ref_dim / 2
/// over the n <= ref_dim / 4 that the halved reference still admits with headroom.
inline ConvergenceReport level_experiment(const OperatorModel& model, const AnalyticFunction& f,
                                          Complex z0, const Contour& contour,
                                          std::span<const int> n_list,
                                          std::vector<ComplexVector> probes = {},
                                          const LevelOptions& opt = {}) {
  ConvergenceReport rep =
      level_experiment(compression_family(model, n_list), f, z0, contour, probes, opt);
  const int half = model.ref_dim / 2;
  if (model.kind != ModelKind::custom_file && model.kind != ModelKind::jordan_toy && half >= 16) {
    const OperatorModel coarse_model = build_model(model.kind, half, model.guard);
    std::vector<int> admissible;
    for (int n : n_list)
      if (n <= half / 2) admissible.push_back(n);
    if (!admissible.empty()) {
      std::vector<ComplexVector> coarse_probes;
      for (const auto& u : probes) coarse_probes.push_back(u.head(half));
      const ConvergenceReport coarse = level_experiment(compression_family(coarse_model, admissible),
                                                        f, z0, contour, coarse_probes, opt);
      rep.reference_stability = stability_between(rep, coarse, opt);
    }
  }
  return rep;
}

/// Tensor-lifted experiment. Each family supplies the reference and approximants of one factor
/// (all families have the same number of points); f_(x) is evaluated by the projector-nilpotent
/// calculus on the clusters enclosed by the contours.
inline ConvergenceReport multivariate_experiment(const std::vector<ApproximationFamily>& families,
                                                 const AnalyticFunction& f,
                                                 std::span<const Complex> z0s,
                                                 std::span<const Contour> contours,
                                                 const LiftOptions& lift_opt = {},
                                                 std::vector<ComplexVector> probes = {},
                                                 const LevelOptions& opt = {}) {
  const std::size_t r = families.size();
  if (r == 0 || r > 2) throw PreconditionError("approx", "multivariate experiment supports r <= 2");
  if (f.arity() != r || z0s.size() != r || contours.size() != r)
    throw PreconditionError("approx", "need arity r, one z0 and one contour per factor");
  const std::size_t count = families.front().points.size();
  for (const auto& fam : families)
    if (fam.points.size() != count)
      throw PreconditionError("approx", "families must have the same number of points");

  std::vector<ComplexMatrix> refs;
  std::vector<Decomposition> ref_decs;
  std::vector<ComplexMatrix> r0_cluster;
  std::vector<std::size_t> cluster;
  Eigen::Index dim = 1;
  for (std::size_t j = 0; j < r; ++j) {
    refs.push_back(families[j].reference);
    dim *= refs.back().rows();
    if (dim > lift_opt.dimension_cap)
      throw DimensionCapError("approx", "tensor dimension exceeds the cap");
    ref_decs.push_back(decompose_within(refs[j], contours[j], lift_opt.decompose));
    cluster.push_back(detail::enclosed_count(refs[j], contours[j]));
    r0_cluster.push_back(resolvent(refs[j], z0s[j]) * riesz_projector_unchecked(refs[j], contours[j]));
  }
  if (probes.empty()) probes = detail::default_probes(dim);
  const LiftedSystem ref_sys = lift_with(refs, ref_decs, lift_opt);
  const ComplexMatrix f_ref = func_multivariate(f, ref_sys).value;

  ConvergenceReport rep;
  rep.model = families[0].name;
  for (std::size_t j = 1; j < r; ++j) rep.model += "_x_" + families[j].name;
  rep.function = f.to_string();
  rep.z0 = z0s[0];
  rep.contours.assign(contours.begin(), contours.end());
  std::vector<std::vector<ComplexMatrix>> approximants(r);
  for (std::size_t i = 0; i < count; ++i) {
    TruncationPoint pt;
    pt.n = families[0].points[i].n;
    std::vector<ComplexMatrix> xs;
    std::vector<Decomposition> decs;
    for (std::size_t j = 0; j < r; ++j) {
      TruncationPoint fp = families[j].points[i];
      if (detail::enclosed_count(fp.x_n_padded, contours[j]) != cluster[j])
        throw PreconditionError("approx", "contour " + std::to_string(j + 1) +
                                              " does not enclose the same cluster at point " +
                                              std::to_string(i));
      pt.eps_factors.push_back(resolvent_error(refs[j], fp, z0s[j]));
      pt.eps_cluster_factors.push_back(op_norm((fp.x_n_padded - refs[j]) * r0_cluster[j]));
      xs.push_back(fp.x_n_padded);
      decs.push_back(decompose_within(fp.x_n_padded, contours[j], lift_opt.decompose));
      approximants[j].push_back(fp.x_n_padded);
    }
    pt.eps_n = 0.0;
    pt.eps_cluster = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      pt.eps_n += pt.eps_factors[j];
      pt.eps_cluster += pt.eps_cluster_factors[j];
    }
    const LiftedSystem sys = lift_with(std::move(xs), std::move(decs), lift_opt);
    const ComplexMatrix diff = func_multivariate(f, sys).value - f_ref;
    pt.func_error_norm = op_norm(diff);
    for (const auto& u : probes) pt.func_error_vectors.push_back((diff * u).norm());
    rep.points.push_back(std::move(pt));
  }
  rep.c_f = error_constant_multivariate(f, refs, approximants, contours);
  const double floor = opt.noise_floor * std::max(1.0, op_norm(f_ref));
  rep.level2_pass = true;
  for (auto& pt : rep.points) {
    pt.bound_rhs = rep.c_f * pt.eps_cluster;
    pt.level2_ok = pt.func_error_norm <= pt.bound_rhs * (1.0 + opt.bound_slack) + floor;
    rep.level2_pass = rep.level2_pass && pt.level2_ok;
  }
  rep.level1_pass = detail::level1_verdict(rep.points, probes.size(), opt);
  return rep;
}

/// ||f_(x)(X_1, X_2) - f_1(X_1) (x) f_2(X_2)|| for f = f_1(z1) f_2(z2) on the reference clusters.
inline double factorization_error(const ApproximationFamily& a, const ApproximationFamily& b,
                                  const AnalyticFunction& f, const AnalyticFunction& f1,
                                  const AnalyticFunction& f2, const Contour& ca, const Contour& cb,
                                  const LiftOptions& lift_opt = {}) {
  const LiftedSystem sys =
      lift_with({a.reference, b.reference},
                {decompose_within(a.reference, ca, lift_opt.decompose),
                 decompose_within(b.reference, cb, lift_opt.decompose)},
                lift_opt);
  const ComplexMatrix joint = func_multivariate(f, sys).value;
  const ComplexMatrix fa = contour_integral(a.reference, ca, [&](Complex z) { return f1({z}); });
  const ComplexMatrix fb = contour_integral(b.reference, cb, [&](Complex z) { return f2({z}); });
  return op_norm(joint - kron(fa, fb, lift_opt.dimension_cap));
}

struct RegularizationPoint {
  double eps = 0.0;
  bool resolvent_ok = true;  // false when z0 met the spectrum of X + eps K
  std::vector<double> probe_errors;   // ||(R_eps - R) u||
  double norm_error = 0.0;            // ||R_eps - R||
  double hypothesis = 0.0;            // ||eps K R||
  double resolvent_norm = 0.0;        // ||R_eps||
  std::vector<double> perturbation;   // ||eps K R u||
  std::vector<double> bound_rhs;      // sup||R_eps|| ||eps K R u||
  bool bound_ok = true;
};

struct RegularizationReport {
  Complex z0{-1.0, 0.0};
  std::vector<RegularizationPoint> points;
  double sup_resolvent = 0.0;
  bool probes_decreasing = false;
  bool bound_pass = false;
};

/// Resolvent errors of X + eps K against X at z0, with the identity
/// R_eps - R = R_eps (eps K) R giving the per-probe bound sup||R_eps|| ||eps K R u||.
inline RegularizationReport regularization_sweep(const ComplexMatrix& x, const ComplexMatrix& k,
                                                 std::span<const double> eps_list, Complex z0,
                                                 std::vector<ComplexVector> probes = {},
                                                 double slack = 1e-6) {
  require_square(x, "approx", "regularization operator");
  if (k.rows() != x.rows() || k.cols() != x.cols())
    throw DimensionError("approx", "regularizer dimension differs from the operator");
  if (op_norm(k - k.adjoint()) > 1e-12 * op_norm(k))
    throw PreconditionError("approx", "regularizer must be Hermitian");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> ks(k, Eigen::EigenvaluesOnly);
  if (!(ks.eigenvalues().minCoeff() > 0.0))
    throw PreconditionError("approx", "regularizer must be positive definite");
  if (probes.empty()) probes = detail::default_probes(x.rows());

  const ComplexMatrix r = resolvent(x, z0);
  const ComplexMatrix kr = k * r;
  RegularizationReport rep;
  rep.z0 = z0;
  for (double eps : eps_list) {
    RegularizationPoint pt;
    pt.eps = eps;
    ComplexMatrix r_eps;
    try {
      r_eps = resolvent(x + eps * k, z0);
    } catch (const NearSingularError&) {
      pt.resolvent_ok = false;
      rep.points.push_back(std::move(pt));
      continue;
    }
    const ComplexMatrix diff = r_eps - r;
    pt.norm_error = op_norm(diff);
    pt.hypothesis = eps * op_norm(kr);
    pt.resolvent_norm = op_norm(r_eps);
    rep.sup_resolvent = std::max(rep.sup_resolvent, pt.resolvent_norm);
    for (const auto& u : probes) {
      pt.probe_errors.push_back((diff * u).norm());
      pt.perturbation.push_back(eps * (kr * u).norm());
    }
    rep.points.push_back(std::move(pt));
  }
  rep.bound_pass = true;
  for (auto& pt : rep.points) {
    if (!pt.resolvent_ok) {
      pt.bound_ok = false;
      rep.bound_pass = false;
      continue;
    }
    for (std::size_t q = 0; q < pt.probe_errors.size(); ++q) {
      pt.bound_rhs.push_back(rep.sup_resolvent * pt.perturbation[q]);
      if (pt.probe_errors[q] > pt.bound_rhs.back() * (1.0 + slack)) pt.bound_ok = false;
    }
    rep.bound_pass = rep.bound_pass && pt.bound_ok;
  }
  // Strictly decreasing along the sweep as listed (eps decreasing).
  rep.probes_decreasing = !rep.points.empty();
  for (std::size_t i = 1; i < rep.points.size(); ++i) {
    const auto& a = rep.points[i - 1];
    const auto& b = rep.points[i];
    if (!a.resolvent_ok || !b.resolvent_ok) {
      rep.probes_decreasing = false;
      continue;
    }
    for (std::size_t q = 0; q < b.probe_errors.size(); ++q)
      if (!(b.probe_errors[q] < a.probe_errors[q])) rep.probes_decreasing = false;
  }
  return rep;
}

/// CSV with columns n, eps_global, eps_cluster, func_error_norm, probe_err_k..., c_f, bound_rhs,
/// level2_ok (per-factor eps columns are appended for multivariate reports).
inline void write_report_csv(std::ostream& os, const ConvergenceReport& rep) {
  const std::size_t probes = rep.points.empty() ? 0 : rep.points.front().func_error_vectors.size();
  const std::size_t factors = rep.points.empty() ? 0 : rep.points.front().eps_factors.size();
  os << "n,eps_global,eps_cluster,func_error_norm";
  for (std::size_t k = 0; k < probes; ++k) os << ",probe_err_" << k;
  os << ",c_f,bound_rhs,level2_ok";
  for (std::size_t j = 0; j < factors; ++j) os << ",eps_global_" << j + 1 << ",eps_cluster_" << j + 1;
  os << '\n';
  using fn::format_number;
  for (const auto& pt : rep.points) {
    os << pt.n << ',' << format_number(pt.eps_n) << ',' << format_number(pt.eps_cluster) << ','
       << format_number(pt.func_error_norm);
    for (double e : pt.func_error_vectors) os << ',' << format_number(e);
    os << ',' << format_number(rep.c_f) << ',' << format_number(pt.bound_rhs) << ','
       << (pt.level2_ok ? 1 : 0);
    for (std::size_t j = 0; j < pt.eps_factors.size(); ++j)
      os << ',' << format_number(pt.eps_factors[j]) << ',' << format_number(pt.eps_cluster_factors[j]);
    os << '\n';
  }
}

inline void write_report_summary(std::ostream& os, const ConvergenceReport& rep) {
  using fn::format_number;
  os << "key,value\n";
  os << "model," << rep.model << '\n';
  os << "c_f," << format_number(rep.c_f) << '\n';
  os << "level1_pass," << (rep.level1_pass ? 1 : 0) << '\n';
  os << "level2_pass," << (rep.level2_pass ? 1 : 0) << '\n';
  if (rep.reference_stability)
    os << "reference_stability," << format_number(*rep.reference_stability) << '\n';
  if (rep.factorization_error >= 0.0)
    os << "factorization_error," << format_number(rep.factorization_error) << '\n';
}

inline void write_regularization_csv(std::ostream& os, const RegularizationReport& rep) {
  using fn::format_number;
  const std::size_t probes = [&] {
    for (const auto& p : rep.points)
      if (p.resolvent_ok) return p.probe_errors.size();
    return std::size_t{0};
  }();
  os << "eps,resolvent_ok,norm_error,hypothesis,resolvent_norm";
  for (std::size_t k = 0; k < probes; ++k) os << ",probe_err_" << k;
  for (std::size_t k = 0; k < probes; ++k) os << ",bound_rhs_" << k;
  os << ",bound_ok\n";
  for (const auto& pt : rep.points) {
    os << format_number(pt.eps) << ',' << (pt.resolvent_ok ? 1 : 0) << ','
       << format_number(pt.norm_error) << ',' << format_number(pt.hypothesis) << ','
       << format_number(pt.resolvent_norm);
    for (std::size_t k = 0; k < probes; ++k)
      os << ',' << (pt.resolvent_ok ? format_number(pt.probe_errors[k]) : std::string("nan"));
    for (std::size_t k = 0; k < probes; ++k)
      os << ',' << (pt.resolvent_ok ? format_number(pt.bound_rhs[k]) : std::string("nan"));
    os << ',' << (pt.bound_ok ? 1 : 0) << '\n';
  }
}

}  // namespace pnfc
