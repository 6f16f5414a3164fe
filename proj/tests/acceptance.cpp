// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

// One pass/fail line per acceptance criterion. Exit status is the number of failures.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "pnfc/approx.hpp"
#include "pnfc/calculus.hpp"
#include "test_support.hpp"

#ifndef PNFC_TOOL_PATH
#error "PNFC_TOOL_PATH must point at the pnfc executable"
#endif

using namespace pnfc;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double max_abs(const ComplexMatrix& a) { return a.cwiseAbs().maxCoeff(); }

// 1. Closed-form pair: func_multivariate vs hand-assembled four-term formula vs both oracles.
Verdict golden_pair() {
  const auto t0 = std::chrono::steady_clock::now();
  const ComplexMatrix x1 = fixtures::pair_x1(), x2 = fixtures::pair_x2(), n1 = fixtures::pair_n1();
  const ComplexMatrix i2 = identity(2);
  const LiftedSystem sys = lift({x1, x2});
  const std::vector<Contour> contours = {enclosing_contour(x1), enclosing_contour(x2)};
  const double e = std::exp(1.0);
  struct Case {
    const char* f;
    Complex v, d1, d2, d12;  // f, d1 f, d2 f, d1 d2 f at (1, 0)
  };
  const Case cases[] = {
      {"poly{(1,1):1}", 0.0, 0.0, 1.0, 1.0},
      {"exp(z1+z2)", e, e, e, e},
      {"prod(exp(z1),poly{(0,0):1,(0,1):1})", e, e, e, e},
      {"poly{(0,1):1,(1,1):2,(2,1):1}", 0.0, 0.0, 4.0, 4.0},
  };
  double worst = 0.0;
  for (const auto& c : cases) {
    const auto f = parse_function(c.f, 2);
    const ComplexMatrix boxed = c.v * kron(i2, i2) + c.d1 * kron(n1, i2) + c.d2 * kron(i2, x2) +
                                c.d12 * kron(n1, x2);
    const ComplexMatrix value = func_multivariate(f, sys).value;
    const ComplexMatrix d = dunford_multivariate(f, sys, contours);
    const ComplexMatrix p = power_series_apply_auto(f, sys, default_series_center(sys));
    worst = std::max({worst, max_abs(value - boxed), max_abs(value - d), max_abs(value - p),
                      max_abs(boxed - d), max_abs(boxed - p), max_abs(d - p)});
  }
  const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1e-9 && t < 1.0, "max pairwise |diff| " + fmt(worst) + " (<= 1e-9), " + fmt(t) + " s (< 1)"};
}

// Jordan matrix of dimension d with blocks of size <= 4 on eigenvalues drawn from the disk of
// radius 0.5 with pairwise gaps >= 0.25, conjugated by a similarity of condition number 3.
ComplexMatrix random_jordan_system(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> block(1, 4);
  std::vector<ComplexMatrix> blocks;
  std::vector<Complex> used;
  int left = d;
  while (left > 0) {
    const int m = std::min(left, block(rng));
    Complex lambda;
    bool ok = false;
    while (!ok) {
      const double r = 0.5 * std::sqrt(u(rng)), th = 2.0 * pi * u(rng);
      lambda = std::polar(r, th);
      ok = true;
      for (Complex mu : used) ok = ok && std::abs(lambda - mu) >= 0.25;
    }
    used.push_back(lambda);
    blocks.push_back(jordan_block(m, lambda));
    left -= m;
  }
  const ComplexMatrix s = fixtures::conditioned_similarity(rng, d, 3.0);
  return s * block_diagonal(blocks) * s.inverse();
}

// 2. Oracle triangle on randomized Jordan systems.
Verdict oracle_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  const std::vector<std::string> uni = {"exp(z1)", "cos(0.7*z1+0.1)",
                                        "ratio(poly{(0):1},poly{(0):3,(1):-1})",
                                        "poly{(0):1,(1):-2,(3):1}"};
  const std::vector<std::string> bi = {"exp(z1+z2)", "prod(exp(0.5*z1),cos(z2))",
                                       "sin(z1-0.5*z2)", "poly{(1,1):1,(2,0):0.5,(0,3):-1}",
                                       "prod(ratio(poly{(0,0):1},poly{(0,0):3,(1,0):-1}),exp(z2))"};
  LiftOptions opt;
  opt.decompose.cluster_tol = 1e-2;
  std::uniform_int_distribution<int> dim(1, 6), arity(1, 2);
  double worst = 0.0;
  int failures = 0;
  std::string first_error;
  for (int trial = 0; trial < 50; ++trial) {
    const int r = arity(rng);
    std::vector<ComplexMatrix> xs;
    for (int j = 0; j < r; ++j) xs.push_back(random_jordan_system(rng, dim(rng)));
    const auto& names = r == 1 ? uni : bi;
    const auto f = parse_function(names[static_cast<std::size_t>(trial) % names.size()], static_cast<std::size_t>(r));
    try {
      const LiftedSystem sys = lift(xs, opt);
      std::vector<Contour> contours;
      for (const auto& x : xs) contours.push_back(enclosing_contour(x, 128));
      const ComplexMatrix value = func_multivariate(f, sys).value;
      const ComplexMatrix d = dunford_multivariate(f, sys, contours);
      const ComplexMatrix p = power_series_apply_auto(f, sys, default_series_center(sys), 8, 128);
      const double scale = 1.0 + op_norm(value);
      worst = std::max({worst, op_norm(value - d) / scale, op_norm(value - p) / scale,
                        op_norm(d - p) / scale});
    } catch (const Error& err) {
      if (failures++ == 0) first_error = err.what();
    }
  }
  const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string detail = "50 systems, max scaled discrepancy " + fmt(worst) + " (<= 1e-8), " +
                       fmt(t) + " s (< 30)";
  if (failures) detail += ", " + std::to_string(failures) + " raised: " + first_error;
  return {failures == 0 && worst <= 1e-8 && t < 30.0, detail};
}

// 3. Decomposition invariants on 200 seeded matrices.
Verdict decomposition_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(2, 8);
  std::uniform_int_distribution<int> small(-3, 3);
  int failed = 0, hermitian_bad = 0;
  double worst_recon = 0.0, worst_idem = 0.0, worst_cross = 0.0, worst_res = 0.0, worst_herm_n = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int n = dim(rng);
    ComplexMatrix x;
    DecomposeOptions opt;
    const int kind = i % 4;
    if (kind == 0) {
      // integer diagonal entries, so repeated eigenvalues occur
      x = ComplexMatrix::Zero(n, n);
      for (int k = 0; k < n; ++k) x(k, k) = Complex(small(rng), small(rng));
    } else if (kind == 1) {
      x = fixtures::random_hermitian(rng, n);
    } else if (kind == 2) {
      x = random_jordan_system(rng, n);
      opt.cluster_tol = 1e-2;
    } else {
      x = fixtures::random_matrix(rng, n, n);
    }
    try {
      const Decomposition dec = decompose(x, opt);
      const auto d = verify_decomposition(dec, x);
      worst_recon = std::max(worst_recon, d.reconstruction);
      worst_idem = std::max(worst_idem, d.idempotence_relative);
      worst_cross = std::max(worst_cross, d.cross_orthogonality);
      worst_res = std::max(worst_res, d.resolution);
      if (!d.pass) ++failed;
      if (kind == 1)
        for (const auto& c : dec.components) {
          const double rel = op_norm(c.nilpotent) / op_norm(x);
          worst_herm_n = std::max(worst_herm_n, rel);
          if (c.nilpotency_index != 1 || rel > 1e-10) ++hermitian_bad;
        }
    } catch (const Error&) {
      ++failed;
    }
  }
  const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {failed == 0 && hermitian_bad == 0 && t < 30.0,
          std::to_string(200 - failed) + "/200 verified; max recon " + fmt(worst_recon) +
              ", idem " + fmt(worst_idem) + ", cross " + fmt(worst_cross) + ", resolution " +
              fmt(worst_res) + "; Hermitian max ||N||/||X|| " + fmt(worst_herm_n) + ", " +
              fmt(t) + " s (< 30)"};
}

// 4. Hermitian factors: only the pure spectral term survives; equals the eigenvector formula.
Verdict self_adjoint_collapse() {
  std::mt19937_64 rng(4242);
  const std::vector<std::string> fs = {"exp(z1+[0,0.5]*z2)", "prod(cos(z1),exp(-0.5*z2))",
                                       "poly{(1,1):1,(2,0):1}"};
  double worst_split = 0.0, worst_match = 0.0;
  for (int trial = 0; trial < 12; ++trial) {
    const Eigen::Index n1 = 2 + trial % 3, n2 = 3 + trial % 2;
    const ComplexMatrix h1 = fixtures::random_hermitian(rng, n1) / 2.0;
    const ComplexMatrix h2 = fixtures::random_hermitian(rng, n2) / 2.0;
    const auto f = parse_function(fs[static_cast<std::size_t>(trial) % fs.size()], 2);
    const CalculusResult res = func_multivariate(f, lift({h1, h2}));
    const double v = op_norm(res.value);
    worst_split = std::max({worst_split, op_norm(res.split.s_mixed) / v, op_norm(res.split.s_full) / v});
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> e1(h1), e2(h2);
    ComplexMatrix direct = ComplexMatrix::Zero(n1 * n2, n1 * n2);
    for (Eigen::Index a = 0; a < n1; ++a)
      for (Eigen::Index b = 0; b < n2; ++b) {
        const ComplexVector u = e1.eigenvectors().col(a), w = e2.eigenvectors().col(b);
        direct += f({e1.eigenvalues()(a), e2.eigenvalues()(b)}) * kron(u * u.adjoint(), w * w.adjoint());
      }
    worst_match = std::max(worst_match, op_norm(res.value - direct));
  }
  return {worst_split <= 1e-10 && worst_match <= 1e-10,
          "max split/||value|| " + fmt(worst_split) + " (<= 1e-10), max ||value - direct|| " +
              fmt(worst_match) + " (<= 1e-10)"};
}

const Complex z0(-1.0, 0.0);
const Contour harmonic_cluster{3.0, 2.5, 256};  // encloses 1, 3, 5
const Contour toy_contour{Complex(0.5, 0.5), 1.5, 128};

double worst_ratio(const ConvergenceReport& rep) {
  double r = 0.0;
  for (const auto& pt : rep.points)
    if (pt.bound_rhs > 0.0) r = std::max(r, pt.func_error_norm / pt.bound_rhs);
  return r;
}

// 5. Harmonic oscillator: spectrum and exact Level-1 on the lowest three levels.
Verdict harmonic_oscillator() {
  const auto h = build_model(ModelKind::harmonic, 64, 2);
  std::vector<double> eig;
  for (Complex mu : eigenvalues(h.matrix_ref)) eig.push_back(mu.real());
  std::sort(eig.begin(), eig.end());
  double drift = 0.0;
  for (int n = 0; n < 64; ++n) drift = std::max(drift, std::abs(eig[static_cast<std::size_t>(n)] - (2.0 * n + 1.0)));
  const std::vector<int> ns = {3, 4, 6, 8, 16, 32};
  const auto rep = level_experiment(h, parse_function("exp(-z1)"), z0, harmonic_cluster, ns);
  double probe = 0.0;
  for (const auto& pt : rep.points)
    for (double e : pt.func_error_vectors) probe = std::max(probe, e);
  return {drift <= 1e-12 && probe <= 1e-14,
          "max |eig - (2n+1)| " + fmt(drift) + " (<= 1e-12), max probe error over n in {3..32} " +
              fmt(probe) + " (<= 1e-14)"};
}

// 6. Level-2 bound on the non-normal toy under worst-case perturbations.
Verdict jordan_level2() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto toy = build_model(ModelKind::jordan_toy, 4, 0);
  const std::vector<double> deltas = {1e-1, 1e-2, 1e-3, 1e-4};
  const auto rep = level_experiment(perturbation_family(toy, deltas, z0), parse_function("exp(-z1)"),
                                    z0, toy_contour);
  bool strict = true;
  for (const auto& pt : rep.points) strict = strict && pt.func_error_norm <= rep.c_f * pt.eps_cluster;
  const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {strict && rep.points.size() == 4 && t < 10.0,
          "C_f " + fmt(rep.c_f) + ", max error/(C_f eps) " + fmt(worst_ratio(rep)) + " (<= 1), " +
              fmt(t) + " s (< 10)"};
}

// 7. Two-factor additive bound and exp-of-sum factorization.
Verdict multivariate_bound() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto h = build_model(ModelKind::harmonic, 32, 2);
  const auto toy = build_model(ModelKind::jordan_toy, 4, 0);
  const std::vector<int> ns = {4, 8, 16};
  const std::vector<double> deltas = {1e-1, 1e-2, 1e-3};
  const std::vector<Complex> z0s = {z0, z0};

  const std::vector<Contour> mixed = {harmonic_cluster, toy_contour};
  const auto a = multivariate_experiment({compression_family(h, ns), similarity_family(toy, deltas, z0)},
                                         parse_function("prod(exp(-z1),poly{(0,0):1,(0,1):1})"), z0s, mixed);
  const std::vector<Contour> both = {harmonic_cluster, harmonic_cluster};
  const auto fam = compression_family(h, ns);
  const auto f = parse_function("exp(-z1-z2)");
  const auto b = multivariate_experiment({fam, fam}, f, z0s, both);
  const auto e = parse_function("exp(-z1)");
  const double fact = factorization_error(fam, fam, f, e, e, harmonic_cluster, harmonic_cluster);
  const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {a.level2_pass && b.level2_pass && fact <= 1e-9 && t < 60.0,
          "harmonic x jordan_toy max error/bound " + fmt(worst_ratio(a)) +
              ", harmonic x harmonic max error/bound " + fmt(worst_ratio(b)) +
              " (bound met at every n: " + (a.level2_pass && b.level2_pass ? "yes" : "no") +
              "), factorization " + fmt(fact) + " (<= 1e-9), dim 1024, " + fmt(t) + " s (< 60)"};
}

Complex lowest(const ComplexMatrix& m) {
  auto e = eigenvalues(m);
  return *std::min_element(e.begin(), e.end(),
                           [](Complex x, Complex y) { return std::abs(x) < std::abs(y); });
}

// 8. Complex harmonic oscillator.
Verdict complex_harmonic() {
  const auto m64 = build_model(ModelKind::complex_harmonic, 64, 2);
  const auto m128 = build_model(ModelKind::complex_harmonic, 128, 2);
  const ComplexMatrix& a = m64.matrix_ref;
  const double nrm = op_norm(a);
  const double comm = op_norm(a * a.adjoint() - a.adjoint() * a) / (nrm * nrm);
  const Complex l64 = lowest(a), l128 = lowest(m128.matrix_ref);
  const double stab = std::abs(l64 - l128) / std::abs(l128);

  // lowest level e^{i pi/4}; the next is 3 e^{i pi/4} and zero padding sits at distance 1
  const Contour lowest_cluster{std::exp(Complex(0.0, pi / 4)), 0.8, 256};
  const std::vector<int> ns = {8, 16, 24, 32, 48, 64};
  const auto rep = level_experiment(m128, parse_function("exp(-z1)"), z0, lowest_cluster, ns);
  double last = 0.0;
  for (double e : rep.points.back().func_error_vectors) last = std::max(last, e);
  return {comm > 1e-6 && stab <= 1e-3 && rep.level1_pass && last < 1e-6,
          "||MM*-M*M||/||M||^2 " + fmt(comm) + " (> 1e-6), lowest eigenvalue drift 64->128 " +
              fmt(stab) + " (<= 1e-3), probe errors monotone: " + (rep.level1_pass ? "yes" : "no") +
              ", final " + fmt(last) + " (< 1e-6)"};
}

// 9. Regularization sweep.
Verdict regularization() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto x = build_model(ModelKind::complex_harmonic, 64, 2).matrix_ref;
  const auto k = build_model(ModelKind::harmonic, 64, 2).matrix_ref;
  const std::vector<double> eps = {1e-1, 1e-2, 1e-3, 1e-4};
  const auto rep = regularization_sweep(x, k, eps, z0, {}, 1e-6);
  double ratio = 0.0;
  for (const auto& pt : rep.points)
    for (std::size_t i = 0; i < pt.probe_errors.size(); ++i)
      if (pt.bound_rhs[i] > 0.0) ratio = std::max(ratio, pt.probe_errors[i] / pt.bound_rhs[i]);
  const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {rep.probes_decreasing && rep.bound_pass && t < 20.0,
          std::string("strictly decreasing: ") + (rep.probes_decreasing ? "yes" : "no") +
              ", max error/bound " + fmt(ratio) + " (<= 1 + 1e-6), " + fmt(t) + " s (< 20)"};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// 10. Repeated CLI runs give identical manifests.
Verdict determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "pnfc_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "converge.ini")
      << "[run]\nseed = 5\nlabel = det\n[converge]\nmodel = complex_harmonic\nref_dim = 32\n"
         "n_list = 4, 8, 16\nfunction = exp(-z1)\ncontour_center_re = 0.7071067811865476\n"
         "contour_center_im = 0.7071067811865476\ncontour_radius = 0.8\ncontour_nodes = 256\n"
         "probes = 4\nprobe_kind = random\n";
  std::ofstream(dir / "regularize.ini")
      << "[run]\nseed = 9\n[regularize]\nmodel = complex_harmonic\nref_dim = 32\n"
         "eps_list = 1e-1, 1e-2, 1e-3\nprobes = 3\nprobe_kind = random\n";
  bool same = true;
  int rc_bad = 0;
  std::size_t bytes = 0;
  for (const char* cmd : {"converge", "regularize"}) {
    std::string first;
    for (int rep = 0; rep < 3; ++rep) {
      const fs::path out = dir / (std::string(cmd) + std::to_string(rep));
      const std::string line = std::string("\"") + PNFC_TOOL_PATH + "\" " + cmd + " --config \"" +
                               (dir / (std::string(cmd) + ".ini")).string() + "\" --out \"" +
                               out.string() + "\" > /dev/null";
      if (std::system(line.c_str()) != 0) ++rc_bad;
      const std::string manifest = slurp(out / "manifest.csv");
      if (rep == 0)
        first = manifest, bytes += manifest.size();
      else
        same = same && manifest == first && !manifest.empty();
    }
  }
  fs::remove_all(dir);
  return {same && rc_bad == 0 && bytes > 0,
          "2 commands x 3 runs, manifests identical: " + std::string(same ? "yes" : "no") +
              ", nonzero exits " + std::to_string(rc_bad)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"golden pair reproduction", golden_pair},
      {"oracle triangle suite", oracle_suite},
      {"decomposition invariants", decomposition_suite},
      {"self-adjoint collapse", self_adjoint_collapse},
      {"harmonic oscillator", harmonic_oscillator},
      {"single-operator Level-2 bound", jordan_level2},
      {"multivariate additive bound", multivariate_bound},
      {"complex harmonic oscillator", complex_harmonic},
      {"regularization sweep", regularization},
      {"CLI determinism", determinism},
  };
  int failed = 0, index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("raised: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("[%s] %2d %s: %s\n", v.pass ? "PASS" : "FAIL", index, name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
