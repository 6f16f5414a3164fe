// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/crc.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pnfc/approx.hpp"
#include "pnfc/calculus.hpp"
#include "pnfc/cmat.hpp"
#include "pnfc/funcspace.hpp"
#include "pnfc/spectra.hpp"

namespace pnfc::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_parse = 2;
inline constexpr int exit_precondition = 3;
inline constexpr int exit_tolerance = 4;

inline int exit_code(ErrorFamily f) {
  switch (f) {
    case ErrorFamily::parse:
      return exit_parse;
    case ErrorFamily::numeric_precondition:
      return exit_precondition;
    case ErrorFamily::tolerance:
      return exit_tolerance;
  }
  return 1;
}

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"decompose", "funcalc", "lift-calc", "oracle-check",
                                             "converge", "converge-multi", "regularize"};
  return c;
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline EnvLookup process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

/// Allowed keys per section for each command. Anything else in the file is rejected.
inline std::map<std::string, std::set<std::string>> schema(const std::string& command) {
  const std::set<std::string> run = {"output_dir", "seed", "label"};
  const std::set<std::string> decomp = {"cluster_tol", "tol_dec", "tol_nil", "nodes"};
  auto with = [](std::set<std::string> a, std::initializer_list<std::string> b) {
    a.insert(b.begin(), b.end());
    return a;
  };
  const std::set<std::string> factor =
      with(decomp, {"model", "ref_dim", "guard", "input", "family", "n_list", "deltas", "z0_re",
                    "z0_im", "contour_center_re", "contour_center_im", "contour_radius",
                    "contour_nodes"});
  if (command == "decompose") return {{"run", run}, {"decompose", with(decomp, {"input"})}};
  if (command == "funcalc") return {{"run", run}, {"funcalc", with(decomp, {"input", "function"})}};
  if (command == "lift-calc")
    return {{"run", run}, {"lift-calc", with(decomp, {"inputs", "function", "dimension_cap"})}};
  if (command == "oracle-check")
    return {{"run", run},
            {"oracle-check", with(decomp, {"inputs", "function", "dimension_cap", "oracle_nodes",
                                           "contour_margin", "tail_tol", "series_start",
                                           "series_max_cap", "tolerance"})}};
  if (command == "converge")
    return {{"run", run},
            {"converge", with(factor, {"function", "probes", "probe_kind", "noise_floor"})}};
  if (command == "converge-multi")
    return {{"run", run},
            {"converge-multi", {"function", "factor_function_1", "factor_function_2", "probes",
                                "probe_kind", "noise_floor", "dimension_cap"}},
            {"factor1", factor},
            {"factor2", factor}};
  if (command == "regularize")
    return {{"run", run},
            {"regularize", {"model", "ref_dim", "guard", "input", "regularizer",
                            "regularizer_input", "eps_list", "z0_re", "z0_im", "probes",
                            "probe_kind"}}};
  throw ParseError("cli", "unknown command '" + command + "'");
}

/// Flat key=value configuration with sections, checked against the command schema. Values can be
/// overridden by environment variables PNFC_<SECTION>_<KEY> (upper case, '-' as '_').
class Config {
public:
  Config(std::string command, const boost::property_tree::ptree& tree, EnvLookup env)
      : command_(std::move(command)), schema_(schema(command_)), env_(std::move(env)) {
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty())
        throw ParseError("cli", "key '" + section + "' outside of any section");
      const auto allowed = schema_.find(section);
      if (allowed == schema_.end())
        throw ParseError("cli", "unknown section [" + section + "] for command " + command_);
      for (const auto& [key, value] : body) {
        if (!allowed->second.count(key))
          throw ParseError("cli", "unknown key '" + key + "' in section [" + section + "]");
        values_[section][key] = value.data();
      }
    }
  }

  static Config from_file(const std::string& command, const std::string& path, EnvLookup env) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ParseError("cli", std::string("config: ") + e.what());
    }
    return Config(command, tree, std::move(env));
  }

  const std::string& command() const { return command_; }

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    const auto s = schema_.find(section);
    if (s == schema_.end() || !s->second.count(key))
      throw ParseError("cli", "internal: key " + section + "." + key + " is not in the schema");
    if (env_) {
      std::string name = "PNFC_" + section + "_" + key;
      for (char& c : name) c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      if (auto v = env_(name)) return v;
    }
    const auto sec = values_.find(section);
    if (sec == values_.end()) return std::nullopt;
    const auto it = sec->second.find(key);
    if (it == sec->second.end()) return std::nullopt;
    return it->second;
  }

  std::string text(const std::string& section, const std::string& key,
                   std::optional<std::string> fallback = std::nullopt) const {
    if (auto v = raw(section, key)) return trim(*v);
    if (fallback) return *fallback;
    throw ParseError("cli", "missing required key '" + key + "' in section [" + section + "]");
  }

  double real(const std::string& section, const std::string& key,
              std::optional<double> fallback = std::nullopt) const {
    if (auto v = raw(section, key)) return parse_real(section, key, trim(*v));
    if (fallback) return *fallback;
    throw ParseError("cli", "missing required key '" + key + "' in section [" + section + "]");
  }

  std::optional<double> optional_real(const std::string& section, const std::string& key) const {
    if (auto v = raw(section, key)) return parse_real(section, key, trim(*v));
    return std::nullopt;
  }

  long long integer(const std::string& section, const std::string& key,
                    std::optional<long long> fallback = std::nullopt) const {
    if (auto v = raw(section, key)) return parse_integer(section, key, trim(*v));
    if (fallback) return *fallback;
    throw ParseError("cli", "missing required key '" + key + "' in section [" + section + "]");
  }

  std::vector<std::string> list(const std::string& section, const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(text(section, key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) throw ParseError("cli", "empty list item in " + section + "." + key);
      out.push_back(item);
    }
    if (out.empty()) throw ParseError("cli", "empty list in " + section + "." + key);
    return out;
  }

  std::vector<double> real_list(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : list(section, key)) out.push_back(parse_real(section, key, s));
    return out;
  }

  std::vector<int> int_list(const std::string& section, const std::string& key) const {
    std::vector<int> out;
    for (const auto& s : list(section, key))
      out.push_back(static_cast<int>(parse_integer(section, key, s)));
    return out;
  }

  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

private:
  static double parse_real(const std::string& section, const std::string& key,
                           const std::string& s) {
    try {
      return cmat::detail::parse_double(s, 0);
    } catch (const ParseError&) {
      throw ParseError("cli", "value '" + s + "' of " + section + "." + key + " is not a number");
    }
  }
  static long long parse_integer(const std::string& section, const std::string& key,
                                 const std::string& s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw ParseError("cli", "value '" + s + "' of " + section + "." + key + " is not an integer");
    return v;
  }

  std::string command_;
  std::map<std::string, std::set<std::string>> schema_;
  EnvLookup env_;
  std::map<std::string, std::map<std::string, std::string>> values_;
};

/// Collects artifacts in memory; nothing touches the disk until commit().
class ArtifactSet {
public:
  std::ostream& open(const std::string& name) {
    for (const auto& [n, s] : files_)
      if (n == name) throw PreconditionError("cli", "artifact '" + name + "' emitted twice");
    files_.emplace_back(name, std::make_unique<std::ostringstream>());
    return *files_.back().second;
  }

  /// Writes every artifact via temp file + rename, then manifest.csv (name, bytes, crc32).
  void commit(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ostringstream manifest;
    manifest << "file,bytes,crc32\n";
    for (const auto& [name, stream] : files_) {
      const std::string data = stream->str();
      write_atomic(dir / name, data);
      boost::crc_32_type crc;
      crc.process_bytes(data.data(), data.size());
      char hex[16];
      std::snprintf(hex, sizeof hex, "%08x", static_cast<unsigned>(crc.checksum()));
      manifest << name << ',' << data.size() << ',' << hex << '\n';
    }
    write_atomic(dir / "manifest.csv", manifest.str());
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [n, s] : files_) out.push_back(n);
    return out;
  }

private:
  static void write_atomic(const std::filesystem::path& path, const std::string& data) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      if (!os) throw PreconditionError("cli", "cannot write " + tmp.string());
      os.write(data.data(), static_cast<std::streamsize>(data.size()));
      if (!os) throw PreconditionError("cli", "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  std::vector<std::pair<std::string, std::unique_ptr<std::ostringstream>>> files_;
};

struct Request {
  std::string command;
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  EnvLookup env = process_environment();
};

struct Outcome {
  int exit_code = exit_ok;
  std::string message;
  std::vector<std::string> artifacts;
};

namespace detail {

inline DecomposeOptions decompose_options(const Config& c, const std::string& s) {
  DecomposeOptions opt;
  if (auto v = c.optional_real(s, "cluster_tol")) {
    if (!(*v > 0.0)) throw ParseError("cli", s + ".cluster_tol must be positive");
    opt.cluster_tol = *v;
  }
  opt.tol_dec = c.real(s, "tol_dec", 1e-8);
  opt.tol_nil = c.real(s, "tol_nil", 1e-8);
  opt.nodes = static_cast<int>(c.integer(s, "nodes", 128));
  if (!(opt.tol_dec > 0.0) || !(opt.tol_nil > 0.0))
    throw ParseError("cli", s + ": tolerances must be positive");
  if (opt.nodes < 16) throw ParseError("cli", s + ".nodes must be at least 16");
  return opt;
}

inline Eigen::Index dimension_cap(const Config& c, const std::string& s) {
  const long long cap = c.integer(s, "dimension_cap", default_dimension_cap);
  if (cap < 1) throw ParseError("cli", s + ".dimension_cap must be positive");
  return static_cast<Eigen::Index>(cap);
}

/// Paths in the config are relative to the config file's directory.
inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path.string() : (base / path).string();
}

inline std::string safe_label(const std::string& s) {
  std::string out;
  for (char ch : s)
    out += std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' ? ch : '_';
  if (out.empty()) throw ParseError("cli", "empty label");
  return out;
}

inline Contour contour(const Config& c, const std::string& s, Contour fallback) {
  Contour out;
  out.center = {c.real(s, "contour_center_re", fallback.center.real()),
                c.real(s, "contour_center_im", fallback.center.imag())};
  out.radius = c.real(s, "contour_radius", fallback.radius);
  out.nodes = static_cast<int>(c.integer(s, "contour_nodes", fallback.nodes));
  if (!(out.radius > 0.0)) throw ParseError("cli", s + ".contour_radius must be positive");
  if (out.nodes < 16) throw ParseError("cli", s + ".contour_nodes must be at least 16");
  return out;
}

/// Default cluster contours: lowest three harmonic levels; lowest complex-harmonic level; both
/// Jordan eigenvalues of the toy.
inline Contour default_contour(ModelKind k) {
  switch (k) {
    case ModelKind::harmonic:
      return {3.0, 2.5, 256};
    case ModelKind::complex_harmonic:
      return {std::exp(Complex(0.0, pi / 4)), 0.8, 256};
    case ModelKind::jordan_toy:
      return {Complex(0.5, 0.5), 1.5, 128};
    default:
      return {1.0, 1.0, 128};
  }
}

inline OperatorModel model(const Config& c, const std::string& s, const std::filesystem::path& base) {
  const ModelKind kind = model_kind_from_string(c.text(s, "model"));
  if (kind == ModelKind::custom_file) return load_custom_model(resolve(base, c.text(s, "input")));
  const int ref = static_cast<int>(c.integer(s, "ref_dim", kind == ModelKind::jordan_toy ? 4 : 64));
  const int guard = static_cast<int>(c.integer(s, "guard", kind == ModelKind::anharmonic_x4 ? 4 : 2));
  return build_model(kind, ref, guard);
}

inline Complex z0(const Config& c, const std::string& s) {
  return {c.real(s, "z0_re", -1.0), c.real(s, "z0_im", 0.0)};
}

inline std::string family_kind(const Config& c, const std::string& s, const OperatorModel& m) {
  return c.text(s, "family",
                std::string(m.kind == ModelKind::jordan_toy ? "perturbation" : "compression"));
}

inline ApproximationFamily family(const Config& c, const std::string& s, const OperatorModel& m,
                                  Complex z0) {
  const std::string kind = family_kind(c, s, m);
  if (kind == "compression") return compression_family(m, c.int_list(s, "n_list"));
  if (kind == "perturbation") return perturbation_family(m, c.real_list(s, "deltas"), z0);
  if (kind == "similarity") return similarity_family(m, c.real_list(s, "deltas"), z0);
  throw ParseError("cli", s + ".family must be compression, perturbation or similarity");
}

/// Basis vectors e_0.. or seeded Gaussian vectors (Box-Muller on raw mt19937_64 output, so the
/// stream is identical across standard libraries).
inline std::vector<ComplexVector> probes(const Config& c, const std::string& s, Eigen::Index dim,
                                         std::uint64_t seed) {
  const long long count = c.integer(s, "probes", 4);
  if (count < 1 || count > dim) throw ParseError("cli", s + ".probes out of range");
  const std::string kind = c.text(s, "probe_kind", std::string("basis"));
  std::vector<ComplexVector> out;
  if (kind == "basis") {
    for (long long k = 0; k < count; ++k) out.push_back(ComplexVector::Unit(dim, k));
    return out;
  }
  if (kind != "random") throw ParseError("cli", s + ".probe_kind must be basis or random");
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  for (long long k = 0; k < count; ++k) {
    ComplexVector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double r = std::sqrt(-2.0 * std::log(uniform()));
      const double t = 2.0 * pi * uniform();
      v(i) = Complex(r * std::cos(t), r * std::sin(t));
    }
    out.push_back(v / v.norm());
  }
  return out;
}

inline std::vector<ComplexMatrix> read_inputs(const Config& c, const std::string& s,
                                              const std::filesystem::path& base) {
  std::vector<ComplexMatrix> out;
  for (const auto& p : c.list(s, "inputs")) out.push_back(cmat::read_file(resolve(base, p)));
  return out;
}

inline void write_split(ArtifactSet& art, const CalculusResult& res) {
  cmat::write(art.open("value.cmat"), res.value);
  write_ledger_csv(art.open("ledger.csv"), res);
  cmat::write(art.open("split_s0.cmat"), res.split.s0);
  cmat::write(art.open("split_s_mixed.cmat"), res.split.s_mixed);
  cmat::write(art.open("split_s_full.cmat"), res.split.s_full);
}

inline LevelOptions level_options(const Config& c, const std::string& s) {
  LevelOptions opt;
  opt.noise_floor = c.real(s, "noise_floor", opt.noise_floor);
  if (!(opt.noise_floor >= 0.0)) throw ParseError("cli", s + ".noise_floor must be nonnegative");
  return opt;
}

// Each command reads all of its knobs before computing anything, so a bad value never leaves
// artifacts behind.

inline Outcome run_decompose(const Config& c, const std::filesystem::path& base, ArtifactSet& art) {
  const ComplexMatrix x = cmat::read_file(resolve(base, c.text("decompose", "input")));
  const DecomposeOptions opt = decompose_options(c, "decompose");
  const Decomposition dec = decompose(x, opt);
  write_decomposition(art.open("decomposition.txt"), dec);
  const auto d = verify_decomposition(dec, x);
  auto& os = art.open("diagnostics.csv");
  using fn::format_number;
  os << "key,value\n"
     << "components," << dec.components.size() << '\n'
     << "idempotence," << format_number(d.idempotence) << '\n'
     << "projector_nilpotent," << format_number(d.projector_nilpotent) << '\n'
     << "nilpotency," << format_number(d.nilpotency) << '\n'
     << "cross_orthogonality," << format_number(d.cross_orthogonality) << '\n'
     << "resolution," << format_number(d.resolution) << '\n'
     << "reconstruction," << format_number(d.reconstruction) << '\n'
     << "pass," << (d.pass ? 1 : 0) << '\n';
  Outcome out;
  out.message = std::to_string(dec.components.size()) + " component(s)";
  if (!d.pass) {
    out.exit_code = exit_tolerance;
    out.message += ", verification failed";
  }
  return out;
}

inline Outcome run_funcalc(const Config& c, const std::filesystem::path& base, ArtifactSet& art) {
  const ComplexMatrix x = cmat::read_file(resolve(base, c.text("funcalc", "input")));
  const AnalyticFunction f = parse_function(c.text("funcalc", "function"), 1);
  const DecomposeOptions opt = decompose_options(c, "funcalc");
  LiftOptions lopt;
  lopt.decompose = opt;
  const LiftedSystem sys = lift({x}, lopt);
  const ComplexMatrix value = func_univariate(f, sys.decompositions[0]);
  const CalculusResult res = func_multivariate(f, sys);
  cmat::write(art.open("value.cmat"), value);
  write_ledger_csv(art.open("ledger.csv"), res);
  return {exit_ok, "evaluated " + f.to_string(), {}};
}

inline Outcome run_lift_calc(const Config& c, const std::filesystem::path& base, ArtifactSet& art) {
  auto xs = read_inputs(c, "lift-calc", base);
  const AnalyticFunction f = parse_function(c.text("lift-calc", "function"), xs.size());
  LiftOptions lopt;
  lopt.decompose = decompose_options(c, "lift-calc");
  lopt.dimension_cap = dimension_cap(c, "lift-calc");
  const LiftedSystem sys = lift(std::move(xs), lopt);
  write_split(art, func_multivariate(f, sys));
  return {exit_ok, "tensor dimension " + std::to_string(sys.dim()), {}};
}

inline Outcome run_oracle_check(const Config& c, const std::filesystem::path& base,
                                ArtifactSet& art) {
  const std::string s = "oracle-check";
  auto xs = read_inputs(c, s, base);
  const AnalyticFunction f = parse_function(c.text(s, "function"), xs.size());
  LiftOptions lopt;
  lopt.decompose = decompose_options(c, s);
  lopt.dimension_cap = dimension_cap(c, s);
  const int nodes = static_cast<int>(c.integer(s, "oracle_nodes", 64));
  const double margin = c.real(s, "contour_margin", 1.0);
  PowerSeriesOptions popt;
  popt.tail_tol = c.real(s, "tail_tol", 1e-12);
  const int start = static_cast<int>(c.integer(s, "series_start", 8));
  const int max_cap = static_cast<int>(c.integer(s, "series_max_cap", 64));
  const double tol = c.real(s, "tolerance", 1e-9);
  if (nodes < 16 || !(margin > 0.0) || start < 1 || max_cap < start || !(tol > 0.0) ||
      !(popt.tail_tol > 0.0))
    throw ParseError("cli", "oracle-check knob out of range");

  const LiftedSystem sys = lift(std::move(xs), lopt);
  const CalculusResult res = func_multivariate(f, sys);
  std::vector<Contour> contours;
  for (const auto& x : sys.factors) contours.push_back(enclosing_contour(x, nodes, margin));
  const ComplexMatrix d = dunford_multivariate(f, sys, contours);
  const ComplexMatrix p = power_series_apply_auto(f, sys, default_series_center(sys), start, max_cap, popt);
  const double scale = 1.0 + op_norm(res.value);
  const double e_fd = op_norm(res.value - d), e_fp = op_norm(res.value - p), e_dp = op_norm(d - p);
  const double worst = std::max({e_fd, e_fp, e_dp}) / scale;
  using fn::format_number;
  auto& os = art.open("oracle_check.csv");
  os << "pair,discrepancy,scaled\n"
     << "calculus-dunford," << format_number(e_fd) << ',' << format_number(e_fd / scale) << '\n'
     << "calculus-series," << format_number(e_fp) << ',' << format_number(e_fp / scale) << '\n'
     << "dunford-series," << format_number(e_dp) << ',' << format_number(e_dp / scale) << '\n';
  cmat::write(art.open("value.cmat"), res.value);
  Outcome out;
  out.message = "max scaled oracle discrepancy " + format_number(worst);
  if (!(worst <= tol)) out.exit_code = exit_tolerance;
  return out;
}

inline Outcome run_converge(const Config& c, const std::filesystem::path& base, ArtifactSet& art,
                            std::uint64_t seed) {
  const std::string s = "converge";
  const std::string label = safe_label(c.text("run", "label", std::string("f")));
  const OperatorModel m = model(c, s, base);
  const Complex z = z0(c, s);
  const ApproximationFamily fam = family(c, s, m, z);
  const AnalyticFunction f = parse_function(c.text(s, "function"), 1);
  const Contour contour = detail::contour(c, s, default_contour(m.kind));
  const auto pr = probes(c, s, m.ref_dim, seed);
  const LevelOptions opt = level_options(c, s);

  ConvergenceReport rep;
  if (family_kind(c, s, m) == "compression") {
    std::vector<int> ns;
    for (const auto& p : fam.points) ns.push_back(p.n);
    rep = level_experiment(m, f, z, contour, ns, pr, opt);
  } else {
    rep = level_experiment(fam, f, z, contour, pr, opt);
  }
  const std::string stem = m.name() + "_" + label;
  write_report_csv(art.open(stem + "_level.csv"), rep);
  write_report_summary(art.open(stem + "_summary.csv"), rep);
  Outcome out;
  out.message = "level1 " + std::string(rep.level1_pass ? "pass" : "fail") + ", level2 " +
                (rep.level2_pass ? "pass" : "fail");
  if (!rep.level2_pass) out.exit_code = exit_tolerance;
  return out;
}

inline Outcome run_converge_multi(const Config& c, const std::filesystem::path& base,
                                  ArtifactSet& art, std::uint64_t seed) {
  const std::string s = "converge-multi";
  const std::string label = safe_label(c.text("run", "label", std::string("f")));
  std::vector<ApproximationFamily> fams;
  std::vector<Complex> z0s;
  std::vector<Contour> contours;
  std::vector<std::string> names;
  LiftOptions lopt;
  lopt.dimension_cap = dimension_cap(c, s);
  Eigen::Index dim = 1;
  for (const std::string f : {"factor1", "factor2"}) {
    const OperatorModel m = model(c, f, base);
    z0s.push_back(z0(c, f));
    fams.push_back(family(c, f, m, z0s.back()));
    contours.push_back(contour(c, f, default_contour(m.kind)));
    names.push_back(m.name());
    dim *= m.ref_dim;
    if (f == "factor1") lopt.decompose = decompose_options(c, f);
  }
  const AnalyticFunction f = parse_function(c.text(s, "function"), 2);
  std::optional<std::pair<AnalyticFunction, AnalyticFunction>> factors;
  if (c.raw(s, "factor_function_1") || c.raw(s, "factor_function_2"))
    factors.emplace(parse_function(c.text(s, "factor_function_1"), 1),
                    parse_function(c.text(s, "factor_function_2"), 1));
  if (dim > lopt.dimension_cap) throw DimensionCapError("cli", "tensor dimension exceeds the cap");
  const auto pr = probes(c, s, dim, seed);
  const LevelOptions opt = level_options(c, s);

  ConvergenceReport rep = multivariate_experiment(fams, f, z0s, contours, lopt, pr, opt);
  if (factors)
    rep.factorization_error = factorization_error(fams[0], fams[1], f, factors->first,
                                                  factors->second, contours[0], contours[1], lopt);
  const std::string stem = names[0] + "_x_" + names[1] + "_" + label;
  write_report_csv(art.open(stem + "_multi.csv"), rep);
  write_report_summary(art.open(stem + "_summary.csv"), rep);
  Outcome out;
  out.message = "additive bound " + std::string(rep.level2_pass ? "holds" : "fails");
  if (!rep.level2_pass) out.exit_code = exit_tolerance;
  return out;
}

inline Outcome run_regularize(const Config& c, const std::filesystem::path& base, ArtifactSet& art,
                              std::uint64_t seed) {
  const std::string s = "regularize";
  const std::string label = safe_label(c.text("run", "label", std::string("f")));
  const OperatorModel m = model(c, s, base);
  ComplexMatrix k;
  const std::string reg = c.text(s, "regularizer", std::string("harmonic"));
  if (reg == "harmonic")
    k = build_model(ModelKind::harmonic, std::max(m.ref_dim, 16), 2).matrix_ref.topLeftCorner(m.ref_dim, m.ref_dim);
  else if (reg == "custom_file")
    k = cmat::read_file(resolve(base, c.text(s, "regularizer_input")));
  else
    throw ParseError("cli", "regularize.regularizer must be harmonic or custom_file");
  const std::vector<double> eps = c.real_list(s, "eps_list");
  for (double e : eps)
    if (!(e >= 0.0)) throw ParseError("cli", "regularize.eps_list entries must be nonnegative");
  const Complex z = z0(c, s);
  const auto pr = probes(c, s, m.ref_dim, seed);

  const RegularizationReport rep = regularization_sweep(m.matrix_ref, k, eps, z, pr);
  write_regularization_csv(art.open(m.name() + "_" + label + "_regularization.csv"), rep);
  Outcome out;
  out.message = "probe errors " + std::string(rep.probes_decreasing ? "decreasing" : "not decreasing") +
                ", bound " + (rep.bound_pass ? "holds" : "fails");
  if (!rep.bound_pass) out.exit_code = exit_tolerance;
  return out;
}

}  // namespace detail

/// Parses the config, runs the command and writes artifacts. Library errors become exit codes
/// with the failing module named in the message; no artifacts are written on errors.
inline Outcome run(const Request& req) {
  Outcome out;
  try {
    if (std::find(commands().begin(), commands().end(), req.command) == commands().end())
      throw ParseError("cli", "unknown command '" + req.command + "'");
    const Config cfg = Config::from_file(req.command, req.config_path, req.env);
    const std::filesystem::path base = std::filesystem::path(req.config_path).parent_path();
    const std::string out_dir =
        req.out_dir ? *req.out_dir
                    : detail::resolve(base, cfg.text("run", "output_dir", std::string("pnfc_out")));
    long long seed_value = req.seed ? static_cast<long long>(*req.seed) : cfg.integer("run", "seed", 0);
    if (seed_value < 0) throw ParseError("cli", "seed must be nonnegative");
    const auto seed = static_cast<std::uint64_t>(seed_value);

    ArtifactSet art;
    const std::string& cmd = req.command;
    if (cmd == "decompose")
      out = detail::run_decompose(cfg, base, art);
    else if (cmd == "funcalc")
      out = detail::run_funcalc(cfg, base, art);
    else if (cmd == "lift-calc")
      out = detail::run_lift_calc(cfg, base, art);
    else if (cmd == "oracle-check")
      out = detail::run_oracle_check(cfg, base, art);
    else if (cmd == "converge")
      out = detail::run_converge(cfg, base, art, seed);
    else if (cmd == "converge-multi")
      out = detail::run_converge_multi(cfg, base, art, seed);
    else
      out = detail::run_regularize(cfg, base, art, seed);
    art.commit(out_dir);
    out.artifacts = art.names();
    out.artifacts.push_back("manifest.csv");
  } catch (const Error& e) {
    out.exit_code = exit_code(e.family());
    out.message = e.what();
  } catch (const std::filesystem::filesystem_error& e) {
    out.exit_code = exit_precondition;
    out.message = std::string("cli: ") + e.what();
  }
  return out;
}

}  // namespace pnfc::cli
