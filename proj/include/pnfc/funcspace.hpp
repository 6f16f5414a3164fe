// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pnfc/errors.hpp"
#include "pnfc/jet.hpp"
#include "pnfc/numerics.hpp"

namespace pnfc {

/// Derivative orders alpha_j per variable. The subset A of the compact formula is support(alpha).
struct MultiIndex {
  std::vector<int> orders;

  std::size_t size() const { return orders.size(); }
  int operator[](std::size_t j) const { return orders[j]; }

  int total() const {
    int s = 0;
    for (int o : orders) s += o;
    return s;
  }
  std::size_t support_size() const {
    return static_cast<std::size_t>(std::count_if(orders.begin(), orders.end(), [](int o) { return o > 0; }));
  }
  double factorial_product() const {
    double p = 1.0;
    for (int o : orders) p *= std::tgamma(static_cast<double>(o) + 1.0);
    return p;
  }
  auto operator<=>(const MultiIndex&) const = default;
};

enum class DerivativeStrategy { closed_form, cauchy_contour, polynomial_table };

/// Closed polydisk prod_j {|z_j - center_j| <= radius_j}.
struct Polydisk {
  std::vector<Complex> centers;
  std::vector<double> radii;

  bool contains(std::span<const Complex> z) const {
    for (std::size_t j = 0; j < centers.size() && j < z.size(); ++j)
      if (std::abs(z[j] - centers[j]) > radii[j]) return false;
    return true;
  }
};

namespace fn {

struct PolyTerm {
  std::vector<int> exponents;
  Complex coeff;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class Kind { poly, exp, sin, cos, ratio, prod, sum };

/// Builtin expression tree. `poly` holds terms; exp/sin/cos hold an affine argument
/// sum_j linear[j] z_j + offset; ratio/prod/sum hold two children.
struct Expr {
  Kind kind = Kind::poly;
  std::vector<PolyTerm> terms;
  std::size_t tuple_length = 0;  // exponent tuple length of a poly
  std::vector<Complex> linear;
  Complex offset{0.0, 0.0};
  ExprPtr lhs, rhs;
};

inline std::size_t arity_of(const Expr& e) {
  switch (e.kind) {
    case Kind::poly:
      return e.tuple_length;
    case Kind::exp:
    case Kind::sin:
    case Kind::cos:
      return e.linear.size();
    default:
      return std::max(arity_of(*e.lhs), arity_of(*e.rhs));
  }
}

inline Complex eval_poly(const Expr& e, std::span<const Complex> z) {
  Complex acc = 0.0;
  for (const auto& t : e.terms) {
    Complex m = t.coeff;
    for (std::size_t j = 0; j < t.exponents.size(); ++j)
      for (int p = 0; p < t.exponents[j]; ++p) m *= z[j];
    acc += m;
  }
  return acc;
}

inline Complex affine_value(const Expr& e, std::span<const Complex> z) {
  Complex g = e.offset;
  for (std::size_t j = 0; j < e.linear.size(); ++j) g += e.linear[j] * z[j];
  return g;
}

inline Complex eval(const Expr& e, std::span<const Complex> z) {
  switch (e.kind) {
    case Kind::poly:
      return eval_poly(e, z);
    case Kind::exp:
      return std::exp(affine_value(e, z));
    case Kind::sin:
      return std::sin(affine_value(e, z));
    case Kind::cos:
      return std::cos(affine_value(e, z));
    case Kind::ratio: {
      const Complex den = eval(*e.rhs, z);
      if (den == Complex(0.0)) throw DomainError("funcspace", "evaluation at a pole of ratio(...)");
      return eval(*e.lhs, z) / den;
    }
    case Kind::prod:
      return eval(*e.lhs, z) * eval(*e.rhs, z);
    case Kind::sum:
      return eval(*e.lhs, z) + eval(*e.rhs, z);
  }
  return 0.0;
}

inline double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * static_cast<double>(n - k + i) / static_cast<double>(i);
  return b;
}

/// e^{s * g(center)} prod_j (s * linear_j)^{alpha_j} / alpha_j!
inline Jet exp_affine_jet(const Expr& e, std::span<const Complex> center,
                          const std::vector<int>& caps, Complex s) {
  Jet out(caps);
  const Complex base = std::exp(s * affine_value(e, center));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto alpha = out.multi_index(i);
    Complex c = base;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      const Complex a = j < e.linear.size() ? s * e.linear[j] : Complex(0.0);
      for (int p = 1; p <= alpha[j]; ++p) c *= a / static_cast<double>(p);
    }
    out[i] = c;
  }
  return out;
}

inline Jet jet(const Expr& e, std::span<const Complex> center, const std::vector<int>& caps) {
  switch (e.kind) {
    case Kind::poly: {
      Jet out(caps);
      std::vector<int> alpha(caps.size());
      for (const auto& t : e.terms) {
        // Expand prod_j (c_j + h_j)^{beta_j}.
        std::vector<int> beta(caps.size(), 0);
        for (std::size_t j = 0; j < t.exponents.size(); ++j) beta[j] = t.exponents[j];
        Jet single = Jet::constant(caps, t.coeff);
        for (std::size_t j = 0; j < caps.size(); ++j) {
          if (beta[j] == 0) continue;
          Jet factor(caps);
          std::vector<int> idx(caps.size(), 0);
          for (int a = 0; a <= std::min(beta[j], caps[j]); ++a) {
            idx[j] = a;
            factor.at(idx) = binomial(beta[j], a) * std::pow(center[j], beta[j] - a);
          }
          single = single * factor;
        }
        out += single;
      }
      return out;
    }
    case Kind::exp:
      return exp_affine_jet(e, center, caps, 1.0);
    case Kind::sin: {
      Jet plus = exp_affine_jet(e, center, caps, Complex(0.0, 1.0));
      Jet minus = exp_affine_jet(e, center, caps, Complex(0.0, -1.0));
      return (plus + minus * Complex(-1.0)) * Complex(0.0, -0.5);
    }
    case Kind::cos: {
      Jet plus = exp_affine_jet(e, center, caps, Complex(0.0, 1.0));
      Jet minus = exp_affine_jet(e, center, caps, Complex(0.0, -1.0));
      return (plus + minus) * Complex(0.5);
    }
    case Kind::ratio:
      return jet(*e.lhs, center, caps) * jet(*e.rhs, center, caps).reciprocal();
    case Kind::prod:
      return jet(*e.lhs, center, caps) * jet(*e.rhs, center, caps);
    case Kind::sum:
      return jet(*e.lhs, center, caps) + jet(*e.rhs, center, caps);
  }
  return Jet(caps);
}

/// Distance from point[j] to the nearest zero of any ratio denominator, moving only z_j.
inline double singularity_distance(const Expr& e, std::span<const Complex> point, std::size_t j) {
  double d = std::numeric_limits<double>::infinity();
  if (e.kind == Kind::ratio) {
    const Expr& den = *e.rhs;
    int degree = 0;
    for (const auto& t : den.terms)
      if (j < t.exponents.size()) degree = std::max(degree, t.exponents[j]);
    std::vector<int> caps(point.size(), 0);
    caps[j] = degree;
    const Jet restricted = jet(den, point, caps);
    std::vector<Complex> c(static_cast<std::size_t>(degree) + 1);
    std::vector<int> idx(point.size(), 0);
    for (int a = 0; a <= degree; ++a) {
      idx[j] = a;
      c[static_cast<std::size_t>(a)] = restricted.at(idx);
    }
    while (!c.empty() && std::abs(c.back()) == 0.0) c.pop_back();
    if (c.size() >= 2) {
      // Roots of sum_a c_a h^a via the companion matrix; h is the offset from point[j].
      const Eigen::Index m = static_cast<Eigen::Index>(c.size()) - 1;
      ComplexMatrix companion = ComplexMatrix::Zero(m, m);
      for (Eigen::Index i = 1; i < m; ++i) companion(i, i - 1) = 1.0;
      for (Eigen::Index i = 0; i < m; ++i)
        companion(i, m - 1) = -c[static_cast<std::size_t>(i)] / c.back();
      for (Complex root : eigenvalues(companion)) d = std::min(d, std::abs(root));
    } else if (c.empty()) {
      d = 0.0;
    }
  }
  if (e.lhs) d = std::min(d, singularity_distance(*e.lhs, point, j));
  if (e.rhs && e.kind != Kind::ratio) d = std::min(d, singularity_distance(*e.rhs, point, j));
  return d;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_coeff(Complex c) {
  if (c.imag() == 0.0) return format_number(c.real());
  return "[" + format_number(c.real()) + "," + format_number(c.imag()) + "]";
}

inline std::string to_string(const Expr& e) {
  auto affine = [&]() {
    std::string s;
    for (std::size_t j = 0; j < e.linear.size(); ++j) {
      if (e.linear[j] == Complex(0.0)) continue;
      const std::string c = format_coeff(e.linear[j]);
      if (!s.empty() && c.front() != '-') s += '+';
      s += c + "*z" + std::to_string(j + 1);
    }
    const std::string d = format_coeff(e.offset);
    if (!s.empty() && d.front() != '-') s += '+';
    return s + d;
  };
  switch (e.kind) {
    case Kind::poly: {
      std::string s = "poly{";
      for (std::size_t t = 0; t < e.terms.size(); ++t) {
        if (t) s += ',';
        s += '(';
        for (std::size_t j = 0; j < e.terms[t].exponents.size(); ++j) {
          if (j) s += ',';
          s += std::to_string(e.terms[t].exponents[j]);
        }
        s += "):" + format_coeff(e.terms[t].coeff);
      }
      return s + "}";
    }
    case Kind::exp:
      return "exp(" + affine() + ")";
    case Kind::sin:
      return "sin(" + affine() + ")";
    case Kind::cos:
      return "cos(" + affine() + ")";
    case Kind::ratio:
      return "ratio(" + to_string(*e.lhs) + "," + to_string(*e.rhs) + ")";
    case Kind::prod:
      return "prod(" + to_string(*e.lhs) + "," + to_string(*e.rhs) + ")";
    case Kind::sum:
      return "sum(" + to_string(*e.lhs) + "," + to_string(*e.rhs) + ")";
  }
  return {};
}

}  // namespace fn

/// Scalar holomorphic function of r complex variables with mixed-partial access.
class AnalyticFunction {
public:
  AnalyticFunction(fn::ExprPtr expr, std::size_t arity,
                   DerivativeStrategy strategy = DerivativeStrategy::closed_form,
                   int max_order_hint = 8)
      : expr_(std::move(expr)), arity_(arity), strategy_(strategy), max_order_hint_(max_order_hint) {
    if (!expr_) throw PreconditionError("funcspace", "null expression");
    arity_ = std::max(arity_, fn::arity_of(*expr_));
    if (arity_ == 0) arity_ = 1;
    if (strategy_ == DerivativeStrategy::polynomial_table && expr_->kind != fn::Kind::poly)
      throw PreconditionError("funcspace", "polynomial_table strategy needs a polynomial");
  }

  std::size_t arity() const { return arity_; }
  DerivativeStrategy strategy() const { return strategy_; }
  int max_order_hint() const { return max_order_hint_; }
  const fn::Expr& expr() const { return *expr_; }
  const fn::ExprPtr& expr_ptr() const { return expr_; }
  const std::optional<Polydisk>& domain() const { return domain_; }

  AnalyticFunction with_strategy(DerivativeStrategy s) const {
    return AnalyticFunction(expr_, arity_, s, max_order_hint_).with_domain_opt(domain_);
  }
  AnalyticFunction with_domain(Polydisk d) const {
    AnalyticFunction out = *this;
    out.domain_ = std::move(d);
    return out;
  }
  AnalyticFunction with_arity(std::size_t r) const {
    AnalyticFunction out(expr_, r, strategy_, max_order_hint_);
    out.domain_ = domain_;
    return out;
  }

  Complex operator()(std::span<const Complex> z) const {
    check_point(z);
    const Complex v = fn::eval(*expr_, z);
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw DomainError("funcspace", "function value is not finite");
    return v;
  }
  Complex operator()(std::initializer_list<Complex> z) const {
    return (*this)(std::span<const Complex>(z.begin(), z.size()));
  }

  /// Taylor coefficients a_alpha about `center` for every alpha in the box [0, caps].
  Jet jet(std::span<const Complex> center, const std::vector<int>& caps) const {
    check_point(center);
    if (caps.size() != arity_) throw DimensionError("funcspace", "jet order list has wrong length");
    if (strategy_ == DerivativeStrategy::cauchy_contour) return cauchy_jet(center, caps);
    return fn::jet(*expr_, center, caps);
  }

  /// partial^alpha f at `point`.
  Complex mixed_partial(std::span<const Complex> point, const MultiIndex& alpha) const {
    if (alpha.size() != arity_) throw DimensionError("funcspace", "multi-index has wrong length");
    const Jet j = jet(point, alpha.orders);
    return j.at(alpha.orders) * alpha.factorial_product();
  }

  std::map<MultiIndex, Complex> taylor_coefficients(std::span<const Complex> center,
                                                    int degree_cap) const {
    const Jet j = jet(center, std::vector<int>(arity_, degree_cap));
    std::map<MultiIndex, Complex> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.emplace(MultiIndex{j.multi_index(i)}, j[i]);
    return out;
  }

  /// Per-variable Cauchy circle radius: 0.3 * distance to the nearest singularity, or 0.3 if entire.
  double cauchy_radius(std::span<const Complex> point, std::size_t j) const {
    const double d = fn::singularity_distance(*expr_, point, j);
    return 0.3 * (std::isfinite(d) ? d : 1.0);
  }

  std::string to_string() const { return fn::to_string(*expr_); }

  static constexpr int cauchy_nodes = 128;

private:
  AnalyticFunction with_domain_opt(std::optional<Polydisk> d) const {
    AnalyticFunction out = *this;
    out.domain_ = std::move(d);
    return out;
  }

  void check_point(std::span<const Complex> z) const {
    if (z.size() != arity_)
      throw DomainError("funcspace", "point has " + std::to_string(z.size()) +
                                         " coordinates, function arity is " +
                                         std::to_string(arity_));
    for (Complex c : z)
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
        throw DomainError("funcspace", "non-finite evaluation point");
    if (domain_ && !domain_->contains(z))
      throw DomainError("funcspace", "point outside the declared polydisk");
  }

  Jet cauchy_coefficients(std::span<const Complex> center, const std::vector<int>& caps,
                          const std::vector<double>& radii, int nodes) const {
    const std::size_t r = arity_;
    Jet out(caps);
    std::vector<int> k(r, 0);
    std::vector<Complex> z(r);
    std::vector<Complex> unit(r);
    std::size_t total = 1;
    for (std::size_t j = 0; j < r; ++j) total *= static_cast<std::size_t>(nodes);
    const double norm = 1.0 / static_cast<double>(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      for (std::size_t j = r; j-- > 0;) {
        k[j] = static_cast<int>(rem % static_cast<std::size_t>(nodes));
        rem /= static_cast<std::size_t>(nodes);
        const double theta = 2.0 * pi * k[j] / nodes;
        unit[j] = Complex(std::cos(theta), std::sin(theta));
        z[j] = center[j] + radii[j] * unit[j];
      }
      const Complex fz = fn::eval(*expr_, z);
      for (std::size_t i = 0; i < out.size(); ++i) {
        const auto alpha = out.multi_index(i);
        Complex w = fz * norm;
        for (std::size_t j = 0; j < r; ++j)
          w *= std::pow(radii[j] * unit[j], -alpha[j]);
        out[i] += w;
      }
    }
    return out;
  }

  Jet cauchy_jet(std::span<const Complex> center, const std::vector<int>& caps) const {
    std::vector<double> radii(arity_);
    for (std::size_t j = 0; j < arity_; ++j) radii[j] = cauchy_radius(center, j);
    const Jet coarse = cauchy_coefficients(center, caps, radii, cauchy_nodes);
    const Jet fine = cauchy_coefficients(center, caps, radii, 2 * cauchy_nodes);
    double fmax = 0.0;
    for (std::size_t i = 0; i < fine.size(); ++i) fmax = std::max(fmax, std::abs(fine[i]));
    for (std::size_t i = 0; i < fine.size(); ++i) {
      // Scale of coefficient alpha under the Cauchy bound: max|f| / rho^alpha.
      const auto alpha = fine.multi_index(i);
      double scale = std::abs(fine[0]);
      for (std::size_t j = 0; j < arity_; ++j) scale /= std::pow(radii[j], alpha[j]);
      const double floor = 1e-6 * std::max(scale, fmax);
      if (std::abs(coarse[i] - fine[i]) > 1e-8 * std::max(std::abs(fine[i]), floor))
        throw QuadratureError("funcspace", "Cauchy quadrature did not converge under node doubling");
    }
    return fine;
  }

  fn::ExprPtr expr_;
  std::size_t arity_;
  DerivativeStrategy strategy_;
  int max_order_hint_;
  std::optional<Polydisk> domain_;
};

/// Builtin family constructors.
namespace fn {

inline ExprPtr poly(std::vector<PolyTerm> terms) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::poly;
  for (const auto& t : terms) e->tuple_length = std::max(e->tuple_length, t.exponents.size());
  for (auto& t : terms) t.exponents.resize(e->tuple_length, 0);
  e->terms = std::move(terms);
  return e;
}

inline ExprPtr affine_call(Kind kind, std::vector<Complex> linear, Complex offset) {
  auto e = std::make_shared<Expr>();
  e->kind = kind;
  e->linear = std::move(linear);
  e->offset = offset;
  return e;
}
inline ExprPtr exp(std::vector<Complex> linear, Complex offset = 0.0) {
  return affine_call(Kind::exp, std::move(linear), offset);
}
inline ExprPtr sin(std::vector<Complex> linear, Complex offset = 0.0) {
  return affine_call(Kind::sin, std::move(linear), offset);
}
inline ExprPtr cos(std::vector<Complex> linear, Complex offset = 0.0) {
  return affine_call(Kind::cos, std::move(linear), offset);
}

inline ExprPtr binary(Kind kind, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = kind;
  e->lhs = std::move(a);
  e->rhs = std::move(b);
  return e;
}
inline ExprPtr ratio(ExprPtr num, ExprPtr den) {
  if (num->kind != Kind::poly || den->kind != Kind::poly)
    throw PreconditionError("funcspace", "ratio(...) takes two polynomials");
  return binary(Kind::ratio, std::move(num), std::move(den));
}
inline ExprPtr prod(ExprPtr a, ExprPtr b) { return binary(Kind::prod, std::move(a), std::move(b)); }
inline ExprPtr sum(ExprPtr a, ExprPtr b) { return binary(Kind::sum, std::move(a), std::move(b)); }

/// z_j (1-based j) in r variables.
inline ExprPtr coordinate(std::size_t j, std::size_t r) {
  std::vector<int> ex(r, 0);
  ex[j - 1] = 1;
  return poly({{ex, 1.0}});
}
inline ExprPtr constant(Complex c, std::size_t r = 1) {
  return poly({{std::vector<int>(r, 0), c}});
}

}  // namespace fn

inline AnalyticFunction operator+(const AnalyticFunction& f, const AnalyticFunction& g) {
  return AnalyticFunction(fn::sum(f.expr_ptr(), g.expr_ptr()), std::max(f.arity(), g.arity()));
}
inline AnalyticFunction operator*(const AnalyticFunction& f, const AnalyticFunction& g) {
  return AnalyticFunction(fn::prod(f.expr_ptr(), g.expr_ptr()), std::max(f.arity(), g.arity()));
}
inline AnalyticFunction operator*(Complex a, const AnalyticFunction& f) {
  return AnalyticFunction(fn::prod(fn::constant(a, f.arity()), f.expr_ptr()), f.arity());
}

/// Parser for the function mini-language:
///
///   poly{(i,j,...):c, ...}   exp(a1*z1+...+d)   sin(...)   cos(...)
///   ratio(poly, poly)        prod(f, g)         sum(f, g)
///
/// A coefficient is a real literal or [re,im].
class FunctionParser {
public:
  explicit FunctionParser(std::string_view text) : text_(text) {}

  fn::ExprPtr parse() {
    fn::ExprPtr e = expression();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
    return e;
  }

private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("funcspace", "function spec at offset " + std::to_string(pos_) + ": " + what +
                                      " in '" + std::string(text_) + "'");
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }
  std::string identifier() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  double number() {
    skip_ws();
    std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
            text_[pos_] == 'e' || text_[pos_] == 'E' ||
            ((text_[pos_] == '+' || text_[pos_] == '-') &&
             (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))))
      ++pos_;
    const char* first = text_.data() + start;
    if (*first == '+') ++first;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, text_.data() + pos_, v);
    if (ec != std::errc{} || ptr != text_.data() + pos_ || ptr == first) {
      pos_ = start;
      fail("bad number");
    }
    return v;
  }

  Complex coefficient() {
    if (accept('[')) {
      const double re = number();
      expect(',');
      const double im = number();
      expect(']');
      return {re, im};
    }
    return number();
  }

  int integer() {
    const double v = number();
    if (v < 0 || v != std::floor(v) || v > 1e6) fail("expected a nonnegative integer");
    return static_cast<int>(v);
  }

  fn::ExprPtr expression() {
    const std::string name = identifier();
    if (name == "poly") return polynomial();
    if (name == "exp" || name == "sin" || name == "cos") {
      const fn::Kind kind = name == "exp" ? fn::Kind::exp : name == "sin" ? fn::Kind::sin : fn::Kind::cos;
      expect('(');
      auto [linear, offset] = affine();
      expect(')');
      return fn::affine_call(kind, std::move(linear), offset);
    }
    if (name == "ratio" || name == "prod" || name == "sum") {
      expect('(');
      fn::ExprPtr a = expression();
      expect(',');
      fn::ExprPtr b = expression();
      expect(')');
      if (name == "ratio") {
        if (a->kind != fn::Kind::poly || b->kind != fn::Kind::poly)
          fail("ratio(...) takes two poly{...} arguments");
        return fn::ratio(a, b);
      }
      return name == "prod" ? fn::prod(a, b) : fn::sum(a, b);
    }
    fail("unknown function '" + name + "'");
  }

  fn::ExprPtr polynomial() {
    expect('{');
    std::vector<fn::PolyTerm> terms;
    if (!accept('}')) {
      do {
        expect('(');
        fn::PolyTerm t;
        do {
          t.exponents.push_back(integer());
        } while (accept(','));
        expect(')');
        expect(':');
        t.coeff = coefficient();
        if (!terms.empty() && terms.front().exponents.size() != t.exponents.size())
          fail("exponent tuples of one polynomial must have equal length");
        terms.push_back(std::move(t));
      } while (accept(','));
      expect('}');
    }
    if (terms.empty()) fail("empty polynomial");
    return fn::poly(std::move(terms));
  }

  std::pair<std::vector<Complex>, Complex> affine() {
    std::vector<Complex> linear;
    Complex offset = 0.0;
    bool first = true;
    while (true) {
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] == ')') break;
      if (!first && text_[pos_] != '+' && text_[pos_] != '-') fail("expected '+' or '-'");
      double sign = 1.0;
      if (!first) {
        sign = text_[pos_] == '-' ? -1.0 : 1.0;
        ++pos_;
      } else if (text_[pos_] == '-') {
        // A leading minus binds to a bare variable or bracketed coefficient; numbers keep it.
        std::size_t next = pos_ + 1;
        while (next < text_.size() && std::isspace(static_cast<unsigned char>(text_[next]))) ++next;
        if (next < text_.size() && (text_[next] == '[' || text_[next] == 'z')) {
          sign = -1.0;
          pos_ = next;
        }
      }
      first = false;
      skip_ws();
      Complex c = 1.0;
      bool has_coeff = false;
      if (pos_ < text_.size() && text_[pos_] != 'z') {
        c = coefficient();
        has_coeff = true;
      }
      c *= sign;
      skip_ws();
      if (has_coeff && !accept('*')) {
        offset += c;
        continue;
      }
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != 'z') fail("expected variable z<k>");
      ++pos_;
      const int k = integer();
      if (k < 1) fail("variables are numbered from z1");
      if (linear.size() < static_cast<std::size_t>(k)) linear.resize(static_cast<std::size_t>(k), 0.0);
      linear[static_cast<std::size_t>(k - 1)] += c;
    }
    if (first) fail("empty argument");
    return {linear, offset};
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline AnalyticFunction parse_function(std::string_view text, std::size_t arity = 0) {
  fn::ExprPtr e = FunctionParser(text).parse();
  const auto strategy =
      e->kind == fn::Kind::poly ? DerivativeStrategy::polynomial_table : DerivativeStrategy::closed_form;
  return AnalyticFunction(e, arity, strategy);
}

}  // namespace pnfc
