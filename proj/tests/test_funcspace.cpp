// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <gtest/gtest.h>

#include "pnfc/funcspace.hpp"

using namespace pnfc;

namespace {

Complex point1(const AnalyticFunction& f, Complex z) { return f({z}); }

std::vector<AnalyticFunction> builtin_family() {
  return {
      parse_function("exp(z1)"),
      parse_function("sin([0.5,0.25]*z1-0.3*z2+[0,1])"),
      parse_function("cos(z1+2*z2-1)"),
      parse_function("poly{(3,0):1,(1,2):[0,-2],(0,0):0.5}"),
      parse_function("ratio(poly{(0,0):1,(1,1):2},poly{(0,0):3,(1,0):-1})", 2),
      parse_function("prod(exp(z1),sum(poly{(0,1):1},poly{(0,0):1}))"),
  };
}

}  // namespace

TEST(Eval, Examples) {
  EXPECT_EQ(point1(parse_function("exp(z1)"), 0.0), Complex(1.0));
  EXPECT_EQ(parse_function("poly{(1,1):1}")({1.0, 0.0}), Complex(0.0));
  const Complex lambda(0.7, -0.2);
  // (z - lambda)^2 = z^2 - 2 lambda z + lambda^2
  const AnalyticFunction sq(fn::poly({{{2}, 1.0}, {{1}, -2.0 * lambda}, {{0}, lambda * lambda}}), 1);
  EXPECT_LE(std::abs(point1(sq, lambda)), 1e-16);
}

TEST(Eval, DomainViolations) {
  const auto f = parse_function("exp(z1)");
  EXPECT_THROW(f({1.0, 2.0}), DomainError);
  EXPECT_THROW(f({Complex(std::nan(""), 0.0)}), DomainError);
  const auto g = f.with_domain({{0.0}, {1.0}});
  EXPECT_NO_THROW(g({0.5}));
  EXPECT_THROW(g({2.0}), DomainError);
  EXPECT_THROW(parse_function("ratio(poly{(0):1},poly{(1):1})")({0.0}), DomainError);
}

TEST(MixedPartial, Examples) {
  const auto z1z2 = parse_function("poly{(1,1):1}");
  EXPECT_EQ(z1z2.mixed_partial(std::vector<Complex>{1.0, 0.0}, MultiIndex{{1, 1}}), Complex(1.0));
  const auto e = parse_function("exp(z1)");
  const Complex lambda(0.3, 1.1);
  for (int q = 0; q <= 6; ++q)
    EXPECT_LE(std::abs(e.mixed_partial(std::vector<Complex>{lambda}, MultiIndex{{q}}) -
                       std::exp(lambda)),
              1e-14 * std::abs(std::exp(lambda)));
  const auto cube = parse_function("poly{(3):1}");
  EXPECT_EQ(cube.mixed_partial(std::vector<Complex>{2.0}, MultiIndex{{2}}), Complex(12.0));
}

TEST(TaylorCoefficients, Examples) {
  const auto e = parse_function("exp(z1)").taylor_coefficients(std::vector<Complex>{0.0}, 3);
  ASSERT_EQ(e.size(), 4u);
  const double expected[] = {1.0, 1.0, 0.5, 1.0 / 6.0};
  for (int q = 0; q < 4; ++q)
    EXPECT_NEAR(std::abs(e.at(MultiIndex{{q}}) - expected[q]), 0.0, 1e-16);

  const auto p = parse_function("poly{(1,1):1}").taylor_coefficients(std::vector<Complex>{0.0, 0.0}, 2);
  ASSERT_EQ(p.size(), 9u);
  for (const auto& [alpha, a] : p) {
    if (alpha.orders == std::vector<int>{1, 1})
      EXPECT_EQ(a, Complex(1.0));
    else
      EXPECT_EQ(a, Complex(0.0));
  }

  const auto g = parse_function("ratio(poly{(0):1},poly{(0):3,(1):-1})")
                     .taylor_coefficients(std::vector<Complex>{0.0}, 2);
  EXPECT_NEAR(std::abs(g.at(MultiIndex{{0}}) - 1.0 / 3.0), 0.0, 1e-16);
  EXPECT_NEAR(std::abs(g.at(MultiIndex{{1}}) - 1.0 / 9.0), 0.0, 1e-16);
  EXPECT_NEAR(std::abs(g.at(MultiIndex{{2}}) - 1.0 / 27.0), 0.0, 1e-16);
}

TEST(MultiIndex, SupportAndFactorials) {
  const MultiIndex a{{0, 3, 1}};
  EXPECT_EQ(a.total(), 4);
  EXPECT_EQ(a.support_size(), 2u);
  EXPECT_DOUBLE_EQ(a.factorial_product(), 6.0);
}

// First partials against central differences with step 1e-5.
TEST(MixedPartial, AgreesWithFiniteDifferences) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  const double h = 1e-5;
  for (const auto& f : builtin_family()) {
    for (int sample = 0; sample < 20; ++sample) {
      std::vector<Complex> z(f.arity());
      for (auto& c : z) c = Complex(u(rng), u(rng));
      for (std::size_t j = 0; j < f.arity(); ++j) {
        MultiIndex alpha{std::vector<int>(f.arity(), 0)};
        alpha.orders[j] = 1;
        const Complex exact = f.mixed_partial(z, alpha);
        auto zp = z, zm = z;
        zp[j] += h;
        zm[j] -= h;
        const Complex fd = (f(zp) - f(zm)) / (2.0 * h);
        EXPECT_LE(std::abs(exact - fd), 1e-6 * std::max(1.0, std::abs(exact)))
            << f.to_string() << " variable " << j + 1;
      }
    }
  }
}

TEST(MixedPartial, CauchyMatchesClosedForm) {
  const std::vector<AnalyticFunction> family = {
      parse_function("exp(z1)"),
      parse_function("sin(2*z1+0.5)"),
      parse_function("ratio(poly{(0):1,(1):2},poly{(0):3,(1):-1,(2):0.5})"),
  };
  for (const auto& f : family) {
    const auto cauchy = f.with_strategy(DerivativeStrategy::cauchy_contour);
    std::vector<Complex> z(f.arity(), Complex(0.2, -0.1));
    const Jet exact = f.jet(z, std::vector<int>(f.arity(), 4));
    const Jet quad = cauchy.jet(z, std::vector<int>(f.arity(), 4));
    for (std::size_t i = 0; i < exact.size(); ++i)
      EXPECT_LE(std::abs(exact[i] - quad[i]), 1e-10 * std::max(std::abs(exact[i]), 1e-300))
          << f.to_string() << " coefficient " << i;
  }
}

// Iterated circles: rounding of the (4,4) coefficient grows with rho^-8, hence the looser bound.
TEST(MixedPartial, CauchyMatchesClosedFormInTwoVariables) {
  const auto f = parse_function("exp(z1-[0,0.5]*z2)");
  const auto cauchy = f.with_strategy(DerivativeStrategy::cauchy_contour);
  const std::vector<Complex> z{Complex(0.2, -0.1), Complex(-0.3, 0.0)};
  const Jet exact = f.jet(z, {4, 4});
  const Jet quad = cauchy.jet(z, {4, 4});
  for (std::size_t i = 0; i < exact.size(); ++i)
    EXPECT_LE(std::abs(exact[i] - quad[i]), 1e-9 * std::abs(exact[i])) << i;
}

TEST(MixedPartial, CauchyRadiusFollowsSingularities) {
  const auto f = parse_function("ratio(poly{(0):1},poly{(0):2,(1):-1})");
  EXPECT_NEAR(f.cauchy_radius(std::vector<Complex>{0.0}, 0), 0.6, 1e-14);
  EXPECT_NEAR(parse_function("exp(z1)").cauchy_radius(std::vector<Complex>{5.0}, 0), 0.3, 0.0);
}

TEST(MixedPartial, LeibnizRule) {
  const auto g = parse_function("exp(z1+[0,1]*z2)");
  const auto h = parse_function("ratio(poly{(1,0):1,(0,1):2},poly{(0,0):4,(1,1):1})");
  const auto gh = g * h;
  const std::vector<Complex> z{Complex(0.3, 0.1), Complex(-0.2, 0.4)};
  const MultiIndex zero{{0, 0}};
  for (std::size_t j = 0; j < 2; ++j) {
    MultiIndex e{{0, 0}};
    e.orders[j] = 1;
    const Complex lhs = gh.mixed_partial(z, e);
    const Complex rhs = g.mixed_partial(z, e) * h.mixed_partial(z, zero) +
                        g.mixed_partial(z, zero) * h.mixed_partial(z, e);
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::abs(rhs));
  }
  const MultiIndex both{{1, 1}};
  const MultiIndex e1{{1, 0}}, e2{{0, 1}};
  const Complex lhs = gh.mixed_partial(z, both);
  const Complex rhs = g.mixed_partial(z, both) * h.mixed_partial(z, zero) +
                      g.mixed_partial(z, e1) * h.mixed_partial(z, e2) +
                      g.mixed_partial(z, e2) * h.mixed_partial(z, e1) +
                      g.mixed_partial(z, zero) * h.mixed_partial(z, both);
  EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::abs(rhs));
}

TEST(Jet, ReciprocalInvertsProduct) {
  const auto p = fn::jet(*parse_function("poly{(0,0):2,(1,0):1,(1,2):[0,3]}").expr_ptr(),
                         std::vector<Complex>{0.1, 0.2}, {3, 3});
  const Jet one = p * p.reciprocal();
  for (std::size_t i = 0; i < one.size(); ++i)
    EXPECT_LE(std::abs(one[i] - (i == 0 ? Complex(1.0) : Complex(0.0))), 1e-15);
}

TEST(Parser, RoundTripsCanonicalForm) {
  for (const auto& f : builtin_family()) {
    const std::string text = f.to_string();
    EXPECT_EQ(parse_function(text).to_string(), text);
  }
}

TEST(Parser, CoefficientsRoundTripExactly) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> expo(-300, 300);
  for (int trial = 0; trial < 200; ++trial) {
    const Complex c(std::ldexp(mant(rng), expo(rng) / 10), std::ldexp(mant(rng), expo(rng)));
    const Complex a(mant(rng), 0.0);
    const AnalyticFunction f(fn::sum(fn::poly({{{2, 1}, c}}), fn::exp({a, c}, -c)), 2);
    const auto g = parse_function(f.to_string());
    EXPECT_EQ(g.expr().lhs->terms[0].coeff, c);
    EXPECT_EQ(g.expr().rhs->linear[0], a);
    EXPECT_EQ(g.expr().rhs->linear[1], c);
    EXPECT_EQ(g.expr().rhs->offset, -c);
  }
}

TEST(Parser, AcceptsAffineVariants) {
  const auto f = parse_function("exp(-z1 + 2.5*z2 - [0,1])");
  ASSERT_EQ(f.arity(), 2u);
  const std::vector<Complex> z{Complex(0.2, 0.0), Complex(0.0, 0.3)};
  EXPECT_LE(std::abs(f(z) - std::exp(-z[0] + 2.5 * z[1] - Complex(0.0, 1.0))), 1e-15);
  EXPECT_EQ(parse_function("exp(z3)").arity(), 3u);
  EXPECT_EQ(parse_function("exp(z1)", 2).arity(), 2u);
}

TEST(Parser, RejectsMalformedInput) {
  for (const char* bad : {"", "poly{}", "poly{(1,2):1,(1):2}", "exp()", "exp(z0)", "log(z1)",
                          "ratio(exp(z1),poly{(0):1})", "sum(exp(z1))", "exp(z1) extra",
                          "poly{(1):x}", "poly{(-1):1}", "exp(2 z1)"}) {
    EXPECT_THROW(parse_function(bad), ParseError) << bad;
  }
}

TEST(Strategy, ParserChoosesTableForPolynomials) {
  EXPECT_EQ(parse_function("poly{(2):1}").strategy(), DerivativeStrategy::polynomial_table);
  EXPECT_EQ(parse_function("exp(z1)").strategy(), DerivativeStrategy::closed_form);
  EXPECT_THROW(parse_function("exp(z1)").with_strategy(DerivativeStrategy::polynomial_table),
               PreconditionError);
}
