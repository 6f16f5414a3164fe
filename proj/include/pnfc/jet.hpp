// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "pnfc/errors.hpp"

namespace pnfc {

/// Truncated multivariate Taylor series sum_alpha a_alpha h^alpha about a fixed center, keeping
/// every multi-index with alpha_j <= caps[j]. Box truncation is closed under multiplication, so
/// products and quotients of jets give exact coefficients.
class Jet {
public:
  using value_type = std::complex<double>;

  explicit Jet(std::vector<int> caps) : caps_(std::move(caps)) {
    strides_.assign(caps_.size(), 1);
    std::size_t size = 1;
    for (std::size_t j = caps_.size(); j-- > 0;) {
      if (caps_[j] < 0) throw PreconditionError("funcspace", "negative jet order");
      strides_[j] = size;
      size *= static_cast<std::size_t>(caps_[j] + 1);
    }
    coeffs_.assign(size, value_type(0.0));
  }

  static Jet constant(std::vector<int> caps, value_type c) {
    Jet out(std::move(caps));
    out.coeffs_[0] = c;
    return out;
  }

  /// value + h_j.
  static Jet variable(std::vector<int> caps, std::size_t j, value_type value) {
    Jet out(std::move(caps));
    out.coeffs_[0] = value;
    if (out.caps_[j] >= 1) out.coeffs_[out.strides_[j]] = 1.0;
    return out;
  }

  std::size_t arity() const { return caps_.size(); }
  const std::vector<int>& caps() const { return caps_; }
  std::size_t size() const { return coeffs_.size(); }

  value_type& operator[](std::size_t linear) { return coeffs_[linear]; }
  value_type operator[](std::size_t linear) const { return coeffs_[linear]; }

  std::size_t linear_index(std::span<const int> alpha) const {
    std::size_t idx = 0;
    for (std::size_t j = 0; j < caps_.size(); ++j) idx += static_cast<std::size_t>(alpha[j]) * strides_[j];
    return idx;
  }

  std::vector<int> multi_index(std::size_t linear) const {
    std::vector<int> alpha(caps_.size());
    for (std::size_t j = 0; j < caps_.size(); ++j) {
      alpha[j] = static_cast<int>(linear / strides_[j]);
      linear %= strides_[j];
    }
    return alpha;
  }

  bool contains(std::span<const int> alpha) const {
    for (std::size_t j = 0; j < caps_.size(); ++j)
      if (alpha[j] < 0 || alpha[j] > caps_[j]) return false;
    return true;
  }

  value_type at(std::span<const int> alpha) const { return coeffs_[linear_index(alpha)]; }
  value_type& at(std::span<const int> alpha) { return coeffs_[linear_index(alpha)]; }

  Jet& operator+=(const Jet& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    return *this;
  }
  Jet& operator*=(value_type s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
  }
  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator*(Jet a, value_type s) { return a *= s; }
  friend Jet operator*(value_type s, Jet a) { return a *= s; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    a.check_compatible(b);
    Jet out(a.caps_);
    const std::size_t r = a.caps_.size();
    std::vector<int> alpha(r, 0);
    std::vector<int> room(r);
    std::vector<int> beta(r);
    for (std::size_t ia = 0; ia < a.size(); ++ia) {
      const value_type av = a.coeffs_[ia];
      alpha = a.multi_index(ia);
      if (av == value_type(0.0)) continue;
      for (std::size_t j = 0; j < r; ++j) room[j] = a.caps_[j] - alpha[j];
      out.for_each_in_box(room, beta, [&](std::size_t lb) {
        out.coeffs_[ia + lb] += av * b.coeffs_[lb];
      });
    }
    return out;
  }

  /// 1 / this, valid when the constant term is nonzero.
  Jet reciprocal() const {
    if (coeffs_[0] == value_type(0.0))
      throw DomainError("funcspace", "reciprocal of a jet with zero constant term");
    Jet out(caps_);
    const value_type inv0 = value_type(1.0) / coeffs_[0];
    out.coeffs_[0] = inv0;
    std::vector<int> beta(caps_.size());
    // Row-major order visits every beta <= alpha before alpha.
    for (std::size_t ia = 1; ia < size(); ++ia) {
      const std::vector<int> alpha = multi_index(ia);
      value_type acc = 0.0;
      for_each_in_box(alpha, beta, [&](std::size_t lb) {
        if (lb != ia) acc += coeffs_[ia - lb] * out.coeffs_[lb];
      });
      out.coeffs_[ia] = -inv0 * acc;
    }
    return out;
  }

private:
  void check_compatible(const Jet& o) const {
    if (o.caps_ != caps_) throw PreconditionError("funcspace", "jet truncation orders differ");
  }

  /// Calls fn(linear index of beta) for every beta with 0 <= beta <= bound.
  template <typename Fn>
  void for_each_in_box(const std::vector<int>& bound, std::vector<int>& beta, Fn&& fn) const {
    const std::size_t r = caps_.size();
    std::fill(beta.begin(), beta.end(), 0);
    std::size_t linear = 0;
    while (true) {
      fn(linear);
      std::size_t j = r;
      while (j-- > 0) {
        if (beta[j] < bound[j]) {
          ++beta[j];
          linear += strides_[j];
          break;
        }
        linear -= static_cast<std::size_t>(beta[j]) * strides_[j];
        beta[j] = 0;
      }
      if (j == static_cast<std::size_t>(-1)) return;
    }
  }

  std::vector<int> caps_;
  std::vector<std::size_t> strides_;
  std::vector<value_type> coeffs_;
};

}  // namespace pnfc
