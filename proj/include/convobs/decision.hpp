#pragma once

// Scalars that are affine in a vector of decision variables theta:
//   c0 + sum_k c_k theta_k.
// Used as the coefficient type of polynomials with unknown coefficients, so
// that the polynomial layer carries SOS unknowns through differentiation and
// products. Multiplying two non-constant expressions is a bilinear term and
// raises BilinearError.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "convobs/poly.hpp"

namespace convobs {

class BilinearError : public std::domain_error {
 public:
  BilinearError(int a, int b)
      : std::domain_error("bilinear decision term theta" + std::to_string(a) + "*theta" + std::to_string(b) +
                          ": the problem is a BMI, fix one factor before compiling"),
        first_(a),
        second_(b) {}
  int first() const { return first_; }
  int second() const { return second_; }

 private:
  int first_, second_;
};

class AffineExpr {
 public:
  using Term = std::pair<int, double>;

  AffineExpr() = default;
  AffineExpr(double c) : c0_(c) {}  // NOLINT: implicit by design

  static AffineExpr decision(int k, double coef = 1.0) {
    AffineExpr e;
    if (coef != 0.0) e.lin_.emplace_back(k, coef);
    return e;
  }

  double constant() const { return c0_; }
  const std::vector<Term>& linear() const { return lin_; }
  bool is_constant() const { return lin_.empty(); }

  double coefficient(int k) const {
    auto it = std::lower_bound(lin_.begin(), lin_.end(), k, [](const Term& t, int v) { return t.first < v; });
    return (it != lin_.end() && it->first == k) ? it->second : 0.0;
  }

  double value(const Eigen::VectorXd& theta) const {
    double v = c0_;
    for (const auto& [k, c] : lin_) v += c * (k < theta.size() ? theta(k) : 0.0);
    return v;
  }

  AffineExpr operator-() const {
    AffineExpr e = *this;
    e.c0_ = -e.c0_;
    for (auto& t : e.lin_) t.second = -t.second;
    return e;
  }

  AffineExpr& operator+=(const AffineExpr& o) {
    c0_ += o.c0_;
    if (o.lin_.empty()) return *this;
    std::vector<Term> merged;
    merged.reserve(lin_.size() + o.lin_.size());
    auto a = lin_.cbegin();
    auto b = o.lin_.cbegin();
    while (a != lin_.cend() || b != o.lin_.cend()) {
      if (b == o.lin_.cend() || (a != lin_.cend() && a->first < b->first)) {
        merged.push_back(*a++);
      } else if (a == lin_.cend() || b->first < a->first) {
        merged.push_back(*b++);
      } else {
        double s = a->second + b->second;
        if (s != 0.0) merged.emplace_back(a->first, s);
        ++a;
        ++b;
      }
    }
    lin_ = std::move(merged);
    return *this;
  }

  AffineExpr& operator-=(const AffineExpr& o) { return *this += -o; }

  AffineExpr& operator*=(const AffineExpr& o) {
    if (!is_constant() && !o.is_constant()) throw BilinearError(lin_.front().first, o.lin_.front().first);
    if (o.is_constant()) {
      scale(o.c0_);
    } else {
      double s = c0_;
      *this = o;
      scale(s);
    }
    return *this;
  }

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator*(AffineExpr a, const AffineExpr& b) { return a *= b; }

  friend bool operator==(const AffineExpr& a, const AffineExpr& b) { return a.c0_ == b.c0_ && a.lin_ == b.lin_; }
  friend bool operator!=(const AffineExpr& a, const AffineExpr& b) { return !(a == b); }

  /// Strict weak order used only to make products deterministic.
  bool less(const AffineExpr& o) const {
    if (c0_ != o.c0_) return c0_ < o.c0_;
    return lin_ < o.lin_;
  }

 private:
  void scale(double s) {
    c0_ *= s;
    if (s == 0.0) {
      lin_.clear();
      return;
    }
    for (auto& t : lin_) t.second *= s;
  }

  double c0_ = 0.0;
  std::vector<Term> lin_;
};

/// Largest coefficient magnitude.
inline double abs(const AffineExpr& e) {
  double m = std::abs(e.constant());
  for (const auto& [k, c] : e.linear()) m = std::max(m, std::abs(c));
  return m;
}

using DecisionPolynomial = BasicPolynomial<AffineExpr>;
using DecisionPolyMatrix = BasicPolyMatrix<AffineExpr>;
using DecisionPolyVector = std::vector<DecisionPolynomial>;

template <typename To, typename From>
BasicPolynomial<To> polynomial_cast(const BasicPolynomial<From>& p) {
  typename BasicPolynomial<To>::Terms terms;
  for (const auto& [e, c] : p.terms()) terms.emplace(e, To(c));
  return BasicPolynomial<To>(p.vars(), terms);
}

inline DecisionPolynomial lift(const Polynomial& p) { return polynomial_cast<AffineExpr>(p); }

inline DecisionPolyVector lift(const PolyVector& v) {
  DecisionPolyVector out;
  out.reserve(v.size());
  for (const auto& p : v) out.push_back(lift(p));
  return out;
}

inline DecisionPolyMatrix lift(const PolyMatrix& m) {
  DecisionPolyMatrix out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out(i, j) = lift(m(i, j));
  return out;
}

/// Fixes the decision variables to numeric values.
inline Polynomial fix(const DecisionPolynomial& p, const Eigen::VectorXd& theta) {
  Polynomial::Terms terms;
  for (const auto& [e, c] : p.terms()) {
    double v = c.value(theta);
    if (v != 0.0) terms.emplace(e, v);
  }
  return Polynomial(p.vars(), terms);
}

inline PolyVector fix(const DecisionPolyVector& v, const Eigen::VectorXd& theta) {
  PolyVector out;
  for (const auto& p : v) out.push_back(fix(p, theta));
  return out;
}

inline PolyMatrix fix(const DecisionPolyMatrix& m, const Eigen::VectorXd& theta) {
  PolyMatrix out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out(i, j) = fix(m(i, j), theta);
  return out;
}

inline DecisionPolynomial operator*(const DecisionPolynomial& a, const Polynomial& b) { return a * lift(b); }
inline DecisionPolynomial operator*(const Polynomial& a, const DecisionPolynomial& b) { return lift(a) * b; }
inline DecisionPolynomial operator+(const DecisionPolynomial& a, const Polynomial& b) { return a + lift(b); }
inline DecisionPolynomial operator-(const DecisionPolynomial& a, const Polynomial& b) { return a - lift(b); }

inline DecisionPolyVector operator*(const DecisionPolyMatrix& A, const DecisionPolyVector& v) {
  if (A.cols() != static_cast<int>(v.size())) throw DimensionError("matrix-vector shape mismatch");
  DecisionPolyVector out(A.rows());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) {
      if (A(i, j).is_zero() || v[j].is_zero()) continue;
      out[i] += A(i, j) * v[j];
    }
  return out;
}

inline DecisionPolyVector operator*(const DecisionPolyMatrix& A, const PolyVector& v) { return A * lift(v); }

}  // namespace convobs
