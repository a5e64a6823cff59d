#pragma once

// Sparse multivariate polynomials over named variables.
//
// A polynomial keeps a lexicographically sorted variable list and a map from
// exponent vectors (one entry per variable) to coefficients. Binary operations
// on polynomials with different variable lists work on the sorted union.
// Zero coefficients are never stored.

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace convobs {

using Exponent = std::vector<int>;

/// Thrown when evaluating a polynomial whose variable has no binding.
class UnboundVariableError : public std::runtime_error {
 public:
  explicit UnboundVariableError(const std::string& var)
      : std::runtime_error("unbound variable '" + var + "'"), var_(var) {}
  const std::string& variable() const { return var_; }

 private:
  std::string var_;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::vector<std::string> sorted_union(const std::vector<std::string>& a,
                                             const std::vector<std::string>& b) {
  std::vector<std::string> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline int total_degree(const Exponent& e) {
  int d = 0;
  for (int k : e) d += k;
  return d;
}

}  // namespace detail

template <typename Scalar>
class BasicPolynomial {
 public:
  using Terms = std::map<Exponent, Scalar>;

  BasicPolynomial() = default;

  /// Constant polynomial.
  explicit BasicPolynomial(Scalar c) {
    if (c != Scalar(0)) terms_.emplace(Exponent{}, c);
  }

  /// Builds from an arbitrary variable list; sorts and deduplicates the
  /// variables and drops zero terms.
  BasicPolynomial(std::vector<std::string> vars, const Terms& terms) {
    std::vector<std::string> sorted = vars;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("duplicate variable name in polynomial");
    std::vector<int> where(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i)
      where[i] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), vars[i]) - sorted.begin());
    vars_ = std::move(sorted);
    for (const auto& [e, c] : terms) {
      if (e.size() != vars.size()) throw DimensionError("exponent length does not match variable count");
      Exponent mapped(vars_.size(), 0);
      for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i] < 0) throw std::invalid_argument("negative exponent");
        mapped[where[i]] = e[i];
      }
      accumulate(mapped, c);
    }
  }

  static BasicPolynomial variable(const std::string& name) {
    BasicPolynomial p;
    p.vars_ = {name};
    p.terms_.emplace(Exponent{1}, Scalar(1));
    return p;
  }

  static BasicPolynomial monomial(const std::vector<std::string>& vars, const Exponent& e,
                                  Scalar c = Scalar(1)) {
    return BasicPolynomial(vars, Terms{{e, c}});
  }

  const std::vector<std::string>& vars() const { return vars_; }
  const Terms& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  /// Total degree; -1 for the zero polynomial.
  int degree() const {
    int d = -1;
    for (const auto& [e, c] : terms_) d = std::max(d, detail::total_degree(e));
    return d;
  }

  /// Highest total degree over a subset of the variables.
  int degree_in(const std::vector<std::string>& subset) const {
    std::vector<int> idx = indices_of(subset);
    int d = is_zero() ? -1 : 0;
    for (const auto& [e, c] : terms_) {
      int s = 0;
      for (int i : idx)
        if (i >= 0) s += e[i];
      d = std::max(d, s);
    }
    return d;
  }

  int degree_in(const std::string& var) const { return degree_in(std::vector<std::string>{var}); }

  int index_of(const std::string& var) const {
    auto it = std::lower_bound(vars_.begin(), vars_.end(), var);
    if (it == vars_.end() || *it != var) return -1;
    return static_cast<int>(it - vars_.begin());
  }

  bool depends_on(const std::string& var) const {
    int i = index_of(var);
    if (i < 0) return false;
    for (const auto& [e, c] : terms_)
      if (e[i] > 0) return true;
    return false;
  }

  Scalar coefficient(const Exponent& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? Scalar(0) : it->second;
  }

  Scalar constant_term() const { return coefficient(Exponent(vars_.size(), 0)); }

  /// Same polynomial expressed over a superset of its variables.
  BasicPolynomial over(const std::vector<std::string>& superset) const {
    std::vector<std::string> target = superset;
    std::sort(target.begin(), target.end());
    target.erase(std::unique(target.begin(), target.end()), target.end());
    if (target == vars_) return *this;
    std::vector<int> where(vars_.size());
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      auto it = std::lower_bound(target.begin(), target.end(), vars_[i]);
      if (it == target.end() || *it != vars_[i])
        throw std::invalid_argument("variable '" + vars_[i] + "' missing from target ordering");
      where[i] = static_cast<int>(it - target.begin());
    }
    BasicPolynomial out;
    out.vars_ = std::move(target);
    for (const auto& [e, c] : terms_) {
      Exponent mapped(out.vars_.size(), 0);
      for (std::size_t i = 0; i < e.size(); ++i) mapped[where[i]] = e[i];
      out.terms_.emplace(std::move(mapped), c);
    }
    return out;
  }

  /// Removes variables that appear in no term.
  BasicPolynomial trimmed() const {
    std::vector<std::string> used;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      for (const auto& [e, c] : terms_) {
        if (e[i] > 0) {
          used.push_back(vars_[i]);
          break;
        }
      }
    }
    if (used.size() == vars_.size()) return *this;
    std::vector<int> keep;
    for (const auto& v : used) keep.push_back(index_of(v));
    BasicPolynomial out;
    out.vars_ = used;
    for (const auto& [e, c] : terms_) {
      Exponent r;
      r.reserve(keep.size());
      for (int i : keep) r.push_back(e[i]);
      out.terms_.emplace(std::move(r), c);
    }
    return out;
  }

  /// Drops terms with |coefficient| <= tol.
  BasicPolynomial pruned(double tol) const {
    BasicPolynomial out;
    out.vars_ = vars_;
    using std::abs;
    for (const auto& [e, c] : terms_)
      if (abs(c) > tol) out.terms_.emplace(e, c);
    return out;
  }

  BasicPolynomial operator-() const {
    BasicPolynomial out = *this;
    for (auto& [e, c] : out.terms_) c = -c;
    return out;
  }

  BasicPolynomial& operator+=(const BasicPolynomial& other) {
    if (other.vars_ != vars_) {
      auto u = detail::sorted_union(vars_, other.vars_);
      *this = over(u);
      BasicPolynomial o = other.over(u);
      for (const auto& [e, c] : o.terms_) accumulate(e, c);
      return *this;
    }
    for (const auto& [e, c] : other.terms_) accumulate(e, c);
    return *this;
  }

  BasicPolynomial& operator-=(const BasicPolynomial& other) { return *this += -other; }

  BasicPolynomial& operator*=(Scalar s) {
    if (s == Scalar(0)) {
      terms_.clear();
      return *this;
    }
    for (auto& [e, c] : terms_) c *= s;
    return *this;
  }

  friend BasicPolynomial operator+(BasicPolynomial a, const BasicPolynomial& b) { return a += b; }
  friend BasicPolynomial operator-(BasicPolynomial a, const BasicPolynomial& b) { return a -= b; }
  friend BasicPolynomial operator+(BasicPolynomial a, Scalar s) { return a += BasicPolynomial(s); }
  friend BasicPolynomial operator+(Scalar s, BasicPolynomial a) { return a += BasicPolynomial(s); }
  friend BasicPolynomial operator-(BasicPolynomial a, Scalar s) { return a += BasicPolynomial(-s); }
  friend BasicPolynomial operator-(Scalar s, const BasicPolynomial& a) { return BasicPolynomial(s) - a; }
  friend BasicPolynomial operator*(BasicPolynomial a, Scalar s) { return a *= s; }
  friend BasicPolynomial operator*(Scalar s, BasicPolynomial a) { return a *= s; }

  friend BasicPolynomial operator*(const BasicPolynomial& a, const BasicPolynomial& b) {
    if (a.is_zero() || b.is_zero()) return BasicPolynomial();
    auto u = detail::sorted_union(a.vars_, b.vars_);
    BasicPolynomial lhs = a.over(u);
    BasicPolynomial rhs = b.over(u);
    // Fixed operand order keeps a*b and b*a bit-identical.
    if (std::lexicographical_compare(rhs.terms_.begin(), rhs.terms_.end(), lhs.terms_.begin(), lhs.terms_.end(),
                                     [](const auto& x, const auto& y) { return x.first < y.first; }) ||
        (rhs.terms_.size() == lhs.terms_.size() &&
         std::equal(rhs.terms_.begin(), rhs.terms_.end(), lhs.terms_.begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first; }) &&
         std::lexicographical_compare(rhs.terms_.begin(), rhs.terms_.end(), lhs.terms_.begin(), lhs.terms_.end(),
                                      [](const auto& x, const auto& y) { return coefficient_less(x.second, y.second); })))
      std::swap(lhs, rhs);
    BasicPolynomial out;
    out.vars_ = u;
    Exponent e(u.size());
    for (const auto& [ea, ca] : lhs.terms_) {
      for (const auto& [eb, cb] : rhs.terms_) {
        for (std::size_t i = 0; i < u.size(); ++i) e[i] = ea[i] + eb[i];
        out.accumulate(e, ca * cb);
      }
    }
    return out;
  }

  BasicPolynomial& operator*=(const BasicPolynomial& other) { return *this = *this * other; }

  /// Structural equality after expressing both over the union of variables.
  friend bool operator==(const BasicPolynomial& a, const BasicPolynomial& b) {
    auto u = detail::sorted_union(a.vars_, b.vars_);
    return a.over(u).terms_ == b.over(u).terms_;
  }

  /// Largest coefficient magnitude of a - b.
  friend double max_abs_difference(const BasicPolynomial& a, const BasicPolynomial& b) {
    using std::abs;
    double m = 0.0;
    for (const auto& [e, c] : (a - b).terms_) m = std::max(m, static_cast<double>(abs(c)));
    return m;
  }

 private:
  static bool coefficient_less(const Scalar& a, const Scalar& b) {
    if constexpr (requires { a < b; })
      return a < b;
    else
      return a.less(b);
  }

  void accumulate(const Exponent& e, Scalar c) {
    if (c == Scalar(0)) return;
    auto [it, inserted] = terms_.try_emplace(e, c);
    if (!inserted) {
      it->second += c;
      if (it->second == Scalar(0)) terms_.erase(it);
    }
  }

  std::vector<int> indices_of(const std::vector<std::string>& names) const {
    std::vector<int> idx;
    idx.reserve(names.size());
    for (const auto& n : names) idx.push_back(index_of(n));
    return idx;
  }

  std::vector<std::string> vars_;
  Terms terms_;
};

using Polynomial = BasicPolynomial<double>;
using PolyVector = std::vector<Polynomial>;

template <typename Scalar>
BasicPolynomial<Scalar> pow(const BasicPolynomial<Scalar>& p, int n) {
  if (n < 0) throw std::invalid_argument("negative polynomial power");
  BasicPolynomial<Scalar> out(Scalar(1));
  for (int i = 0; i < n; ++i) out *= p;
  return out;
}

template <typename Scalar>
BasicPolynomial<Scalar> differentiate(const BasicPolynomial<Scalar>& p, const std::string& var) {
  int i = p.index_of(var);
  if (i < 0) return BasicPolynomial<Scalar>();
  typename BasicPolynomial<Scalar>::Terms out;
  for (const auto& [e, c] : p.terms()) {
    if (e[i] == 0) continue;
    Exponent d = e;
    d[i] -= 1;
    out.emplace(std::move(d), c * Scalar(e[i]));
  }
  return BasicPolynomial<Scalar>(p.vars(), out);
}

/// Evaluates p at a named point. Variables absent from every term need no
/// binding; any other missing variable raises UnboundVariableError.
template <typename Scalar, typename T>
T evaluate(const BasicPolynomial<Scalar>& p, const std::map<std::string, T>& point) {
  const auto& vars = p.vars();
  std::vector<T> values(vars.size(), T(0));
  std::vector<bool> bound(vars.size(), false);
  for (std::size_t i = 0; i < vars.size(); ++i) {
    auto it = point.find(vars[i]);
    if (it != point.end()) {
      values[i] = it->second;
      bound[i] = true;
    }
  }
  T acc(0);
  for (const auto& [e, c] : p.terms()) {
    T term = T(c);
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i] == 0) continue;
      if (!bound[i]) throw UnboundVariableError(vars[i]);
      T base = values[i];
      T pw = base;
      for (int k = 1; k < e[i]; ++k) pw *= base;
      term *= pw;
    }
    acc += term;
  }
  return acc;
}

/// Lie derivative of h along the vector field `field` over `state`:
/// sum_i dh/dstate_i * field_i.
template <typename Scalar>
BasicPolynomial<Scalar> lie_derivative(const BasicPolynomial<Scalar>& h,
                                       const std::vector<BasicPolynomial<Scalar>>& field,
                                       const std::vector<std::string>& state) {
  if (field.size() != state.size())
    throw DimensionError("lie_derivative: field has " + std::to_string(field.size()) +
                         " components for " + std::to_string(state.size()) + " state variables");
  BasicPolynomial<Scalar> out;
  for (std::size_t i = 0; i < state.size(); ++i) out += differentiate(h, state[i]) * field[i];
  return out;
}

/// Replaces variable `var` by the polynomial q.
template <typename Scalar>
BasicPolynomial<Scalar> substitute(const BasicPolynomial<Scalar>& p, const std::string& var,
                                   const BasicPolynomial<Scalar>& q) {
  int i = p.index_of(var);
  if (i < 0) return p;
  BasicPolynomial<Scalar> out;
  std::map<int, BasicPolynomial<Scalar>> powers;
  for (const auto& [e, c] : p.terms()) {
    Exponent rest = e;
    rest[i] = 0;
    auto it = powers.find(e[i]);
    if (it == powers.end()) it = powers.emplace(e[i], pow(q, e[i])).first;
    out += BasicPolynomial<Scalar>::monomial(p.vars(), rest, c) * it->second;
  }
  return out.trimmed();
}

/// Polynomial evaluation against a fixed argument ordering; precomputes the
/// variable lookup so repeated evaluation avoids string work.
class CompiledPolynomial {
 public:
  CompiledPolynomial() = default;
  CompiledPolynomial(const Polynomial& p, const std::vector<std::string>& arg_names) {
    const auto& vars = p.vars();
    std::vector<int> where(vars.size(), -1);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      auto it = std::find(arg_names.begin(), arg_names.end(), vars[i]);
      if (it != arg_names.end()) where[i] = static_cast<int>(it - arg_names.begin());
    }
    for (const auto& [e, c] : p.terms()) {
      Term t{c, {}};
      for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i] == 0) continue;
        if (where[i] < 0) throw UnboundVariableError(vars[i]);
        t.factors.emplace_back(where[i], e[i]);
      }
      terms_.push_back(std::move(t));
    }
  }

  template <typename Vec>
  double operator()(const Vec& args) const {
    double acc = 0.0;
    for (const auto& t : terms_) {
      double v = t.coef;
      for (const auto& [idx, pw] : t.factors) {
        double b = args[idx];
        double r = b;
        for (int k = 1; k < pw; ++k) r *= b;
        v *= r;
      }
      acc += v;
    }
    return acc;
  }

 private:
  struct Term {
    double coef;
    std::vector<std::pair<int, int>> factors;
  };
  std::vector<Term> terms_;
};

/// Rectangular matrix of polynomials sharing one variable ordering.
template <typename Scalar>
class BasicPolyMatrix {
 public:
  using Poly = BasicPolynomial<Scalar>;

  BasicPolyMatrix() = default;
  BasicPolyMatrix(int rows, int cols) : rows_(rows), cols_(cols), entries_(rows * cols) {
    if (rows < 0 || cols < 0) throw DimensionError("negative matrix dimension");
  }

  static BasicPolyMatrix constant(const Eigen::MatrixXd& m) {
    BasicPolyMatrix out(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
    for (int i = 0; i < out.rows_; ++i)
      for (int j = 0; j < out.cols_; ++j) out(i, j) = Poly(static_cast<Scalar>(m(i, j)));
    return out;
  }

  static BasicPolyMatrix identity(int n) { return constant(Eigen::MatrixXd::Identity(n, n)); }

  static BasicPolyMatrix column(const std::vector<Poly>& v) {
    BasicPolyMatrix out(static_cast<int>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<int>(i), 0) = v[i];
    return out.unified();
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Poly& operator()(int i, int j) { return entries_[i * cols_ + j]; }
  const Poly& operator()(int i, int j) const { return entries_[i * cols_ + j]; }

  std::vector<std::string> vars() const {
    std::vector<std::string> u;
    for (const auto& p : entries_) u = detail::sorted_union(u, p.vars());
    return u;
  }

  /// Re-expresses every entry over the common variable ordering.
  BasicPolyMatrix unified() const {
    auto u = vars();
    BasicPolyMatrix out = *this;
    for (auto& p : out.entries_) p = p.over(u);
    return out;
  }

  BasicPolyMatrix transpose() const {
    BasicPolyMatrix out(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    return out;
  }

  bool is_symmetric(double tol = 0.0) const {
    if (rows_ != cols_) return false;
    for (int i = 0; i < rows_; ++i)
      for (int j = i + 1; j < cols_; ++j)
        if (max_abs_difference((*this)(i, j), (*this)(j, i)) > tol) return false;
    return true;
  }

  BasicPolyMatrix& operator+=(const BasicPolyMatrix& o) {
    check_same_shape(o);
    for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] += o.entries_[k];
    return *this;
  }
  BasicPolyMatrix& operator-=(const BasicPolyMatrix& o) {
    check_same_shape(o);
    for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] -= o.entries_[k];
    return *this;
  }
  BasicPolyMatrix& operator*=(Scalar s) {
    for (auto& p : entries_) p *= s;
    return *this;
  }
  BasicPolyMatrix operator-() const {
    BasicPolyMatrix out = *this;
    for (auto& p : out.entries_) p = -p;
    return out;
  }

  friend BasicPolyMatrix operator+(BasicPolyMatrix a, const BasicPolyMatrix& b) { return a += b; }
  friend BasicPolyMatrix operator-(BasicPolyMatrix a, const BasicPolyMatrix& b) { return a -= b; }
  friend BasicPolyMatrix operator*(BasicPolyMatrix a, Scalar s) { return a *= s; }
  friend BasicPolyMatrix operator*(Scalar s, BasicPolyMatrix a) { return a *= s; }
  friend BasicPolyMatrix operator*(const BasicPolyMatrix& a, const BasicPolyMatrix& b) {
    if (a.cols_ != b.rows_) throw DimensionError("poly matrix product shape mismatch");
    BasicPolyMatrix out(a.rows_, b.cols_);
    for (int i = 0; i < a.rows_; ++i)
      for (int j = 0; j < b.cols_; ++j)
        for (int k = 0; k < a.cols_; ++k) {
          if (a(i, k).is_zero() || b(k, j).is_zero()) continue;
          out(i, j) += a(i, k) * b(k, j);
        }
    return out;
  }

  /// Symmetric part times two: A + A^T.
  BasicPolyMatrix plus_transpose() const { return *this + transpose(); }

  Eigen::MatrixXd evaluate(const std::map<std::string, double>& point) const {
    Eigen::MatrixXd m(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) m(i, j) = convobs::evaluate((*this)(i, j), point);
    return m;
  }

 private:
  void check_same_shape(const BasicPolyMatrix& o) const {
    if (o.rows_ != rows_ || o.cols_ != cols_) throw DimensionError("poly matrix shape mismatch");
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<Poly> entries_;
};

using PolyMatrix = BasicPolyMatrix<double>;

/// Jacobian d f_i / d vars_j.
template <typename Scalar>
BasicPolyMatrix<Scalar> jacobian(const std::vector<BasicPolynomial<Scalar>>& f,
                                 const std::vector<std::string>& vars) {
  BasicPolyMatrix<Scalar> J(static_cast<int>(f.size()), static_cast<int>(vars.size()));
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t j = 0; j < vars.size(); ++j)
      J(static_cast<int>(i), static_cast<int>(j)) = differentiate(f[i], vars[j]);
  return J;
}

/// Matrix-vector product with a polynomial vector.
inline PolyVector operator*(const PolyMatrix& A, const PolyVector& v) {
  if (A.cols() != static_cast<int>(v.size())) throw DimensionError("poly matrix-vector shape mismatch");
  PolyVector out(A.rows());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) out[i] += A(i, j) * v[j];
  return out;
}

/// Substitutes numeric values for some variables; the result keeps the rest.
Polynomial substitute(const Polynomial& p, const std::map<std::string, double>& values);

/// Parses "+"/"-" separated terms such as `-0.3333*x1^3*x2^0 + 2*y`.
Polynomial parse_polynomial(const std::string& text);

/// Inverse of parse_polynomial; round-trips with full double precision.
std::string to_string(const Polynomial& p);

/// All monomials in `vars` with total degree in [min_degree, max_degree],
/// ordered by degree then lexicographically.
std::vector<Exponent> monomials_up_to(int nvars, int max_degree, int min_degree = 0);

}  // namespace convobs
