#include "convobs/sos.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "convobs/linalg.hpp"

namespace convobs {

std::string to_string(SosStatus s) {
  switch (s) {
    case SosStatus::Feasible: return "Feasible";
    case SosStatus::Marginal: return "Marginal";
    case SosStatus::Infeasible: return "Infeasible";
    case SosStatus::Failed: return "Failed";
  }
  return "?";
}

namespace {

Exponent add(const Exponent& a, const Exponent& b) {
  Exponent e(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) e[i] = a[i] + b[i];
  return e;
}

Exponent twice(const Exponent& a) { return add(a, a); }

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Variables of p that carry a nonzero exponent somewhere.
std::vector<std::string> active_vars(const DecisionPolynomial& p) {
  std::vector<std::string> out;
  for (const auto& v : p.vars())
    if (p.depends_on(v)) out.push_back(v);
  return out;
}

std::set<Exponent> support_over(const DecisionPolynomial& p, const std::vector<std::string>& vars) {
  std::set<Exponent> s;
  DecisionPolynomial q = p.over(sorted_unique([&] {
    auto u = vars;
    u.insert(u.end(), p.vars().begin(), p.vars().end());
    return u;
  }()));
  // Project onto `vars`; callers guarantee other variables have zero exponent.
  std::vector<int> idx;
  for (const auto& v : vars) idx.push_back(q.index_of(v));
  for (const auto& [e, c] : q.terms()) {
    Exponent r;
    for (int i : idx) r.push_back(e[i]);
    s.insert(r);
  }
  return s;
}

// Per-variable Newton bounds followed by diagonal pruning.
std::vector<Exponent> prune_basis(std::vector<Exponent> cand, const std::set<Exponent>& support, int nvars) {
  if (support.empty()) return {};
  std::vector<int> lo(nvars, INT32_MAX), hi(nvars, 0);
  for (const auto& e : support)
    for (int i = 0; i < nvars; ++i) {
      lo[i] = std::min(lo[i], e[i]);
      hi[i] = std::max(hi[i], e[i]);
    }
  std::vector<Exponent> kept;
  for (const auto& m : cand) {
    bool ok = true;
    for (int i = 0; i < nvars && ok; ++i) ok = 2 * m[i] <= hi[i] && 2 * m[i] >= lo[i];
    if (ok) kept.push_back(m);
  }
  bool changed = true;
  while (changed) {
    changed = false;
    std::set<Exponent> present(kept.begin(), kept.end());
    std::vector<Exponent> next;
    for (const auto& m : kept) {
      Exponent sq = twice(m);
      bool keep = support.count(sq) > 0;
      if (!keep) {
        for (const auto& a : kept) {
          if (a == m) continue;
          Exponent b(nvars);
          bool valid = true;
          for (int i = 0; i < nvars && valid; ++i) {
            b[i] = sq[i] - a[i];
            valid = b[i] >= 0;
          }
          if (valid && b != a && present.count(b)) {
            keep = true;
            break;
          }
        }
      }
      if (keep)
        next.push_back(m);
      else
        changed = true;
    }
    kept = std::move(next);
  }
  return kept;
}

std::string monomial_name(const std::vector<std::string>& vars, const Exponent& e) {
  Polynomial m = Polynomial::monomial(vars, e);
  return to_string(m);
}

}  // namespace

MonomialBasis MonomialBasis::total_degree(const std::vector<std::string>& vars, int max_degree, int min_degree) {
  MonomialBasis b;
  b.vars = sorted_unique(vars);
  b.monomials = monomials_up_to(static_cast<int>(b.vars.size()), max_degree, min_degree);
  return b;
}

MonomialBasis MonomialBasis::for_support(const DecisionPolynomial& p, const std::vector<std::string>& vars,
                                         int max_degree) {
  MonomialBasis b;
  b.vars = sorted_unique(vars.empty() ? active_vars(p) : vars);
  for (const auto& v : active_vars(p))
    if (!std::binary_search(b.vars.begin(), b.vars.end(), v))
      throw std::invalid_argument("polynomial depends on '" + v + "' which is not an indeterminate of the basis");
  auto support = support_over(p, b.vars);
  if (support.empty()) return b;
  int lo = INT32_MAX, hi = 0;
  for (const auto& e : support) {
    int d = detail::total_degree(e);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  int dlo = (lo + 1) / 2;
  int dhi = hi / 2;
  if (max_degree >= 0) dhi = std::min(dhi, max_degree);
  auto cand = monomials_up_to(static_cast<int>(b.vars.size()), dhi, dlo);
  b.monomials = prune_basis(cand, support, static_cast<int>(b.vars.size()));
  return b;
}

std::string MonomialBasis::name(int i) const { return monomial_name(vars, monomials.at(i)); }

Polynomial GramCertificate::reconstruct() const {
  Polynomial out;
  for (int a = 0; a < basis.size(); ++a)
    for (int b = 0; b < basis.size(); ++b) {
      if (gram(a, b) == 0.0) continue;
      out += Polynomial::monomial(basis.vars, add(basis.monomials[a], basis.monomials[b]), gram(a, b));
    }
  return out;
}

double GramCertificate::min_eigenvalue() const { return convobs::min_eigenvalue(gram); }

SosFragment compile_scalar(SdpProblem& sdp, const DecisionPolynomial& p, const MonomialBasis& basis,
                           const std::vector<int>& theta_column, const std::string& label) {
  SosFragment frag;
  frag.label = label;
  frag.basis = basis;
  frag.subject = p;
  for (const auto& v : active_vars(p))
    if (!std::binary_search(basis.vars.begin(), basis.vars.end(), v))
      throw std::invalid_argument("constraint '" + label + "': variable '" + v + "' missing from the Gram basis");
  const int nv = static_cast<int>(basis.vars.size());
  auto support = support_over(p, basis.vars);
  DecisionPolynomial q = p.over(sorted_unique([&] {
    auto u = basis.vars;
    u.insert(u.end(), p.vars().begin(), p.vars().end());
    return u;
  }()));
  std::vector<int> idx;
  for (const auto& v : basis.vars) idx.push_back(q.index_of(v));
  std::map<Exponent, AffineExpr> coeffs;
  for (const auto& [e, c] : q.terms()) {
    Exponent r;
    for (int i : idx) r.push_back(e[i]);
    coeffs[r] += c;
  }
  (void)support;

  std::map<Exponent, std::vector<std::pair<int, int>>> pairs;
  const int N = basis.size();
  for (int a = 0; a < N; ++a)
    for (int b = a; b < N; ++b) pairs[add(basis.monomials[a], basis.monomials[b])].emplace_back(a, b);

  if (N > 0) frag.block = sdp.add_block(N);

  auto add_theta = [&](int row, const AffineExpr& c, double sign) {
    for (const auto& [k, v] : c.linear()) {
      if (k >= static_cast<int>(theta_column.size()) || theta_column[k] < 0)
        throw std::logic_error("decision variable without SDP column");
      sdp.add_free_coefficient(row, theta_column[k], sign * v);
    }
  };

  for (const auto& [mono, list] : pairs) {
    AffineExpr c;
    auto it = coeffs.find(mono);
    if (it != coeffs.end()) c = it->second;
    int row = sdp.add_constraint(c.constant());
    for (auto [a, b] : list) sdp.add_entry(row, frag.block, a, b, 1.0);
    add_theta(row, c, -1.0);
    frag.rows.push_back(row);
  }
  (void)nv;
  for (const auto& [mono, c] : coeffs) {
    if (pairs.count(mono)) continue;
    if (c.is_constant()) {
      if (c.constant() != 0.0) throw SosDegreeError(label, monomial_name(basis.vars, mono));
      continue;
    }
    // Unknown coefficient outside the basis span must vanish.
    int row = sdp.add_constraint(c.constant());
    add_theta(row, c, -1.0);
    frag.rows.push_back(row);
  }
  return frag;
}

namespace {

std::vector<std::string> multiplier_names(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back("~v" + std::to_string(i + 1));
  return v;
}

DecisionPolynomial scalarize(const DecisionPolyMatrix& S, const std::vector<std::string>& vnames) {
  DecisionPolynomial q;
  for (int i = 0; i < S.rows(); ++i)
    for (int j = 0; j < S.cols(); ++j) {
      if (S(i, j).is_zero()) continue;
      q += S(i, j) * lift(Polynomial::variable(vnames[i]) * Polynomial::variable(vnames[j]));
    }
  return q;
}

void check_symmetric(const DecisionPolyMatrix& S, const std::string& label) {
  if (S.rows() != S.cols()) throw DimensionError("constraint '" + label + "': matrix is not square");
  for (int i = 0; i < S.rows(); ++i)
    for (int j = i + 1; j < S.cols(); ++j)
      if (max_abs_difference(S(i, j), S(j, i)) > 1e-12)
        throw std::invalid_argument("constraint '" + label + "': matrix is not symmetric at (" + std::to_string(i) +
                                    "," + std::to_string(j) + ")");
}

MonomialBasis matrix_basis(const DecisionPolynomial& q, const std::vector<std::string>& xs,
                           const std::vector<std::string>& vs, int degree) {
  MonomialBasis b;
  std::vector<std::string> all = xs;
  all.insert(all.end(), vs.begin(), vs.end());
  b.vars = sorted_unique(all);
  const int n = static_cast<int>(b.vars.size());
  auto support = support_over(q, b.vars);
  if (support.empty()) return b;
  std::vector<int> xi, vi;
  for (const auto& x : xs) xi.push_back(static_cast<int>(std::lower_bound(b.vars.begin(), b.vars.end(), x) - b.vars.begin()));
  for (const auto& v : vs) vi.push_back(static_cast<int>(std::lower_bound(b.vars.begin(), b.vars.end(), v) - b.vars.begin()));
  int lo = INT32_MAX, hi = 0;
  for (const auto& e : support) {
    int d = 0;
    for (int i : xi) d += e[i];
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  int dlo = degree >= 0 ? 0 : (lo + 1) / 2;
  int dhi = degree >= 0 ? degree : hi / 2;
  auto xmon = monomials_up_to(static_cast<int>(xs.size()), dhi, dlo);
  std::vector<Exponent> cand;
  for (const auto& xm : xmon)
    for (int k = 0; k < static_cast<int>(vs.size()); ++k) {
      Exponent e(n, 0);
      for (std::size_t i = 0; i < xi.size(); ++i) e[xi[i]] = xm[i];
      e[vi[k]] = 1;
      cand.push_back(e);
    }
  b.monomials = prune_basis(cand, support, n);
  return b;
}

std::vector<std::string> matrix_indeterminates(const DecisionPolyMatrix& S) {
  std::vector<std::string> out;
  for (int i = 0; i < S.rows(); ++i)
    for (int j = 0; j < S.cols(); ++j)
      for (const auto& v : active_vars(S(i, j))) out.push_back(v);
  return sorted_unique(out);
}

}  // namespace

SosFragment compile_matrix(SdpProblem& sdp, const DecisionPolyMatrix& S, const std::vector<std::string>& indeterminates,
                           int degree, const std::vector<int>& theta_column, const std::string& label,
                           MatrixSense sense) {
  check_symmetric(S, label);
  auto vs = multiplier_names(S.rows());
  auto xs = indeterminates.empty() ? matrix_indeterminates(S) : sorted_unique(indeterminates);
  DecisionPolynomial q = scalarize(S, vs);
  if (sense == MatrixSense::NegativeSemidefinite) q = -q;
  MonomialBasis basis = matrix_basis(q, xs, vs, degree);
  return compile_scalar(sdp, q, basis, theta_column, label);
}

namespace {

std::vector<int> decisions_of(const DecisionPolynomial& p) {
  std::vector<int> out;
  for (const auto& [e, c] : p.terms())
    for (const auto& [k, v] : c.linear()) out.push_back(k);
  return out;
}

std::vector<int> identity_columns(int n) {
  std::vector<int> cols(n);
  for (int k = 0; k < n; ++k) cols[k] = k;
  return cols;
}

int max_decision(const DecisionPolynomial& p) {
  int m = -1;
  for (int k : decisions_of(p)) m = std::max(m, k);
  return m;
}

}  // namespace

CompiledSos compile_scalar(const DecisionPolynomial& p, int degree) {
  int nth = max_decision(p) + 1;
  CompiledSos out{SdpProblem(std::vector<int>{}, nth), {}, identity_columns(nth)};
  auto vars = active_vars(p);
  MonomialBasis basis = MonomialBasis::for_support(p, vars, degree);
  if (degree >= 0) {
    // Explicit degree: full total-degree basis, still pruned of forced zeros.
    MonomialBasis full = MonomialBasis::total_degree(vars, degree);
    full.monomials = prune_basis(full.monomials, support_over(p, full.vars), static_cast<int>(full.vars.size()));
    basis = full;
  }
  out.fragment = compile_scalar(out.sdp, p, basis, out.theta_column, "sos");
  return out;
}

CompiledSos compile_matrix(const DecisionPolyMatrix& S, MatrixSense sense, int degree) {
  int nth = 0;
  for (int i = 0; i < S.rows(); ++i)
    for (int j = 0; j < S.cols(); ++j) nth = std::max(nth, max_decision(S(i, j)) + 1);
  CompiledSos out{SdpProblem(std::vector<int>{}, nth), {}, identity_columns(nth)};
  out.fragment = compile_matrix(out.sdp, S, {}, degree, out.theta_column, "psd", sense);
  return out;
}

namespace {

SosStatus classify(const SdpSolution& s, double scale) {
  switch (s.status) {
    case SdpStatus::Feasible: return SosStatus::Feasible;
    case SdpStatus::Infeasible: return SosStatus::Infeasible;
    case SdpStatus::MaxIter:
      return (s.converged && s.slack >= marginal_threshold(scale) && s.primal_residual <= 1e-7) ? SosStatus::Marginal
                                                                                               : SosStatus::Failed;
  }
  return SosStatus::Failed;
}

}  // namespace

SosResult solve(const CompiledSos& c, const SdpOptions& opts) {
  SosResult res;
  SdpProblem sdp = c.sdp;
  if (sdp.num_blocks() == 0) sdp.add_block(1);
  res.sdp = convobs::solve(sdp, opts);
  res.theta = res.sdp.free;
  res.slack = res.sdp.slack;
  GramCertificate g;
  g.label = c.fragment.label;
  g.basis = c.fragment.basis;
  g.gram = c.fragment.block >= 0 ? res.sdp.blocks.at(c.fragment.block) : Eigen::MatrixXd(0, 0);
  g.subject = fix(c.fragment.subject, res.theta);
  double scale = g.gram.size() ? g.gram.norm() : 0.0;
  res.certificates.push_back(std::move(g));
  res.status = classify(res.sdp, scale);
  res.message = res.sdp.message;
  return res;
}

int SosProgram::new_decision(const std::string& name) {
  names_.push_back(name.empty() ? "theta" + std::to_string(names_.size()) : name);
  return static_cast<int>(names_.size()) - 1;
}

DecisionPolynomial SosProgram::new_polynomial(const std::vector<std::string>& vars, int max_degree, int min_degree,
                                              const std::string& name) {
  auto sorted = sorted_unique(vars);
  DecisionPolynomial p;
  for (const auto& e : monomials_up_to(static_cast<int>(sorted.size()), max_degree, min_degree)) {
    int k = new_decision(name + "[" + monomial_name(sorted, e) + "]");
    DecisionPolynomial::Terms t{{e, AffineExpr::decision(k)}};
    p += DecisionPolynomial(sorted, t);
  }
  return p;
}

DecisionPolyMatrix SosProgram::new_symmetric_matrix(int n, const std::string& name) {
  DecisionPolyMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      int k = new_decision(name + "(" + std::to_string(i) + "," + std::to_string(j) + ")");
      m(i, j) = DecisionPolynomial(AffineExpr::decision(k));
      m(j, i) = m(i, j);
    }
  return m;
}

void SosProgram::add_equality(const DecisionPolynomial& p, const std::string& label) { equalities_.emplace_back(label, p); }

void SosProgram::add_linear(const AffineExpr& e, const std::string& label) { linear_.emplace_back(label, e); }

void SosProgram::add_sos(const DecisionPolynomial& p, const std::string& label, int degree,
                         const std::vector<std::string>& indeterminates) {
  SosConstraint c;
  c.label = label;
  c.kind = SosKind::Scalar;
  c.subject = p;
  c.degree = degree;
  c.indeterminates = indeterminates;
  sos_.push_back(std::move(c));
}

void SosProgram::add_psd(const DecisionPolyMatrix& S, const std::string& label, int degree,
                         const std::vector<std::string>& indeterminates) {
  check_symmetric(S, label);
  SosConstraint c;
  c.label = label;
  c.kind = SosKind::Matrix;
  c.matrix = S;
  c.degree = degree;
  c.indeterminates = indeterminates;
  sos_.push_back(std::move(c));
}

SosProgram::Compiled SosProgram::compile() const {
  Compiled out;
  std::vector<bool> used(names_.size(), false);
  auto mark = [&](const DecisionPolynomial& p) {
    for (int k : decisions_of(p)) used.at(k) = true;
  };
  for (const auto& [l, p] : equalities_) mark(p);
  for (const auto& [l, e] : linear_)
    for (const auto& [k, v] : e.linear()) used.at(k) = true;
  for (const auto& c : sos_) {
    if (c.kind == SosKind::Scalar) {
      mark(c.subject);
    } else {
      for (int i = 0; i < c.matrix.rows(); ++i)
        for (int j = 0; j < c.matrix.cols(); ++j) mark(c.matrix(i, j));
    }
  }
  out.theta_column.assign(names_.size(), -1);
  int ncols = 0;
  for (std::size_t k = 0; k < names_.size(); ++k)
    if (used[k]) out.theta_column[k] = ncols++;
  out.sdp = SdpProblem(std::vector<int>{}, ncols);

  auto add_affine_row = [&](const AffineExpr& c) {
    int row = out.sdp.add_constraint(-c.constant());
    for (const auto& [k, v] : c.linear()) out.sdp.add_free_coefficient(row, out.theta_column[k], v);
  };
  for (const auto& [label, p] : equalities_)
    for (const auto& [e, c] : p.terms()) add_affine_row(c);
  for (const auto& [label, e] : linear_) add_affine_row(e);

  for (const auto& c : sos_) {
    if (c.kind == SosKind::Scalar) {
      auto vars = c.indeterminates.empty() ? active_vars(c.subject) : c.indeterminates;
      MonomialBasis basis = MonomialBasis::for_support(c.subject, vars, c.degree);
      out.fragments.push_back(compile_scalar(out.sdp, c.subject, basis, out.theta_column, c.label));
    } else {
      out.fragments.push_back(
          compile_matrix(out.sdp, c.matrix, c.indeterminates, c.degree, out.theta_column, c.label));
    }
  }
  if (out.sdp.num_blocks() == 0) out.sdp.add_block(1);
  return out;
}

SosResult SosProgram::solve(const SdpOptions& opts) const {
  Compiled comp = compile();
  SosResult res;
  res.sdp = convobs::solve(comp.sdp, opts);
  const auto& s = res.sdp;
  res.theta = Eigen::VectorXd::Zero(num_decisions());
  for (int k = 0; k < num_decisions(); ++k)
    if (comp.theta_column[k] >= 0 && s.free.size() > comp.theta_column[k]) res.theta(k) = s.free(comp.theta_column[k]);
  res.slack = s.slack;
  double scale = 0.0;
  for (const auto& f : comp.fragments) {
    GramCertificate g;
    g.label = f.label;
    g.basis = f.basis;
    g.gram = f.block >= 0 ? s.blocks.at(f.block) : Eigen::MatrixXd(0, 0);
    g.subject = fix(f.subject, res.theta);
    if (g.gram.size()) scale = std::max(scale, g.gram.norm());
    res.certificates.push_back(std::move(g));
  }
  res.status = classify(s, scale);
  res.message = s.message;
  return res;
}

}  // namespace convobs
