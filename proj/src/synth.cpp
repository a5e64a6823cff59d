#include "convobs/synth.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "convobs/linalg.hpp"

namespace convobs {

std::string to_string(SynthMode m) {
  switch (m) {
    case SynthMode::H3: return "h3";
    case SynthMode::H4: return "h4";
    case SynthMode::H3p: return "h3p";
    case SynthMode::H4p: return "h4p";
  }
  return "?";
}

SynthMode parse_mode(const std::string& s) {
  if (s == "h3") return SynthMode::H3;
  if (s == "h4") return SynthMode::H4;
  if (s == "h3p") return SynthMode::H3p;
  if (s == "h4p") return SynthMode::H4p;
  throw std::invalid_argument("unknown synthesis mode '" + s + "' (expected h3, h4, h3p or h4p)");
}

std::vector<double> SynthesisConfig::default_r_grid() {
  std::vector<double> g;
  for (int e = -4; e <= 4; ++e) g.push_back(std::ldexp(1.0, e));
  return g;
}

void SynthesisConfig::validate() const {
  if (phi_degree < 0 || fz_degree < 0 || metric_degree < 0) throw std::invalid_argument("degrees must be >= 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(k > 0.0)) throw std::invalid_argument("monotonicity margin k must be > 0");
  if (!(q_epsilon >= 0.0)) throw std::invalid_argument("q_epsilon must be >= 0");
  if (mode == SynthMode::H4 || mode == SynthMode::H4p) {
    if (r_grid.empty()) throw std::invalid_argument("r grid is empty");
    for (double r : r_grid)
      if (!(r > 0.0)) throw std::invalid_argument("r grid values must be positive");
  }
}

UncoverableMonomials::UncoverableMonomials(std::vector<std::string> monomials)
    : std::invalid_argument([&] {
        std::string s = "f_z basis too small; uncoverable monomials:";
        for (const auto& m : monomials) s += " " + m;
        return s;
      }()),
      monomials_(std::move(monomials)) {}

namespace {

std::vector<std::string> cat(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> v = a;
  v.insert(v.end(), b.begin(), b.end());
  return v;
}

DecisionPolyMatrix identity_times(int n, double s) {
  return lift(PolyMatrix::constant(MatrixXd::Identity(n, n) * s));
}

DecisionPolyMatrix apply_substitution(const DecisionPolyMatrix& S, const std::map<std::string, Polynomial>& subs) {
  if (subs.empty()) return S;
  DecisionPolyMatrix out = S;
  for (int i = 0; i < S.rows(); ++i)
    for (int j = 0; j < S.cols(); ++j)
      for (const auto& [var, q] : subs) out(i, j) = substitute(out(i, j), var, lift(q));
  return out;
}

DecisionPolyMatrix block2(const DecisionPolyMatrix& A, const DecisionPolyMatrix& B, const DecisionPolyMatrix& C,
                          const DecisionPolyMatrix& D) {
  const int n = A.rows(), m = D.rows();
  DecisionPolyMatrix out(n + m, n + m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = A(i, j);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out(i, n + j) = B(i, j);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out(n + i, j) = C(i, j);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out(n + i, n + j) = D(i, j);
  return out;
}

std::string monomial_label(const DecisionPolynomial& p, const Exponent& e) {
  return to_string(Polynomial::monomial(p.vars(), e));
}

PolyVector pruned(const PolyVector& v, double tol = 1e-13) {
  PolyVector out;
  for (const auto& p : v) out.push_back(p.pruned(tol).trimmed());
  return out;
}

}  // namespace

CorrectnessSystem build_correctness(SosProgram& prog, const SystemModel& m, const DecisionPolyVector& phi,
                                    int fz_degree, const std::vector<std::string>& w_names,
                                    const DecisionPolyVector& fw) {
  if (!m.is_polynomial()) throw std::invalid_argument("correctness system needs a polynomial model");
  if (fw.size() != w_names.size()) throw DimensionError("f_w length must match the augmentation names");
  CorrectnessSystem cs;
  std::vector<std::string> unc;
  DecisionPolyVector fx = lift(m.fx_poly()), fy = lift(m.fy_poly());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    DecisionPolynomial t;
    for (int j = 0; j < m.nx(); ++j) t += differentiate(phi[i], m.x_names()[j]) * fx[j];
    for (int j = 0; j < m.ny(); ++j) t += differentiate(phi[i], m.y_names()[j]) * fy[j];
    for (std::size_t j = 0; j < w_names.size(); ++j) t += differentiate(phi[i], w_names[j]) * fw[j];
    DecisionPolynomial::Terms keep;
    for (const auto& [e, c] : t.terms()) {
      if (detail::total_degree(e) <= fz_degree) {
        keep.emplace(e, c);
        continue;
      }
      std::string label = "f_z" + std::to_string(i + 1) + ":" + monomial_label(t, e);
      if (c.is_constant()) {
        unc.push_back(label);
      } else {
        prog.add_linear(c, label);
        cs.equalities.push_back(c);
        cs.labels.push_back(label);
      }
    }
    cs.fz.push_back(DecisionPolynomial(t.vars(), keep));
  }
  if (!unc.empty()) throw UncoverableMonomials(std::move(unc));
  return cs;
}

SynthesisResult synthesize_with(const SystemModel& m, const std::vector<std::string>& w_names,
                                const DecisionPolyVector& fw, const SynthesisConfig& cfg, SosProgram* external) {
  cfg.validate();
  if (!m.is_polynomial()) throw std::invalid_argument("synthesis needs a polynomial model");
  auto t0 = std::chrono::steady_clock::now();
  const bool h4 = cfg.mode == SynthMode::H4 || cfg.mode == SynthMode::H4p;
  const std::vector<std::string> xe = cat(m.x_names(), w_names);
  const int n = static_cast<int>(xe.size());
  const std::vector<double> rs = h4 ? cfg.r_grid : std::vector<double>{0.0};

  SynthesisResult res;
  res.lambda = cfg.lambda;
  for (double r : rs) {
    SosProgram local;
    SosProgram& prog = external ? *external : local;
    DecisionPolyMatrix P;
    DecisionPolyVector phi, varphi;
    if (!h4) {
      if (cfg.metric_degree == 0) {
        P = prog.new_symmetric_matrix(n, "P");
      } else {
        P = DecisionPolyMatrix(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = i; j < n; ++j) {
            P(i, j) = prog.new_polynomial(m.y_names(), cfg.metric_degree, 0,
                                          "P(" + std::to_string(i) + "," + std::to_string(j) + ")");
            P(j, i) = P(i, j);
          }
      }
      for (int i = 0; i < n; ++i) varphi.push_back(prog.new_polynomial(m.y_names(), cfg.phi_degree, 1, "varphi" + std::to_string(i + 1)));
      for (int i = 0; i < n; ++i) {
        DecisionPolynomial p = varphi[i];
        for (int j = 0; j < n; ++j) p += P(i, j) * lift(Polynomial::variable(xe[j]));
        phi.push_back(p);
      }
    } else {
      P = prog.new_symmetric_matrix(n, "P");
      for (int i = 0; i < n; ++i)
        phi.push_back(prog.new_polynomial(cat(xe, m.y_names()), cfg.phi_degree, 1, "phi" + std::to_string(i + 1)));
    }

    CorrectnessSystem cs = build_correctness(prog, m, phi, cfg.fz_degree, w_names, fw);
    DecisionPolyMatrix F = jacobian(cs.fz, xe);
    DecisionPolyMatrix Phx = jacobian(phi, xe);

    prog.add_psd(apply_substitution(Phx + Phx.transpose() - identity_times(n, cfg.k), cfg.domain_substitution), "H1");
    if (!h4) {
      DecisionPolyMatrix Q = cfg.lambda > 0.0 ? P * 2.0 * cfg.lambda : identity_times(n, cfg.q_epsilon);
      DecisionPolyMatrix S = F + F.transpose() + Q;
      if (cfg.metric_degree > 0) {
        // d/dt P(y) along the plant
        DecisionPolyVector fy = lift(m.fy_poly());
        DecisionPolyMatrix Pdot(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int l = 0; l < m.ny(); ++l) Pdot(i, j) += differentiate(P(i, j), m.y_names()[l]) * fy[l];
        S = S + Pdot;
      }
      prog.add_nsd(apply_substitution(S, cfg.domain_substitution), "H3");
    } else {
      DecisionPolyMatrix Q = identity_times(n, cfg.q_epsilon);
      DecisionPolyMatrix A = Phx - F * (0.5 * r);
      DecisionPolyMatrix B = Phx + F * (0.5 * r);
      DecisionPolyMatrix top = A + A.transpose() - P - Q * r;
      // Schur complement top - B' P^-1 B, which is what implies the contraction inequality
      prog.add_psd(apply_substitution(block2(top, B.transpose(), B, P), cfg.domain_substitution), "H4");
      prog.add_psd(P - identity_times(n, cfg.q_epsilon), "metric");
    }

    res.sos = prog.solve(cfg.sdp);
    res.status = res.sos.status;
    res.message = res.sos.message;
    if (h4) res.r = r;
    if (!res.accepted()) {
      if (external) break;
      continue;
    }

    const VectorXd& th = res.sos.theta;
    PolyVector fz = pruned(fix(cs.fz, th));
    ObserverSpec spec;
    if (!h4 && cfg.metric_degree == 0) {
      MatrixXd Pv = fix(P, th).evaluate({});
      Pv = sym(Pv);
      spec = make_affine_spec(m.name() + "-synth", Pv, pruned(fix(varphi, th)), fz, xe, m.y_names(), m.u_names(),
                              m.nx(), cfg.lambda, cfg.k);
    } else {
      MatrixXd metric = h4 ? MatrixXd(sym(fix(P, th).evaluate({})).inverse()) : MatrixXd();
      spec = make_polynomial_spec(m.name() + "-synth", pruned(fix(phi, th)), fz, xe, m.y_names(), m.u_names(), m.nx(),
                                  metric, h4 ? 0.0 : cfg.lambda, cfg.k);
      if (h4) {
        spec.P_metric = sym(fix(P, th).evaluate({}));
        spec.r = r;
      }
    }
    spec.mode = to_string(cfg.mode);
    spec.theta = th;
    spec.Q = h4 || cfg.lambda == 0.0 ? MatrixXd(MatrixXd::Identity(n, n) * cfg.q_epsilon) : MatrixXd();
    res.spec = std::move(spec);
    break;
  }

  if (!res.accepted()) {
    std::ostringstream os;
    os << to_string(res.status) << " at lambda=" << cfg.lambda;
    if (res.status == SosStatus::Infeasible)
      os << "; Farkas certificate value " << res.sos.sdp.certificate_value << ", residual "
         << res.sos.sdp.certificate_residual;
    res.message = os.str();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

SynthesisResult synthesize(const SystemModel& m, const SynthesisConfig& cfg) {
  SynthesisResult res = synthesize_with(m, {}, {}, cfg);
  if (!res.accepted() && cfg.lambda > 0.0 && cfg.bisect_steps > 0) {
    SynthesisConfig c = cfg;
    c.bisect_steps = 0;
    res.largest_feasible_lambda = bisect_lambda(m, c, 0.0, cfg.lambda, cfg.bisect_steps);
    if (res.largest_feasible_lambda)
      res.message += "; largest feasible lambda found " + std::to_string(*res.largest_feasible_lambda);
    else
      res.message += "; infeasible for every lambda >= 0 tried";
  }
  return res;
}

std::optional<double> bisect_lambda(const SystemModel& m, SynthesisConfig cfg, double lo, double hi, int steps,
                                    SynthesisResult* best) {
  cfg.bisect_steps = 0;
  auto attempt = [&](double lam) {
    cfg.lambda = lam;
    return synthesize_with(m, {}, {}, cfg);
  };
  SynthesisResult top = attempt(hi);
  if (top.accepted()) {
    if (best) *best = std::move(top);
    return hi;
  }
  SynthesisResult bottom = attempt(lo);
  if (!bottom.accepted()) return std::nullopt;
  if (best) *best = std::move(bottom);
  for (int i = 0; i < steps; ++i) {
    double mid = 0.5 * (lo + hi);
    SynthesisResult r = attempt(mid);
    if (r.accepted()) {
      lo = mid;
      if (best) *best = std::move(r);
    } else {
      hi = mid;
    }
  }
  return lo;
}

SynthesisResult synthesize_immersed(const AugmentedModel& am, const SynthesisConfig& cfg) {
  if (am.nw == 0) return synthesize(*am.base, cfg);
  if (!am.fw_poly) throw std::invalid_argument("immersed synthesis needs a polynomial f_w");
  SynthesisConfig c = cfg;
  if (c.mode == SynthMode::H3) c.mode = SynthMode::H3p;
  if (c.mode == SynthMode::H4) c.mode = SynthMode::H4p;
  return synthesize_with(*am.base, am.w_names, lift(*am.fw_poly), c);
}

SdoTransform sdo_transform(const SystemModel& m, double ell, const VectorXd& Lambda) {
  if (!m.is_polynomial()) throw std::invalid_argument("SDO transform needs a polynomial model");
  if (m.ny() != 1) throw std::invalid_argument("SDO transform needs a single output");
  const int nx = m.nx();
  if (Lambda.size() != nx) throw DimensionError("Lambda must have n_x entries");
  if (!(ell > 0.0)) throw std::invalid_argument("gain l must be positive");
  SdoTransform t;
  t.Q = MatrixXd::Zero(nx, nx);
  for (int i = 0; i < nx; ++i) {
    t.Q(i, 0) = -Lambda(i);
    if (i + 1 < nx) t.Q(i, i + 1) = 1.0;
  }
  Eigen::EigenSolver<MatrixXd> es(t.Q);
  for (int i = 0; i < nx; ++i)
    if (es.eigenvalues()(i).real() >= 0.0)
      throw NotHurwitz("Lambda polynomial has a root with real part " + std::to_string(es.eigenvalues()(i).real()));

  PolyVector field = m.fx_poly();
  field.insert(field.end(), m.fy_poly().begin(), m.fy_poly().end());
  std::vector<std::string> state = cat(m.x_names(), m.y_names());
  Polynomial h = m.fy_poly()[0];
  Polynomial y = Polynomial::variable(m.y_names()[0]);
  for (int i = 0; i < nx; ++i) {
    t.lie_chain.push_back(h);
    t.phi_poly.push_back(h - y * (ell * Lambda(i)));
    h = lie_derivative(h, field, state);
  }
  for (const auto& p : t.phi_poly) t.fz.push_back(lie_derivative(p, field, state));
  t.b.assign(nx, Polynomial());
  t.b[nx - 1] = h;
  t.phi = Transformation::polynomial(t.phi_poly, m.x_names(), m.y_names());
  return t;
}

}  // namespace convobs
