#include "convobs/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/ellint_2.hpp>

#include "convobs/linalg.hpp"

namespace convobs {

namespace {

Polynomial P(const std::string& s) { return parse_polynomial(s); }

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<int>(v.size()));
  int i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

void take(const ParamMap& in, const std::string& key, double& out) {
  auto it = in.find(key);
  if (it != in.end()) out = it->second;
}

void reject_unknown(const ParamMap& in, std::initializer_list<const char*> known, const std::string& who) {
  for (const auto& [k, v] : in) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw std::invalid_argument("unknown parameter '" + k + "' for benchmark " + who);
  }
}

void unbox(SystemModel& m) {
  const double inf = std::numeric_limits<double>::infinity();
  m.set_box(VectorXd::Constant(m.nchi(), -inf), VectorXd::Constant(m.nchi(), inf));
}

SimConfig run_at(const SimConfig& base, const VectorXd& x0, const VectorXd& y0, const VectorXd& w0 = VectorXd()) {
  SimConfig c = base;
  c.x0 = x0;
  c.y0 = y0;
  c.w0 = w0;
  c.noise = {};
  return c;
}

}  // namespace

// Benchmark ------------------------------------------------------------------

SimConfig Benchmark::matched(const SimConfig& cfg) const {
  SimConfig c = cfg;
  VectorXd w0 = cfg.w0.size() ? cfg.w0 : VectorXd::Zero(reference.nw);
  VectorXd xe(cfg.x0.size() + w0.size());
  xe << cfg.x0, w0;
  c.xi0 = reference.phi(xe, cfg.y0);
  return c;
}

Trajectory Benchmark::simulate(const SimConfig& cfg) const {
  if (augmented) return convobs::simulate(*augmented, reference, cfg);
  return convobs::simulate(*model, reference, cfg);
}

Region Benchmark::region(int n) const {
  if (!augmented) return box_region(*model, reference.nw, region_lo, region_hi, n);
  std::vector<Trajectory> trs;
  std::size_t total = 0;
  for (const auto& r : runs) {
    trs.push_back(simulate(matched(r)));
    total += trs.back().size();
  }
  const int stride = std::max<int>(1, static_cast<int>(total / std::max(n, 1)));
  Region out;
  for (const auto& tr : trs) {
    Region part = trajectory_region(tr, stride);
    out.insert(out.end(), part.begin(), part.end());
  }
  if (static_cast<int>(out.size()) > n) out.resize(n);
  return out;
}

std::vector<std::string> benchmark_names() { return {"poly19", "maglev", "cartpend", "reactor"}; }

// Polynomial example ---------------------------------------------------------

SystemModel poly19_model() {
  return SystemModel::polynomial("poly19", {"x1", "x2"}, {"y"}, {},
                                 {P("x1 - 0.3333333333333333*x1^3 - x1*x2^2"),
                                  P("x1 - x2 - 0.3333333333333333*x2^3 - x2*x1^2")},
                                 {P("x1")});
}

ObserverSpec poly19_reference_spec() {
  SystemModel m = poly19_model();
  MatrixXd Pm = MatrixXd::Zero(2, 2);
  Pm.diagonal() << 0.6370, 0.6369;
  PolyVector fz = {m.fx_poly()[0] * 0.6370 + P("-2.1872*x1"), m.fx_poly()[1] * 0.6369 + P("-0.6368*x1")};
  ObserverSpec s = make_affine_spec("poly19-reference", Pm, {P("-2.1872*y"), P("-0.6368*y")}, fz, {"x1", "x2"},
                                    {"y"}, {}, 2, 1.0, 0.1);
  s.mode = "h3";
  return s;
}

// MagLev ---------------------------------------------------------------------

MaglevParams MaglevParams::from(const ParamMap& p) {
  reject_unknown(p, {"m", "R", "k", "c", "g", "ell"}, "maglev");
  MaglevParams q;
  take(p, "m", q.m);
  take(p, "R", q.R);
  take(p, "k", q.k);
  take(p, "c", q.c);
  take(p, "g", q.g);
  take(p, "ell", q.ell);
  if (!(q.m > 0 && q.R > 0 && q.k > 0 && q.c > 0 && q.g > 0 && q.ell > 0))
    throw std::invalid_argument("maglev parameters must be positive");
  return q;
}

ParamMap MaglevParams::to_map() const { return {{"m", m}, {"R", R}, {"k", k}, {"c", c}, {"g", g}, {"ell", ell}}; }

SystemModel maglev_model(const MaglevParams& p) {
  Polynomial lam = Polynomial::variable("lam"), mom = Polynomial::variable("p"), q = Polynomial::variable("q"),
             u = Polynomial::variable("u");
  PolyVector fx = {(q - p.c) * lam * (p.R / p.k) + u, lam * lam * (1.0 / (2.0 * p.k)) - p.m * p.g};
  PolyVector fy = {mom * (1.0 / p.m)};
  SystemModel m = SystemModel::polynomial("maglev", {"lam", "p"}, {"q"}, {"u"}, fx, fy);
  const double c = p.c;
  m.add_constraint({"q < c", [c](const VectorXd& chi) { return c - chi(2); }});
  m.parameters = p.to_map();
  return m;
}

ObserverSpec maglev_reference_spec(const MaglevParams& p) {
  SystemModel m = maglev_model(p);
  Polynomial mom = Polynomial::variable("p");
  PolyVector fz = {m.fx_poly()[0], m.fx_poly()[1] - mom * (p.ell / p.m)};
  ObserverSpec s = make_affine_spec("maglev-reference", MatrixXd::Identity(2, 2),
                                    {Polynomial(), Polynomial::variable("q") * (-p.ell)}, fz, {"lam", "p"}, {"q"},
                                    {"u"}, 2, 0.0, 1.0);
  s.metric = MatrixXd::Identity(2, 2);
  s.metric(0, 0) = 1e4;
  s.mode = "a2";
  s.params = p.to_map();
  return s;
}

SystemModel maglev_flux_model(const MaglevParams& p) {
  Polynomial lam = Polynomial::variable("lam"), q = Polynomial::variable("q"), u = Polynomial::variable("u"),
             mom = Polynomial::variable("p");
  SystemModel m = SystemModel::polynomial("maglev-flux", {"lam"}, {"q"}, {"u", "p"},
                                          {(q - p.c) * lam * (p.R / p.k) + u}, {mom * (1.0 / p.m)});
  const double c = p.c;
  m.add_constraint({"q < c", [c](const VectorXd& chi) { return c - chi(1); }});
  m.parameters = p.to_map();
  return m;
}

// Cart-pendulum --------------------------------------------------------------

CartpendParams CartpendParams::from(const ParamMap& p) {
  reject_unknown(p, {"m", "a", "b", "lambda"}, "cartpend");
  CartpendParams q;
  take(p, "m", q.m);
  take(p, "a", q.a);
  take(p, "b", q.b);
  take(p, "lambda", q.lambda);
  if (!(q.m > 0 && q.lambda > 0)) throw std::invalid_argument("cartpend needs m > 0 and lambda > 0");
  if (!(q.b * q.b < q.m)) throw std::invalid_argument("cartpend needs b^2 < m");
  return q;
}

ParamMap CartpendParams::to_map() const { return {{"m", m}, {"a", a}, {"b", b}, {"lambda", lambda}}; }

namespace {

struct PsiParts {
  double D, psi11, psi21, psi22, d11, d21;
};

PsiParts psi_parts(double q1, const CartpendParams& p) {
  const double c = std::cos(q1), s = std::sin(q1), sm = std::sqrt(p.m);
  PsiParts r;
  r.D = p.m - p.b * p.b * c * c;
  const double sD = std::sqrt(r.D), D32 = r.D * sD;
  r.psi11 = sm / sD;
  r.psi21 = -p.b * c / (sm * sD);
  r.psi22 = 1.0 / sm;
  r.d11 = -sm * p.b * p.b * c * s / D32;
  r.d21 = p.b * s * sm / D32;
  return r;
}

}  // namespace

MatrixXd cartpend_Psi(const VectorXd& q, const CartpendParams& p) {
  PsiParts r = psi_parts(q(0), p);
  MatrixXd Psi(2, 2);
  Psi << r.psi11, 0.0, r.psi21, r.psi22;
  return Psi;
}

VectorXd cartpend_varphi(const VectorXd& q, const CartpendParams& p) {
  // int_0^y sqrt(1 - k^2 cos^2 s) ds = E(k, pi/2) - E(k, pi/2 - y)
  const double k = p.b / std::sqrt(p.m), half = std::numbers::pi / 2;
  const double I = boost::math::ellint_2(k, half) - boost::math::ellint_2(k, half - q(0));
  return vec({-p.lambda * I, -p.lambda * (p.b / std::sqrt(p.m) * std::sin(q(0)) + std::sqrt(p.m) * q(1))});
}

MatrixXd cartpend_dvarphi(const VectorXd& q, const CartpendParams& p) {
  const double c = std::cos(q(0));
  MatrixXd J(2, 2);
  J << std::sqrt(1.0 - p.b * p.b / p.m * c * c), 0.0, p.b / std::sqrt(p.m) * c, std::sqrt(p.m);
  return -p.lambda * J;
}

SystemModel cartpend_model(const CartpendParams& p) {
  auto g = [p](const VectorXd& y, const VectorXd& u) { return vec({-p.a * std::sin(y(0)), -u(0)}); };
  auto fx = [p, g](const VectorXd&, const VectorXd& y, const VectorXd& u) {
    return VectorXd(cartpend_Psi(y, p).transpose() * g(y, u));
  };
  auto fy = [p](const VectorXd& x, const VectorXd& y, const VectorXd&) { return VectorXd(cartpend_Psi(y, p) * x); };
  auto jac = [p, g](const VectorXd& x, const VectorXd& y, const VectorXd& u) {
    PsiParts r = psi_parts(y(0), p);
    VectorXd gv = g(y, u);
    Jacobians J;
    J.fx_x = MatrixXd::Zero(2, 2);
    J.fx_y = MatrixXd::Zero(2, 2);
    J.fx_y(0, 0) = r.d11 * gv(0) - r.psi11 * p.a * std::cos(y(0)) + r.d21 * gv(1);
    J.fy_x = cartpend_Psi(y, p);
    J.fy_y = MatrixXd::Zero(2, 2);
    J.fy_y(0, 0) = r.d11 * x(0);
    J.fy_y(1, 0) = r.d21 * x(0);
    return J;
  };
  VectorXd lo = vec({-2, -2, -std::numbers::pi, -3}), hi = vec({2, 2, std::numbers::pi, 3});
  SystemModel m = SystemModel::closed_form("cartpend", 2, 2, 1, fx, fy, jac, {}, std::make_pair(lo, hi));
  unbox(m);
  m.parameters = p.to_map();
  m.input_class = "sinusoid";
  return m;
}

ObserverSpec cartpend_reference_spec(const CartpendParams& p) {
  auto model = std::make_shared<SystemModel>(cartpend_model(p));
  ObserverSpec s;
  s.name = "cartpend-reference";
  s.nx = 2;
  s.ny = 2;
  s.nu = 1;
  s.x_names = model->x_names();
  s.y_names = model->y_names();
  s.u_names = model->u_names();
  s.phi = Transformation::affine(
      MatrixXd::Identity(2, 2), [p](const VectorXd& y) { return cartpend_varphi(y, p); },
      [p](const VectorXd& y) { return cartpend_dvarphi(y, p); });
  const double lam = p.lambda;
  s.fz = [model, lam](const VectorXd& xe, const VectorXd& y, const VectorXd& u) {
    return VectorXd(-lam * xe + model->fx(xe, y, u));
  };
  s.fz_xe = [lam](const VectorXd&, const VectorXd&, const VectorXd&) {
    return MatrixXd(-lam * MatrixXd::Identity(2, 2));
  };
  s.metric = MatrixXd::Identity(2, 2);
  s.lambda = lam;
  s.k = 1.0;
  s.strategy = LeftInverse::AffineClosedForm;
  s.mode = "h3";
  s.builtin = "cartpend";
  s.params = p.to_map();
  return s;
}

CheckReport cartpend_pde_check(const CartpendParams& p, double lambda_checked, int n) {
  std::vector<VectorXd> grid;
  for (int i = 0; i < n; ++i) grid.push_back(vec({-std::numbers::pi + 2.0 * std::numbers::pi * i / (n - 1), 0.3}));
  return check_pde([p](const VectorXd& y) { return cartpend_dvarphi(y, p); },
                   [p](const VectorXd& y) { return cartpend_Psi(y, p); }, lambda_checked, grid);
}

// Reactor --------------------------------------------------------------------

SystemModel reactor_model() {
  auto mu = [](double x) { return x * (1.0 - x); };
  auto fx = [mu](const VectorXd& x, const VectorXd& y, const VectorXd&) { return scalar(-mu(x(0)) * y(0)); };
  auto fy = [mu](const VectorXd& x, const VectorXd& y, const VectorXd&) { return scalar(mu(x(0)) * y(0)); };
  auto jac = [mu](const VectorXd& x, const VectorXd& y, const VectorXd&) {
    const double dmu = 1.0 - 2.0 * x(0);
    Jacobians J;
    J.fx_x = MatrixXd::Constant(1, 1, -dmu * y(0));
    J.fx_y = MatrixXd::Constant(1, 1, -mu(x(0)));
    J.fy_x = MatrixXd::Constant(1, 1, dmu * y(0));
    J.fy_y = MatrixXd::Constant(1, 1, mu(x(0)));
    return J;
  };
  std::vector<DomainConstraint> dom = {{"x > 0", [](const VectorXd& chi) { return chi(0); }},
                                       {"y > 0", [](const VectorXd& chi) { return chi(1); }}};
  SystemModel m = SystemModel::closed_form("reactor", 1, 1, 0, fx, fy, jac, dom,
                                           std::make_pair(vec({0.01, 0.01}), vec({1.0, 1.0})));
  unbox(m);
  m.parameters = {{"r", 1.0}, {"c", 1.0}, {"k", 1.0}};
  return m;
}

namespace {

VectorXd reactor_fa(double y) { return vec({std::log(y), 2.0 * y + 1.0, y + y * y}); }

double reactor_discriminant(const VectorXd& w, double y) {
  double D = w(1) * w(1) - 4.0 * (w(2) - w(0) + std::log(y));
  if (D < 0.0) {
    if (D < -1e-9) throw std::domain_error("reactor observer: negative discriminant " + std::to_string(D));
    D = 0.0;
  }
  return D;
}

VectorXd reactor_droot(const VectorXd& w, double y) {
  const double sD = std::sqrt(reactor_discriminant(w, y));
  return vec({-1.0 / sD, 0.5 - 0.5 * w(1) / sD, 1.0 / sD});
}

}  // namespace

AugmentedModel reactor_augmentation(std::shared_ptr<const SystemModel> base) {
  auto fw = [](const VectorXd&, const VectorXd& w, const VectorXd& y, const VectorXd&) {
    return VectorXd(-w + reactor_fa(y(0)));
  };
  auto fw_w = [](const VectorXd&, const VectorXd&, const VectorXd&, const VectorXd&) {
    return MatrixXd(-MatrixXd::Identity(3, 3));
  };
  return augment(std::move(base), {"w1", "w2", "w3"}, fw, fw_w, MatrixXd::Identity(3, 3), 1.0,
                 std::make_pair(vec({0.01, 0.01}), vec({1.0, 1.0})), 5.0, 100);
}

double reactor_root(const VectorXd& w, double y) { return 0.5 * w(1) - 0.5 * std::sqrt(reactor_discriminant(w, y)); }

double reactor_quadratic(double x, const VectorXd& w, double y) {
  const double z = x + y;
  return z * z - w(1) * z + w(2) - w(0) + std::log(y);
}

VectorXd reactor_consistent_w0(double x0, double y0) {
  if (!(x0 > 0.0 && x0 < 0.5 && y0 > 0.0))
    throw std::invalid_argument("consistent reactor augmentation needs 0 < x0 < 0.5 and y0 > 0");
  const double s = x0 + y0, w2 = 2.0 * y0 + 1.0, w3 = y0 + y0 * y0;
  return vec({s * s - w2 * s + w3 + std::log(y0), w2, w3});
}

VectorXd reactor_identity_w0(double x0, double y0) {
  const double s = x0 + y0;
  return vec({s * s + std::log(y0), 0.0, 0.0});
}

ObserverSpec reactor_reference_spec(double lambda, double rho) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw std::invalid_argument("reactor lambda must lie in [0, 1)");
  if (!(rho > 0.0)) throw std::invalid_argument("reactor rho must be positive");
  ObserverSpec s;
  s.name = "reactor-reference";
  s.nx = 1;
  s.nw = 3;
  s.ny = 1;
  s.nu = 0;
  s.x_names = {"x1"};
  s.w_names = {"w1", "w2", "w3"};
  s.y_names = {"y1"};
  MatrixXd Pe = MatrixXd::Identity(4, 4) * rho;
  Pe(0, 0) = 1.0;
  s.phi = Transformation::affine(
      Pe, [](const VectorXd& y) { return vec({y(0), 0.0, 0.0, 0.0}); },
      [](const VectorXd&) {
        MatrixXd d = MatrixXd::Zero(4, 1);
        d(0, 0) = 1.0;
        return d;
      });
  s.fz = [rho](const VectorXd& xe, const VectorXd& y, const VectorXd&) {
    VectorXd w = xe.tail(3);
    VectorXd f(4);
    f(0) = -(xe(0) + y(0)) + reactor_root(w, y(0));
    f.tail(3) = rho * (-w + reactor_fa(y(0)));
    return f;
  };
  s.fz_xe = [rho](const VectorXd& xe, const VectorXd& y, const VectorXd&) {
    MatrixXd F = MatrixXd::Zero(4, 4);
    F(0, 0) = -1.0;
    F.block(0, 1, 1, 3) = reactor_droot(xe.tail(3), y(0)).transpose();
    F.block(1, 1, 3, 3) = -rho * MatrixXd::Identity(3, 3);
    return F;
  };
  s.metric = Pe.inverse();
  s.lambda = lambda;
  s.k = 1.0;
  s.strategy = LeftInverse::AffineClosedForm;
  s.mode = "h3p";
  s.builtin = "reactor";
  s.params = {{"lambda", lambda}, {"rho", rho}};
  return s;
}

double reactor_required_rho(const Region& states, double lambda, double slack) {
  if (!(lambda < 1.0)) throw std::invalid_argument("lambda must be below 1");
  double worst = 0.0;
  for (const auto& p : states) worst = std::max(worst, reactor_droot(p.xe.tail(3), p.y(0)).squaredNorm());
  return slack * worst / (4.0 * (1.0 - lambda) * (1.0 - lambda));
}

ObserverDynamics reactor_w_first_observer() {
  ObserverDynamics d;
  d.dim = 4;
  d.rhs = [](const VectorXd& xi, const VectorXd& y, const VectorXd&) {
    VectorXd f(4);
    f.head(3) = -xi.head(3) + reactor_fa(y(0));
    f(3) = -xi(3) + reactor_root(xi.head(3), y(0));
    return f;
  };
  d.estimate = [](const VectorXd& xi, const VectorXd& y) { return scalar(xi(3) - y(0)); };
  return d;
}

// High-gain baseline ---------------------------------------------------------

void HgoParams::validate() const {
  if (!(ell > 0 && xi1_bar > 0 && xi2_star > 0)) throw std::invalid_argument("HGO gains must be positive");
  if (!(m < M)) throw std::invalid_argument("HGO saturation needs m < M");
}

std::string to_string(HgoBranch b) {
  switch (b) {
    case HgoBranch::Clamped: return "clamped";
    case HgoBranch::Cubic: return "cubic";
    case HgoBranch::Ratio: return "ratio";
  }
  return "?";
}

VectorXd hgo_reactor_xi0(double y0) {
  if (!(y0 > 0.0)) throw std::invalid_argument("HGO start needs y > 0");
  return vec({std::log(y0), 0.0, 0.0});
}

HgoOutput hgo_reactor_rhs(const VectorXd& xi, double y, const HgoParams& p) {
  if (xi.size() != 3) throw DimensionError("HGO state has three components");
  const double x1 = xi(0), x2 = xi(1), x3 = xi(2);
  HgoOutput out;
  const double r = x2 / p.xi2_star;
  if (x2 > p.xi2_star && x3 < -x2) {
    out.branch = HgoBranch::Clamped;
    out.phi_tilde = -1.0;
  } else if (x2 > 0.0 && x2 <= p.xi2_star && x3 < x2 * (r * r - 3.0 * r + 1.0)) {
    out.branch = HgoBranch::Cubic;
    out.phi_tilde = r * r - 3.0 * r + 1.0;
  } else {
    out.branch = HgoBranch::Ratio;
    const double den = std::abs(x2) < 1e-12 ? std::copysign(1e-12, x2) : x2;
    out.phi_tilde = x3 / den;
  }
  const double ey = x1 - std::log(y), l = p.ell;
  const double e1 = std::exp(x1);
  const double drift3 = std::clamp(e1 * (2.0 * x2 * x2 - x3 * out.phi_tilde), p.m, p.M);
  const double ind = x1 <= std::log(p.xi1_bar) ? 1.0 : 0.0;
  out.dxi = vec({x2 - 3.0 * l * ey, -x3 * std::min(e1, p.xi1_bar) - 3.0 * l * l * ey,
                 drift3 + (3.0 * l * x3 * ind + l * l * l * std::max(std::exp(-x1), 1.0 / p.xi1_bar)) * ey});
  out.xhat = vec({e1, 0.5 * (1.0 - out.phi_tilde)});
  return out;
}

ObserverDynamics hgo_reactor_dynamics(const HgoParams& p) {
  p.validate();
  ObserverDynamics d;
  d.dim = 3;
  d.rhs = [p](const VectorXd& xi, const VectorXd& y, const VectorXd&) { return hgo_reactor_rhs(xi, y(0), p).dxi; };
  d.estimate = [p](const VectorXd& xi, const VectorXd& y) { return scalar(hgo_reactor_rhs(xi, y(0), p).xhat(1)); };
  return d;
}

// Factory --------------------------------------------------------------------

Benchmark benchmark(const std::string& name, const ParamMap& params) {
  Benchmark b;
  b.name = name;
  b.params = params;
  SimConfig base;
  base.h = 1e-3;
  if (name == "poly19") {
    reject_unknown(params, {}, name);
    b.model = std::make_shared<SystemModel>(poly19_model());
    b.reference = poly19_reference_spec();
    base.T = 10.0;
    base.x0 = vec({3.0, 5.0});
    base.y0 = scalar(-4.0);
    base.xi0 = vec({0.0, 0.0});
    base.noise = {0.02, 1e-3};
    b.region_lo = vec({-6, -6, -6});
    b.region_hi = vec({6, 6, 6});
    for (int i = 1; i <= 10; ++i) {
      VectorXd hv = halton(i, 3).array() * 10.0 - 5.0;
      b.runs.push_back(run_at(base, hv.head(2), hv.tail(1)));
    }
    b.expected = {{"final_error", 0.05}, {"rms_error", 0.1}, {"transient", 5.0}};
  } else if (name == "maglev") {
    MaglevParams p = MaglevParams::from(params);
    b.model = std::make_shared<SystemModel>(maglev_model(p));
    b.reference = maglev_reference_spec(p);
    base.T = 3.0;
    base.x0 = vec({0.0, 0.0});  // flux, momentum
    base.y0 = scalar(0.003);
    base.xi0 = vec({0.0, 0.0});
    base.input = InputSignal::zero(1);
    b.region_lo = vec({-2, -1, -0.05});
    b.region_hi = vec({2, 1, p.c - 1e-4});
    for (int i = 1; i <= 10; ++i) {
      VectorXd hv = halton(i, 3);
      b.runs.push_back(run_at(base, vec({hv(0), 0.05 * hv(1) - 0.05}), scalar(-0.01 + 0.014 * hv(2))));
      b.runs.back().T = 1.0;
    }
    b.expected = {{"rate_tolerance", 0.05}};
  } else if (name == "cartpend") {
    CartpendParams p = CartpendParams::from(params);
    b.model = std::make_shared<SystemModel>(cartpend_model(p));
    b.reference = cartpend_reference_spec(p);
    base.T = 10.0;
    base.x0 = vec({0.4, 0.3});
    base.y0 = vec({std::numbers::pi / 2 - 0.1, -0.1});
    base.xi0 = vec({0.0, 0.0});
    base.input = InputSignal::sinusoid(scalar(0.2), 1.0);
    b.region_lo = vec({-2, -2, -std::numbers::pi, -3});
    b.region_hi = vec({2, 2, std::numbers::pi, 3});
    for (int i = 1; i <= 10; ++i) {
      VectorXd hv = halton(i, 4).array() * 2.0 - 1.0;
      b.runs.push_back(run_at(base, hv.head(2), vec({std::numbers::pi * hv(2), hv(3)})));
    }
    b.expected = {{"rate_tolerance", 0.1}};
  } else if (name == "reactor") {
    reject_unknown(params, {"lambda", "rho"}, name);
    double lambda = 0.5;
    take(params, "lambda", lambda);
    b.model = std::make_shared<SystemModel>(reactor_model());
    b.augmented = reactor_augmentation(b.model);
    base.T = 20.0;
    base.x0 = scalar(0.4);
    base.y0 = scalar(0.2);
    base.w0 = reactor_consistent_w0(0.4, 0.2);
    base.xi0 = vec({0.5, 0.0, 0.0, 0.0});
    const double ics[10][2] = {{0.1, 0.2}, {0.2, 0.2},  {0.3, 0.2},  {0.4, 0.2}, {0.1, 0.3},
                               {0.2, 0.3}, {0.3, 0.3}, {0.35, 0.25}, {0.15, 0.4}, {0.4, 0.4}};
    for (const auto& ic : ics)
      b.runs.push_back(run_at(base, scalar(ic[0]), scalar(ic[1]), reactor_consistent_w0(ic[0], ic[1])));
    double rho = 0.0;
    take(params, "rho", rho);
    if (rho <= 0.0) {
      // Size the w weight from the states the runs visit.
      Region states;
      for (const auto& r : b.runs) {
        SimConfig c = r;
        c.xi0 = vec({0.0, 0.0, 0.0, c.x0(0) + c.y0(0)});
        c.record_stride = 50;
        Region part = trajectory_region(convobs::simulate(PlantDynamics::of(*b.augmented), reactor_w_first_observer(), c));
        states.insert(states.end(), part.begin(), part.end());
      }
      rho = std::ceil(reactor_required_rho(states, lambda));
    }
    b.reference = reactor_reference_spec(lambda, rho);
    b.params["lambda"] = lambda;
    b.params["rho"] = rho;
    b.expected = {{"final_error", 1e-3}, {"identity", 1e-6}};
  } else {
    throw std::invalid_argument("unknown benchmark '" + name + "'");
  }
  b.sim = base;
  return b;
}

}  // namespace convobs
