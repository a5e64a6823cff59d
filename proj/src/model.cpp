#include "convobs/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "convobs/linalg.hpp"

namespace convobs {

namespace {

std::string format_point(const VectorXd& v) {
  std::ostringstream os;
  os.precision(6);
  os << "(";
  for (int i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i);
  os << ")";
  return os.str();
}

std::vector<std::string> concat(std::initializer_list<const std::vector<std::string>*> parts) {
  std::vector<std::string> out;
  for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
  return out;
}

std::vector<int> range(int from, int count) {
  std::vector<int> r(count);
  for (int i = 0; i < count; ++i) r[i] = from + i;
  return r;
}

VectorXd stack(const VectorXd& a, const VectorXd& b, const VectorXd& c) {
  VectorXd v(a.size() + b.size() + c.size());
  v << a, b, c;
  return v;
}

}  // namespace

DomainError::DomainError(const std::string& constraint, const VectorXd& point)
    : std::domain_error("point " + format_point(point) + " violates domain constraint '" + constraint + "'"),
      constraint_(constraint) {}

WitnessViolation::WitnessViolation(const VectorXd& point, double eigenvalue)
    : std::domain_error("augmentation contraction witness fails at " + format_point(point) +
                        " (max eigenvalue " + std::to_string(eigenvalue) + ")"),
      point_(point),
      eigenvalue_(eigenvalue) {}

// ---------------------------------------------------------------- inputs

InputSignal InputSignal::zero(int n) {
  return InputSignal(n, [n](double) { return VectorXd::Zero(n).eval(); }, "zero");
}

InputSignal InputSignal::constant(const VectorXd& value) {
  std::ostringstream os;
  os << "constant" << format_point(value);
  return InputSignal(static_cast<int>(value.size()), [value](double) { return value; }, os.str());
}

InputSignal InputSignal::sinusoid(const VectorXd& amplitude, double omega, double phase) {
  std::ostringstream os;
  os << "sinusoid amplitude=" << format_point(amplitude) << " omega=" << omega << " phase=" << phase;
  return InputSignal(
      static_cast<int>(amplitude.size()),
      [amplitude, omega, phase](double t) { return (amplitude * std::cos(omega * t + phase)).eval(); }, os.str());
}

InputSignal InputSignal::tabulated(std::vector<double> times, std::vector<VectorXd> values) {
  if (times.empty() || times.size() != values.size()) throw std::invalid_argument("tabulated input needs matching times and values");
  if (!std::is_sorted(times.begin(), times.end())) throw std::invalid_argument("tabulated input times must be sorted");
  int n = static_cast<int>(values.front().size());
  for (const auto& v : values)
    if (v.size() != n) throw DimensionError("tabulated input rows differ in length");
  auto fn = [times = std::move(times), values = std::move(values)](double t) -> VectorXd {
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t k = static_cast<std::size_t>(it - times.begin());
    double a = (t - times[k - 1]) / (times[k] - times[k - 1]);
    return (1.0 - a) * values[k - 1] + a * values[k];
  };
  return InputSignal(n, std::move(fn), "tabulated");
}

// ---------------------------------------------------------------- helpers

VectorXd halton(int index, int dim) {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
  if (dim > static_cast<int>(std::size(primes))) throw DimensionError("halton: dimension too large");
  VectorXd v(dim);
  for (int d = 0; d < dim; ++d) {
    double f = 1.0, r = 0.0;
    int i = index;
    while (i > 0) {
      f /= primes[d];
      r += f * (i % primes[d]);
      i /= primes[d];
    }
    v(d) = r;
  }
  return v;
}

MatrixXd numeric_jacobian(const std::function<VectorXd(const VectorXd&)>& g, const VectorXd& v, double h) {
  VectorXd g0 = g(v);
  MatrixXd J(g0.size(), v.size());
  for (int j = 0; j < v.size(); ++j) {
    double step = h * std::max(1.0, std::abs(v(j)));
    VectorXd a = v, b = v;
    a(j) += step;
    b(j) -= step;
    J.col(j) = (g(a) - g(b)) / (2.0 * step);
  }
  return J;
}

CompiledPolyVector::CompiledPolyVector(const PolyVector& v, const std::vector<std::string>& args) {
  for (const auto& p : v) {
    f_.emplace_back(p, args);
    std::vector<CompiledPolynomial> row;
    for (const auto& a : args) row.emplace_back(differentiate(p, a), args);
    df_.push_back(std::move(row));
  }
}

VectorXd CompiledPolyVector::operator()(const VectorXd& args) const {
  VectorXd out(f_.size());
  for (std::size_t i = 0; i < f_.size(); ++i) out(static_cast<int>(i)) = f_[i](args);
  return out;
}

MatrixXd CompiledPolyVector::jacobian(const VectorXd& args, const std::vector<int>& wrt) const {
  MatrixXd J(f_.size(), wrt.size());
  for (std::size_t i = 0; i < f_.size(); ++i)
    for (std::size_t j = 0; j < wrt.size(); ++j) J(static_cast<int>(i), static_cast<int>(j)) = df_[i][wrt[j]](args);
  return J;
}

// ---------------------------------------------------------------- SystemModel

SystemModel SystemModel::polynomial(std::string name, std::vector<std::string> x_names,
                                    std::vector<std::string> y_names, std::vector<std::string> u_names,
                                    PolyVector fx, PolyVector fy) {
  if (fx.size() != x_names.size()) throw DimensionError("f_x has " + std::to_string(fx.size()) + " components for " +
                                                        std::to_string(x_names.size()) + " states");
  if (fy.size() != y_names.size()) throw DimensionError("f_y has " + std::to_string(fy.size()) + " components for " +
                                                        std::to_string(y_names.size()) + " outputs");
  SystemModel m;
  m.name_ = std::move(name);
  m.nx_ = static_cast<int>(x_names.size());
  m.ny_ = static_cast<int>(y_names.size());
  m.nu_ = static_cast<int>(u_names.size());
  m.x_names_ = std::move(x_names);
  m.y_names_ = std::move(y_names);
  m.u_names_ = std::move(u_names);
  auto args = concat({&m.x_names_, &m.y_names_, &m.u_names_});
  {
    auto sorted = args;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("model variable names must be distinct");
  }
  for (const auto* f : {&fx, &fy})
    for (const auto& p : *f)
      for (const auto& v : p.vars())
        if (p.depends_on(v) && std::find(args.begin(), args.end(), v) == args.end()) throw UnboundVariableError(v);
  m.fx_poly_ = std::move(fx);
  m.fy_poly_ = std::move(fy);
  auto cfx = std::make_shared<CompiledPolyVector>(*m.fx_poly_, args);
  auto cfy = std::make_shared<CompiledPolyVector>(*m.fy_poly_, args);
  const int nx = m.nx_, ny = m.ny_;
  m.fx_ = [cfx](const VectorXd& x, const VectorXd& y, const VectorXd& u) { return (*cfx)(stack(x, y, u)); };
  m.fy_ = [cfy](const VectorXd& x, const VectorXd& y, const VectorXd& u) { return (*cfy)(stack(x, y, u)); };
  m.jac_ = [cfx, cfy, nx, ny](const VectorXd& x, const VectorXd& y, const VectorXd& u) {
    VectorXd a = stack(x, y, u);
    auto xi = range(0, nx), yi = range(nx, ny);
    return Jacobians{cfx->jacobian(a, xi), cfx->jacobian(a, yi), cfy->jacobian(a, xi), cfy->jacobian(a, yi)};
  };
  m.lo_ = VectorXd::Constant(nx + ny, -std::numeric_limits<double>::infinity());
  m.hi_ = VectorXd::Constant(nx + ny, std::numeric_limits<double>::infinity());
  return m;
}

SystemModel SystemModel::closed_form(std::string name, int nx, int ny, int nu, Field fx, Field fy,
                                     FieldJacobians jac, std::vector<DomainConstraint> constraints,
                                     std::optional<std::pair<VectorXd, VectorXd>> box, int validation) {
  SystemModel m;
  m.name_ = std::move(name);
  m.nx_ = nx;
  m.ny_ = ny;
  m.nu_ = nu;
  for (int i = 0; i < nx; ++i) m.x_names_.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < ny; ++i) m.y_names_.push_back("y" + std::to_string(i + 1));
  for (int i = 0; i < nu; ++i) m.u_names_.push_back("u" + std::to_string(i + 1));
  m.fx_ = std::move(fx);
  m.fy_ = std::move(fy);
  m.jac_ = std::move(jac);
  m.constraints_ = std::move(constraints);
  m.lo_ = VectorXd::Constant(nx + ny, -std::numeric_limits<double>::infinity());
  m.hi_ = VectorXd::Constant(nx + ny, std::numeric_limits<double>::infinity());
  if (box) m.set_box(box->first, box->second);

  // Validate the analytic Jacobians.
  std::vector<VectorXd> pts;
  if (box)
    pts = m.sample(validation);
  else
    pts.push_back(VectorXd::Zero(nx + ny));
  for (const auto& chi : pts) {
    VectorXd x = chi.head(nx), y = chi.tail(ny);
    for (double uval : {0.0, 0.3}) {
      VectorXd u = VectorXd::Constant(nu, uval);
      Jacobians J = m.jac_(x, y, u);
      auto check = [&](const MatrixXd& got, const std::function<VectorXd(const VectorXd&)>& g, const VectorXd& at,
                       const char* what) {
        MatrixXd fd = numeric_jacobian(g, at);
        double err = (got - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff());
        if (got.rows() != fd.rows() || got.cols() != fd.cols() || !(err < 1e-6))
          throw JacobianMismatch("model '" + m.name_ + "': " + what + " differs from finite differences at " +
                                 format_point(chi) + " (relative error " + std::to_string(err) + ")");
      };
      check(J.fx_x, [&](const VectorXd& v) { return m.fx_(v, y, u); }, x, "df_x/dx");
      check(J.fx_y, [&](const VectorXd& v) { return m.fx_(x, v, u); }, y, "df_x/dy");
      check(J.fy_x, [&](const VectorXd& v) { return m.fy_(v, y, u); }, x, "df_y/dx");
      check(J.fy_y, [&](const VectorXd& v) { return m.fy_(x, v, u); }, y, "df_y/dy");
    }
  }
  return m;
}

const PolyVector& SystemModel::fx_poly() const {
  if (!fx_poly_) throw std::logic_error("model '" + name_ + "' has no polynomial form");
  return *fx_poly_;
}

const PolyVector& SystemModel::fy_poly() const {
  if (!fy_poly_) throw std::logic_error("model '" + name_ + "' has no polynomial form");
  return *fy_poly_;
}

VectorXd SystemModel::fx(const VectorXd& x, const VectorXd& y, const VectorXd& u) const { return fx_(x, y, u); }
VectorXd SystemModel::fy(const VectorXd& x, const VectorXd& y, const VectorXd& u) const { return fy_(x, y, u); }

Jacobians SystemModel::jacobians(const VectorXd& x, const VectorXd& y, const VectorXd& u) const {
  check_domain(chi_of(x, y));
  return jac_(x, y, u);
}

void SystemModel::set_box(const VectorXd& lo, const VectorXd& hi) {
  if (lo.size() != nchi() || hi.size() != nchi()) throw DimensionError("domain box must cover col(x, y)");
  if ((lo.array() > hi.array()).any()) throw std::invalid_argument("domain box has lo > hi");
  lo_ = lo;
  hi_ = hi;
}

std::string SystemModel::violated(const VectorXd& chi) const {
  if (chi.size() != nchi()) throw DimensionError("point has wrong dimension for model '" + name_ + "'");
  if (!chi.allFinite()) return "finite";
  for (int i = 0; i < chi.size(); ++i) {
    std::string var = i < nx_ ? x_names_[i] : y_names_[i - nx_];
    if (chi(i) < lo_(i)) return var + " >= " + std::to_string(lo_(i));
    if (chi(i) > hi_(i)) return var + " <= " + std::to_string(hi_(i));
  }
  for (const auto& c : constraints_)
    if (!(c.margin(chi) > 0.0)) return c.name;
  return {};
}

void SystemModel::check_domain(const VectorXd& chi) const {
  std::string v = violated(chi);
  if (!v.empty()) throw DomainError(v, chi);
}

std::vector<VectorXd> SystemModel::sample(int n, std::optional<std::pair<VectorXd, VectorXd>> box, int skip) const {
  VectorXd lo = box ? box->first : lo_, hi = box ? box->second : hi_;
  if (!lo.allFinite() || !hi.allFinite())
    throw std::invalid_argument("sampling model '" + name_ + "' needs a finite box");
  std::vector<VectorXd> pts;
  int idx = skip + 1;
  const int limit = skip + 1 + 1000 * std::max(n, 1);
  while (static_cast<int>(pts.size()) < n && idx < limit) {
    VectorXd h = halton(idx++, nchi());
    VectorXd p = lo + (hi - lo).cwiseProduct(h);
    if (in_domain(p)) pts.push_back(p);
  }
  if (static_cast<int>(pts.size()) < n)
    throw std::runtime_error("sampling model '" + name_ + "': domain has too little volume inside the box");
  return pts;
}

// ---------------------------------------------------------------- augmentation

AugmentedModel augment(std::shared_ptr<const SystemModel> base, std::vector<std::string> w_names,
                       AugmentedModel::WField fw, AugmentedModel::WJacobian fw_w, const MatrixXd& Mw,
                       double lambda_w, std::optional<std::pair<VectorXd, VectorXd>> chi_box, double w_box,
                       int n_samples) {
  const int nw = static_cast<int>(w_names.size());
  if (Mw.rows() != nw || Mw.cols() != nw) throw DimensionError("witness metric must be nw x nw");
  if (lambda_w < 0.0) throw std::invalid_argument("witness rate must be nonnegative");
  if (!is_symmetric(Mw, 1e-12) || min_eigenvalue(Mw) <= 0.0)
    throw std::invalid_argument("witness metric must be symmetric positive definite");
  AugmentedModel am;
  am.base = base;
  am.nw = nw;
  am.w_names = std::move(w_names);
  am.fw = std::move(fw);
  am.fw_w = std::move(fw_w);
  am.Mw = Mw;
  am.lambda_w = lambda_w;

  auto chis = base->sample(n_samples, chi_box);
  const int nx = base->nx(), ny = base->ny();
  for (int s = 0; s < n_samples; ++s) {
    VectorXd x = chis[s].head(nx), y = chis[s].tail(ny);
    VectorXd w = w_box * (2.0 * halton(s + 1, nw + 1).head(nw).array() - 1.0).matrix();
    VectorXd u = VectorXd::Zero(base->nu());
    VectorXd fwv = am.fw(x, w, y, u);
    if (fwv.size() != nw) throw DimensionError("f_w returned " + std::to_string(fwv.size()) + " components");
    MatrixXd A = am.fw_w(x, w, y, u);
    MatrixXd L = Mw * A + A.transpose() * Mw + 2.0 * lambda_w * Mw;
    double e = max_eigenvalue(L);
    if (e > 1e-8) {
      VectorXd pt(nx + nw + ny);
      pt << x, w, y;
      throw WitnessViolation(pt, e);
    }
  }
  return am;
}

AugmentedModel augment(std::shared_ptr<const SystemModel> base, std::vector<std::string> w_names, PolyVector fw,
                       const MatrixXd& Mw, double lambda_w, std::optional<std::pair<VectorXd, VectorXd>> chi_box,
                       double w_box, int n_samples) {
  if (fw.size() != w_names.size()) throw DimensionError("f_w has wrong number of components");
  auto args = concat({&base->x_names(), &w_names, &base->y_names(), &base->u_names()});
  auto cf = std::make_shared<CompiledPolyVector>(fw, args);
  const int nx = base->nx(), nw = static_cast<int>(w_names.size());
  auto pack = [](const VectorXd& x, const VectorXd& w, const VectorXd& y, const VectorXd& u) {
    VectorXd a(x.size() + w.size() + y.size() + u.size());
    a << x, w, y, u;
    return a;
  };
  auto am = augment(
      base, w_names, [cf, pack](const VectorXd& x, const VectorXd& w, const VectorXd& y, const VectorXd& u) {
        return (*cf)(pack(x, w, y, u));
      },
      [cf, pack, nx, nw](const VectorXd& x, const VectorXd& w, const VectorXd& y, const VectorXd& u) {
        return cf->jacobian(pack(x, w, y, u), range(nx, nw));
      },
      Mw, lambda_w, chi_box, w_box, n_samples);
  am.fw_poly = std::move(fw);
  return am;
}

// ---------------------------------------------------------------- transformations

Transformation Transformation::affine(const MatrixXd& P, Offset varphi, OffsetJacobian d_varphi) {
  Transformation t;
  t.nxe_ = static_cast<int>(P.cols());
  t.nxi_ = static_cast<int>(P.rows());
  t.P_ = P;
  t.varphi_ = varphi;
  t.map_ = [P, varphi](const VectorXd& xe, const VectorXd& y) { return (P * xe + varphi(y)).eval(); };
  t.d_xe_ = [P](const VectorXd&, const VectorXd&) { return P; };
  t.d_y_ = [d_varphi](const VectorXd&, const VectorXd& y) { return d_varphi(y); };
  t.ny_ = -1;
  return t;
}

Transformation Transformation::affine(const MatrixXd& P, const PolyVector& varphi,
                                      const std::vector<std::string>& y_names,
                                      const std::vector<std::string>& xe_names) {
  if (static_cast<int>(varphi.size()) != P.rows()) throw DimensionError("offset length must match rows of P");
  auto cv = std::make_shared<CompiledPolyVector>(varphi, y_names);
  const int ny = static_cast<int>(y_names.size());
  Transformation t = affine(
      P, [cv](const VectorXd& y) { return (*cv)(y); }, [cv, ny](const VectorXd& y) { return cv->jacobian(y, range(0, ny)); });
  t.ny_ = ny;
  t.y_names_ = y_names;
  if (!xe_names.empty()) {
    if (static_cast<int>(xe_names.size()) != P.cols()) throw DimensionError("one name per column of P");
    PolyVector full = varphi;
    for (int i = 0; i < P.rows(); ++i)
      for (int j = 0; j < P.cols(); ++j)
        if (P(i, j) != 0.0) full[i] += Polynomial::variable(xe_names[j]) * P(i, j);
    t.poly_ = std::move(full);
    t.xe_names_ = xe_names;
  }
  return t;
}

Transformation Transformation::polynomial(const PolyVector& phi, const std::vector<std::string>& xe_names,
                                          const std::vector<std::string>& y_names) {
  auto args = concat({&xe_names, &y_names});
  auto cp = std::make_shared<CompiledPolyVector>(phi, args);
  const int nxe = static_cast<int>(xe_names.size()), ny = static_cast<int>(y_names.size());
  auto pack = [](const VectorXd& xe, const VectorXd& y) {
    VectorXd a(xe.size() + y.size());
    a << xe, y;
    return a;
  };
  Transformation t = general(
      nxe, ny, static_cast<int>(phi.size()), [cp, pack](const VectorXd& xe, const VectorXd& y) { return (*cp)(pack(xe, y)); },
      [cp, pack, nxe](const VectorXd& xe, const VectorXd& y) { return cp->jacobian(pack(xe, y), range(0, nxe)); },
      [cp, pack, nxe, ny](const VectorXd& xe, const VectorXd& y) { return cp->jacobian(pack(xe, y), range(nxe, ny)); });
  t.poly_ = phi;
  t.xe_names_ = xe_names;
  t.y_names_ = y_names;
  return t;
}

Transformation Transformation::general(int nxe, int ny, int nxi, Map phi, MapJacobian d_xe, MapJacobian d_y) {
  Transformation t;
  t.nxe_ = nxe;
  t.ny_ = ny;
  t.nxi_ = nxi;
  t.map_ = std::move(phi);
  t.d_xe_ = std::move(d_xe);
  t.d_y_ = std::move(d_y);
  return t;
}

}  // namespace convobs
