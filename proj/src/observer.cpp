#include "convobs/observer.hpp"

#include <cmath>
#include <memory>

namespace convobs {

std::string to_string(LeftInverse s) {
  switch (s) {
    case LeftInverse::AffineClosedForm: return "AffineClosedForm";
    case LeftInverse::NewtonMonotone: return "NewtonMonotone";
    case LeftInverse::Custom: return "Custom";
  }
  return "?";
}

std::vector<std::string> ObserverSpec::xe_names() const {
  std::vector<std::string> v = x_names;
  v.insert(v.end(), w_names.begin(), w_names.end());
  return v;
}

namespace {

void set_fz(ObserverSpec& s, const PolyVector& fz) {
  std::vector<std::string> args = s.xe_names();
  args.insert(args.end(), s.y_names.begin(), s.y_names.end());
  args.insert(args.end(), s.u_names.begin(), s.u_names.end());
  auto cf = std::make_shared<CompiledPolyVector>(fz, args);
  const int nxe = s.nxe();
  std::vector<int> wrt(nxe);
  for (int i = 0; i < nxe; ++i) wrt[i] = i;
  auto pack = [](const VectorXd& xe, const VectorXd& y, const VectorXd& u) {
    VectorXd a(xe.size() + y.size() + u.size());
    a << xe, y, u;
    return a;
  };
  s.fz = [cf, pack](const VectorXd& xe, const VectorXd& y, const VectorXd& u) { return (*cf)(pack(xe, y, u)); };
  s.fz_xe = [cf, pack, wrt](const VectorXd& xe, const VectorXd& y, const VectorXd& u) {
    return cf->jacobian(pack(xe, y, u), wrt);
  };
  s.fz_poly = fz;
}

void split_names(ObserverSpec& s, std::vector<std::string> xe_names, int nx) {
  s.nx = nx;
  s.nw = static_cast<int>(xe_names.size()) - nx;
  s.x_names.assign(xe_names.begin(), xe_names.begin() + nx);
  s.w_names.assign(xe_names.begin() + nx, xe_names.end());
}

}  // namespace

ObserverSpec make_affine_spec(std::string name, const MatrixXd& P, const PolyVector& varphi, const PolyVector& fz,
                              std::vector<std::string> xe_names, std::vector<std::string> y_names,
                              std::vector<std::string> u_names, int nx, double lambda, double k) {
  if (P.rows() != P.cols() || P.rows() != static_cast<int>(xe_names.size()))
    throw DimensionError("P must be square with one row per extended state");
  ObserverSpec s;
  s.name = std::move(name);
  split_names(s, xe_names, nx);
  s.ny = static_cast<int>(y_names.size());
  s.nu = static_cast<int>(u_names.size());
  s.y_names = y_names;
  s.u_names = u_names;
  s.phi = Transformation::affine(P, varphi, y_names, xe_names);
  set_fz(s, fz);
  s.metric = P.inverse();
  s.lambda = lambda;
  s.k = k;
  s.strategy = LeftInverse::AffineClosedForm;
  return s;
}

ObserverSpec make_polynomial_spec(std::string name, const PolyVector& phi, const PolyVector& fz,
                                  std::vector<std::string> xe_names, std::vector<std::string> y_names,
                                  std::vector<std::string> u_names, int nx, const MatrixXd& metric, double lambda,
                                  double k) {
  ObserverSpec s;
  s.name = std::move(name);
  split_names(s, xe_names, nx);
  s.ny = static_cast<int>(y_names.size());
  s.nu = static_cast<int>(u_names.size());
  s.y_names = y_names;
  s.u_names = u_names;
  s.phi = Transformation::polynomial(phi, xe_names, y_names);
  set_fz(s, fz);
  s.metric = metric;
  s.lambda = lambda;
  s.k = k;
  s.strategy = LeftInverse::NewtonMonotone;
  return s;
}

InverseResult newton_inverse(const ObserverSpec& spec, const VectorXd& xi, const VectorXd& y, const VectorXd* guess,
                             const NewtonOptions& opts) {
  const int n = spec.nxe();
  InverseResult res;
  res.xe = guess ? *guess : VectorXd::Zero(n);
  const double target = opts.tolerance * (1.0 + xi.norm());
  std::vector<double> history;
  VectorXd g = spec.phi(res.xe, y) - xi;
  double norm = g.norm();
  history.push_back(norm);
  for (int it = 0; it < opts.max_iterations; ++it) {
    if (norm <= target) {
      res.iterations = it;
      res.residual = norm;
      return res;
    }
    MatrixXd J = spec.phi.d_xe(res.xe, y);
    VectorXd dx = J.partialPivLu().solve(-g);
    double step = 1.0;
    bool improved = false;
    while (step >= opts.min_step) {
      VectorXd cand = res.xe + step * dx;
      VectorXd gc = spec.phi(cand, y) - xi;
      double nc = gc.norm();
      if (std::isfinite(nc) && nc < norm) {
        res.xe = cand;
        g = gc;
        norm = nc;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    history.push_back(norm);
    if (!improved) break;
  }
  if (norm <= target) {
    res.iterations = static_cast<int>(history.size()) - 1;
    res.residual = norm;
    return res;
  }
  throw NewtonFailure("left inverse of '" + spec.name + "' did not converge (residual " + std::to_string(norm) +
                          "); the monotonicity certificate is likely violated",
                      std::move(history));
}

InverseResult left_inverse(const ObserverSpec& spec, const VectorXd& xi, const VectorXd& y, const VectorXd* guess,
                           const NewtonOptions& opts) {
  if (xi.size() != spec.nxi()) throw DimensionError("observer state has wrong dimension");
  switch (spec.strategy) {
    case LeftInverse::AffineClosedForm: {
      if (!spec.phi.is_affine()) throw std::logic_error("closed-form inverse requested for a non-affine map");
      InverseResult r;
      r.xe = spec.phi.P().partialPivLu().solve(xi - spec.phi.offset(y));
      return r;
    }
    case LeftInverse::Custom: {
      InverseResult r;
      r.xe = spec.custom_inverse(xi, y);
      return r;
    }
    case LeftInverse::NewtonMonotone:
      return newton_inverse(spec, xi, y, guess, opts);
  }
  throw std::logic_error("unknown left inverse strategy");
}

VectorXd observer_rhs(const ObserverSpec& spec, const VectorXd& xi, const VectorXd& y, const VectorXd& u) {
  return spec.fz(left_inverse(spec, xi, y).xe, y, u);
}

ObserverDynamics dynamics(const ObserverSpec& spec) {
  ObserverDynamics d;
  d.dim = spec.nxi();
  auto s = std::make_shared<ObserverSpec>(spec);
  // Warm start for Newton: the last inverse is usually a good guess.
  auto cache = std::make_shared<VectorXd>();
  auto inv = [s, cache](const VectorXd& xi, const VectorXd& y) {
    const VectorXd* guess = cache->size() == s->nxe() ? cache.get() : nullptr;
    InverseResult r = left_inverse(*s, xi, y, guess);
    *cache = r.xe;
    return r.xe;
  };
  d.rhs = [s, inv](const VectorXd& xi, const VectorXd& y, const VectorXd& u) { return s->fz(inv(xi, y), y, u); };
  d.estimate = [s, inv](const VectorXd& xi, const VectorXd& y) { return inv(xi, y).head(s->nx).eval(); };
  return d;
}

}  // namespace convobs
