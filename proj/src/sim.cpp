#include "convobs/sim.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace convobs {

void SimConfig::validate() const {
  if (!(h > 0.0)) throw std::invalid_argument("step h must be positive");
  if (!(T > 0.0)) throw std::invalid_argument("horizon T must be positive");
  if (noise.amplitude < 0.0) throw std::invalid_argument("noise amplitude must be nonnegative");
  if (noise.amplitude > 0.0 && noise.period < h * (1.0 - 1e-12))
    throw std::invalid_argument("noise sample period must be at least the step");
  if (record_stride < 1) throw std::invalid_argument("record stride must be >= 1");
}

VectorXd Trajectory::terminal_state() const {
  if (t.empty()) return {};
  const VectorXd& a = x.back();
  const VectorXd& b = y.back();
  const VectorXd& c = w.back();
  const VectorXd& d = xi.back();
  VectorXd s(a.size() + b.size() + c.size() + d.size());
  s << a, b, c, d;
  return s;
}

double Trajectory::rms_error(double t0) const {
  double acc = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= t0) {
      acc += err[i] * err[i];
      ++n;
    }
  if (n == 0) throw std::invalid_argument("no samples after t0");
  return std::sqrt(acc / n);
}

PlantDynamics PlantDynamics::of(const SystemModel& m) {
  PlantDynamics p;
  p.nx = m.nx();
  p.ny = m.ny();
  auto mp = std::make_shared<SystemModel>(m);
  p.fx = [mp](const VectorXd& x, const VectorXd& y, const VectorXd& u) { return mp->fx(x, y, u); };
  p.fy = [mp](const VectorXd& x, const VectorXd& y, const VectorXd& u) { return mp->fy(x, y, u); };
  p.violated = [mp](const VectorXd& chi) { return mp->violated(chi); };
  return p;
}

PlantDynamics PlantDynamics::of(const AugmentedModel& am) {
  PlantDynamics p = of(*am.base);
  p.nw = am.nw;
  p.fw = am.fw;
  return p;
}

namespace {

struct Layout {
  int nx, ny, nw, nxi;
  VectorXd x(const VectorXd& s) const { return s.segment(0, nx); }
  VectorXd y(const VectorXd& s) const { return s.segment(nx, ny); }
  VectorXd w(const VectorXd& s) const { return s.segment(nx + ny, nw); }
  VectorXd xi(const VectorXd& s) const { return s.segment(nx + ny + nw, nxi); }
  int size() const { return nx + ny + nw + nxi; }
};

}  // namespace

Trajectory simulate(const PlantDynamics& plant, const ObserverDynamics& obs, const SimConfig& cfg) {
  cfg.validate();
  const Layout L{plant.nx, plant.ny, plant.nw, obs.dim};
  if (cfg.x0.size() != L.nx || cfg.y0.size() != L.ny) throw DimensionError("plant initial condition has wrong size");
  VectorXd w0 = cfg.w0.size() ? cfg.w0 : VectorXd::Zero(L.nw);
  if (w0.size() != L.nw) throw DimensionError("augmentation initial condition has wrong size");
  if (cfg.xi0.size() != L.nxi) throw DimensionError("observer initial condition has wrong size");
  if (plant.violated) {
    std::string v = plant.violated(chi_of(cfg.x0, cfg.y0));
    if (!v.empty()) throw DomainError(v, chi_of(cfg.x0, cfg.y0));
  }

  // 53 random bits mapped to [-1, 1); identical across standard libraries.
  std::mt19937_64 rng(cfg.seed);
  auto unif = [&rng]() { return std::ldexp(static_cast<double>(rng() >> 11), -52) - 1.0; };
  long long noise_index = -1;
  VectorXd noise = VectorXd::Zero(L.ny);
  auto noise_at = [&](double t) -> const VectorXd& {
    if (cfg.noise.amplitude <= 0.0) return noise;
    long long k = static_cast<long long>(std::floor(t / cfg.noise.period + 1e-9));
    while (noise_index < k) {
      for (int i = 0; i < L.ny; ++i) noise(i) = cfg.noise.amplitude * unif();
      ++noise_index;
    }
    return noise;
  };

  VectorXd s(L.size());
  s << cfg.x0, cfg.y0, w0, cfg.xi0;

  auto rhs = [&](double t, const VectorXd& st, const VectorXd& n) {
    VectorXd u = cfg.input(t);
    VectorXd x = L.x(st), y = L.y(st);
    VectorXd d(L.size());
    d.segment(0, L.nx) = plant.fx(x, y, u);
    d.segment(L.nx, L.ny) = plant.fy(x, y, u);
    if (L.nw) d.segment(L.nx + L.ny, L.nw) = plant.fw(x, L.w(st), y, u);
    d.segment(L.nx + L.ny + L.nw, L.nxi) = obs.rhs(L.xi(st), y + n, u);
    return d;
  };

  Trajectory tr;
  auto record = [&](double t, const VectorXd& st, const VectorXd& n) {
    VectorXd y = L.y(st), yn = y + n, x = L.x(st);
    VectorXd xh = obs.estimate(L.xi(st), yn);
    tr.t.push_back(t);
    tr.x.push_back(x);
    tr.y.push_back(y);
    tr.y_noisy.push_back(yn);
    tr.u.push_back(cfg.input(t));
    tr.w.push_back(L.w(st));
    tr.xi.push_back(L.xi(st));
    tr.xhat.push_back(xh);
    tr.err.push_back((xh - x).norm());
  };

  const long long steps = std::llround(cfg.T / cfg.h);
  const double h = cfg.h;
  try {
    record(0.0, s, noise_at(0.0));
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("observer cannot start: ") + e.what());
  }
  for (long long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    try {
      VectorXd n = noise_at(t);
      VectorXd k1 = rhs(t, s, n);
      VectorXd k2 = rhs(t + 0.5 * h, s + 0.5 * h * k1, n);
      VectorXd k3 = rhs(t + 0.5 * h, s + 0.5 * h * k2, n);
      VectorXd k4 = rhs(t + h, s + h * k3, n);
      VectorXd next = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!next.allFinite()) throw std::runtime_error("state is not finite");
      if (plant.violated) {
        std::string v = plant.violated(chi_of(L.x(next), L.y(next)));
        if (!v.empty()) throw DomainError(v, chi_of(L.x(next), L.y(next)));
      }
      s = next;
      const double tn = static_cast<double>(k + 1) * h;
      if ((k + 1) % cfg.record_stride == 0 || k + 1 == steps) record(tn, s, noise_at(tn));
    } catch (const std::exception& e) {
      tr.exited = true;
      tr.exit_reason = e.what();
      tr.exit_time = t;
      break;
    }
  }
  return tr;
}

Trajectory simulate(const SystemModel& m, const ObserverSpec& spec, const SimConfig& cfg) {
  return simulate(PlantDynamics::of(m), dynamics(spec), cfg);
}

Trajectory simulate(const AugmentedModel& am, const ObserverSpec& spec, const SimConfig& cfg) {
  return simulate(PlantDynamics::of(am), dynamics(spec), cfg);
}

RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& e, double t0, double t1) {
  if (t.size() != e.size()) throw DimensionError("times and errors differ in length");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t0 || t[i] > t1) continue;
    if (!(e[i] >= 1e-12))
      throw std::domain_error("error below 1e-12 at t = " + std::to_string(t[i]) + "; nothing to fit");
    double ly = std::log(e[i]);
    sx += t[i];
    sy += ly;
    sxx += t[i] * t[i];
    sxy += t[i] * ly;
    syy += ly * ly;
    ++n;
  }
  if (n < 3) throw std::invalid_argument("fit window holds fewer than 3 samples");
  double vx = sxx - sx * sx / n, vy = syy - sy * sy / n, cxy = sxy - sx * sy / n;
  if (!(vx > 0.0)) throw std::invalid_argument("degenerate fit window");
  RateFit f;
  double slope = cxy / vx;
  f.rate = -slope;
  f.intercept = (sy - slope * sx) / n;
  f.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
  f.points = n;
  return f;
}

RateFit fit_rate(const Trajectory& traj, double t0, double t1) { return fit_rate(traj.t, traj.err, t0, t1); }

std::optional<double> settling_time(const Trajectory& traj, double level) {
  std::optional<double> ts;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.err[i] < level) {
      if (!ts) ts = traj.t[i];
    } else {
      ts.reset();
    }
  }
  return ts;
}

void write_csv(std::ostream& os, const Trajectory& tr) {
  if (tr.t.empty()) {
    os << "t,err_norm\n";
    return;
  }
  auto cols = [&](const char* name, long n) {
    for (long i = 0; i < n; ++i) os << ',' << name << i + 1;
  };
  os << 't';
  cols("x", tr.x[0].size());
  cols("y", tr.y[0].size());
  cols("y_noisy", tr.y_noisy[0].size());
  cols("u", tr.u[0].size());
  cols("xi", tr.xi[0].size());
  cols("xhat", tr.xhat[0].size());
  os << ",err_norm\n";
  std::ostringstream line;
  line << std::setprecision(17);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    line.str("");
    line << tr.t[k];
    for (const auto* v : {&tr.x[k], &tr.y[k], &tr.y_noisy[k], &tr.u[k], &tr.xi[k], &tr.xhat[k]})
      for (long i = 0; i < v->size(); ++i) line << ',' << (*v)(i);
    line << ',' << tr.err[k] << '\n';
    os << line.str();
  }
}

}  // namespace convobs
