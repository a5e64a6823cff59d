#include "convobs/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "convobs/linalg.hpp"

namespace convobs {

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::BoundaryPass: return "boundary-pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::PreconditionFail: return "precondition-fail";
  }
  return "?";
}

CheckStatus classify(double v, double tol) {
  if (!std::isfinite(v)) return CheckStatus::Fail;
  if (v < -tol) return CheckStatus::Pass;
  if (v <= tol) return CheckStatus::BoundaryPass;
  return CheckStatus::Fail;
}

VectorXd SamplePoint::stacked() const {
  VectorXd s(xe.size() + y.size() + u.size());
  s << xe, y, u;
  return s;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex mu;
  for (int j = 0; j < jobs; ++j)
    pool.emplace_back([&, j] {
      for (int i = j; i < n; i += jobs) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

Region box_region(const SystemModel& m, int nw, const VectorXd& lo, const VectorXd& hi, int n, const VectorXd& u,
                  int skip) {
  const int nx = m.nx(), ny = m.ny(), dim = nx + nw + ny;
  if (lo.size() != dim || hi.size() != dim) throw DimensionError("region box must cover col(x_e, y)");
  VectorXd uu = u.size() ? u : VectorXd::Zero(m.nu());
  Region out;
  out.reserve(n);
  for (int idx = skip; static_cast<int>(out.size()) < n; ++idx) {
    if (idx > skip + 1000 * std::max(n, 1)) throw std::runtime_error("region box barely meets the model domain");
    VectorXd v = idx == 0 ? VectorXd(0.5 * (lo + hi)) : VectorXd(lo.array() + halton(idx, dim).array() * (hi - lo).array());
    SamplePoint p{v.head(nx + nw), v.tail(ny), uu};
    if (!m.in_domain(chi_of(p.xe.head(nx), p.y))) continue;
    out.push_back(std::move(p));
  }
  return out;
}

Region trajectory_region(const Trajectory& tr, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  Region out;
  for (std::size_t k = 0; k < tr.size(); k += stride) {
    VectorXd xe(tr.x[k].size() + tr.w[k].size());
    xe << tr.x[k], tr.w[k];
    out.push_back({xe, tr.y[k], tr.u[k]});
  }
  return out;
}

namespace {

// Evaluates value(i) at every point and keeps the worst (largest) one; ties
// go to the lowest index so reports do not depend on the job count.
struct Sweep {
  std::vector<double> values;
  int worst = -1;
  double worst_value = -std::numeric_limits<double>::infinity();
  double scale = 0.0;
};

Sweep sweep(int n, int jobs, const std::function<std::pair<double, double>(int)>& value) {
  Sweep s;
  s.values.assign(n, 0.0);
  std::vector<double> scales(n, 0.0);
  parallel_for(n, jobs, [&](int i) {
    auto [v, sc] = value(i);
    s.values[i] = v;
    scales[i] = sc;
  });
  for (int i = 0; i < n; ++i) {
    double v = std::isfinite(s.values[i]) ? s.values[i] : std::numeric_limits<double>::infinity();
    if (s.worst < 0 || v > s.worst_value) {
      s.worst = i;
      s.worst_value = v;
    }
    s.scale = std::max(s.scale, scales[i]);
  }
  return s;
}

CheckReport finish(std::string id, const Sweep& s, const std::vector<VectorXd>& points, double tol,
                   const std::string& what) {
  CheckReport r;
  r.id = std::move(id);
  r.samples = static_cast<int>(s.values.size());
  r.tolerance = tol;
  if (r.samples == 0) {
    r.status = CheckStatus::PreconditionFail;
    r.message = "no sample points";
    return r;
  }
  r.worst_margin = s.worst_value;
  r.worst_point = points[s.worst];
  r.status = classify(s.worst_value, tol);
  std::ostringstream os;
  os << what << ": worst " << s.worst_value << " (tolerance " << tol << ") over " << r.samples << " samples";
  r.message = os.str();
  return r;
}

std::vector<VectorXd> stacked(const Region& region) {
  std::vector<VectorXd> pts;
  pts.reserve(region.size());
  for (const auto& p : region) pts.push_back(p.stacked());
  return pts;
}

double matnorm(const MatrixXd& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

CheckReport check_H1(const ObserverSpec& spec, const Region& region, const VerifyOptions& o) {
  Sweep s = sweep(static_cast<int>(region.size()), o.jobs, [&](int i) {
    MatrixXd J = spec.phi.d_xe(region[i].xe, region[i].y);
    MatrixXd S = J + J.transpose();
    return std::make_pair(spec.k - min_eigenvalue(S), matnorm(S));
  });
  return finish("H1", s, stacked(region), check_tolerance(s.scale), "k - min eig(Phi_x + Phi_x')");
}

CheckReport check_H2(const ObserverSpec& spec, const SystemModel& m, const Region& region,
                     const AugmentedModel* aug, const VerifyOptions& o) {
  const int nx = m.nx();
  if (spec.nw > 0 && !aug) {
    CheckReport r;
    r.id = "H2";
    r.status = CheckStatus::PreconditionFail;
    r.message = "spec has augmentation states but no augmentation model was given";
    return r;
  }
  const bool exact = spec.fz_poly && spec.phi.poly() && m.is_polynomial() && (spec.nw == 0 || aug->fw_poly);
  if (exact) {
    PolyVector field = m.fx_poly();
    if (spec.nw) field.insert(field.end(), aug->fw_poly->begin(), aug->fw_poly->end());
    const std::vector<std::string> xe = spec.xe_names();
    const PolyVector& phi = *spec.phi.poly();
    double worst = 0.0;
    int worst_i = 0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      Polynomial res = -(*spec.fz_poly)[i];
      for (std::size_t j = 0; j < xe.size(); ++j) res += differentiate(phi[i], xe[j]) * field[j];
      for (int l = 0; l < m.ny(); ++l) res += differentiate(phi[i], m.y_names()[l]) * m.fy_poly()[l];
      for (const auto& [e, c] : res.terms())
        if (std::abs(c) > worst) {
          worst = std::abs(c);
          worst_i = static_cast<int>(i);
        }
    }
    CheckReport r;
    r.id = "H2";
    r.samples = 0;
    r.tolerance = 1e-8;
    r.worst_margin = worst;
    r.status = worst < 1e-8 ? CheckStatus::Pass : CheckStatus::Fail;
    std::ostringstream os;
    os << "exact: largest residual coefficient " << worst << " in component " << worst_i + 1;
    r.message = os.str();
    return r;
  }
  Sweep s = sweep(static_cast<int>(region.size()), o.jobs, [&](int i) {
    const SamplePoint& p = region[i];
    VectorXd x = p.xe.head(nx);
    VectorXd dxe(spec.nxe());
    dxe.head(nx) = m.fx(x, p.y, p.u);
    if (spec.nw) dxe.tail(spec.nw) = aug->fw(x, p.xe.tail(spec.nw), p.y, p.u);
    VectorXd lhs = spec.phi.d_xe(p.xe, p.y) * dxe + spec.phi.d_y(p.xe, p.y) * m.fy(x, p.y, p.u);
    VectorXd res = lhs - spec.fz(p.xe, p.y, p.u);
    return std::make_pair(res.lpNorm<Eigen::Infinity>(), 0.0);
  });
  CheckReport r = finish("H2", s, stacked(region), 1e-8, "sampled |Phi_x f + Phi_y f_y - f_z|_inf");
  if (r.samples) r.status = s.worst_value < 1e-8 ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

CheckReport check_H3(const ObserverSpec& spec, const Region& region, const VerifyOptions& o) {
  if (!spec.phi.is_affine()) {
    CheckReport r;
    r.id = "H3";
    r.status = CheckStatus::PreconditionFail;
    r.message = "H3 needs an affine transformation";
    return r;
  }
  Sweep s = sweep(static_cast<int>(region.size()), o.jobs, [&](int i) {
    const SamplePoint& p = region[i];
    MatrixXd F = spec.fz_xe(p.xe, p.y, p.u);
    MatrixXd P = spec.phi.d_xe(p.xe, p.y);
    MatrixXd Q = spec.lambda > 0.0 ? MatrixXd(2.0 * spec.lambda * sym(P))
                 : spec.Q.size()   ? spec.Q
                                   : MatrixXd(MatrixXd::Zero(F.rows(), F.cols()));
    MatrixXd S = F + F.transpose() + Q;
    return std::make_pair(max_eigenvalue(S), matnorm(F + F.transpose()) + matnorm(Q));
  });
  return finish("H3", s, stacked(region), check_tolerance(s.scale), "max eig(F + F' + Q)");
}

CheckReport check_H4(const ObserverSpec& spec, const Region& region, const VerifyOptions& o) {
  if (!spec.r || spec.P_metric.size() == 0) {
    CheckReport r;
    r.id = "H4";
    r.status = CheckStatus::PreconditionFail;
    r.message = "spec carries no H4 metric P and step r";
    return r;
  }
  const double rr = *spec.r;
  const MatrixXd& P = spec.P_metric;
  const int n = static_cast<int>(P.rows());
  MatrixXd Q = spec.Q.size() ? spec.Q : MatrixXd(MatrixXd::Zero(n, n));
  Sweep s = sweep(static_cast<int>(region.size()), o.jobs, [&](int i) {
    const SamplePoint& p = region[i];
    MatrixXd F = spec.fz_xe(p.xe, p.y, p.u);
    MatrixXd Phx = spec.phi.d_xe(p.xe, p.y);
    MatrixXd A = Phx - 0.5 * rr * F, B = Phx + 0.5 * rr * F;
    MatrixXd blk(2 * n, 2 * n);
    blk << A + A.transpose() - P - rr * Q, B.transpose(), B, P;
    return std::make_pair(-min_eigenvalue(blk), matnorm(blk));
  });
  return finish("H4", s, stacked(region), check_tolerance(s.scale), "-min eig(H4 block)");
}

CheckReport check_A2(const ObserverSpec& spec, const SystemModel& m, const Region& region, double lambda,
                     const MetricField& metric, const AugmentedModel* aug, const VerifyOptions& o) {
  CheckReport pre;
  pre.id = "A2";
  pre.status = CheckStatus::PreconditionFail;
  if (!metric && spec.metric.size() == 0) {
    pre.message = "no metric: the spec carries none and none was given";
    return pre;
  }
  if (spec.nw > 0 && !aug) {
    pre.message = "spec has augmentation states but no augmentation model was given";
    return pre;
  }
  const int nx = m.nx();
  const double h = 1e-5;
  Sweep s = sweep(static_cast<int>(region.size()), o.jobs, [&](int i) {
    const SamplePoint& p = region[i];
    VectorXd xi = spec.phi(p.xe, p.y);
    MatrixXd F = spec.fz_xe(p.xe, p.y, p.u);
    MatrixXd Phx = spec.phi.d_xe(p.xe, p.y);
    MatrixXd M = metric ? metric(xi, p.y) : spec.metric;
    MatrixXd dM = MatrixXd::Zero(M.rows(), M.cols());
    if (metric) {
      VectorXd fz = spec.fz(p.xe, p.y, p.u);
      VectorXd fy = m.fy(p.xe.head(nx), p.y, p.u);
      dM = (metric(xi + h * fz, p.y + h * fy) - metric(xi - h * fz, p.y - h * fy)) / (2.0 * h);
    }
    MatrixXd A = M * F * Phx.inverse();
    MatrixXd S = dM + A + A.transpose();
    double v = max_eigenvalue(S) + 2.0 * lambda * min_eigenvalue(M);
    return std::make_pair(v, matnorm(S) + 2.0 * lambda * matnorm(M));
  });
  const double tol = std::max(1e-6, check_tolerance(s.scale));
  CheckReport r = finish("A2", s, stacked(region), tol, "max eig(dM + A + A') + 2 lambda min eig(M)");
  return r;
}

CheckReport check_pde(const std::function<MatrixXd(const VectorXd&)>& dphi,
                      const std::function<MatrixXd(const VectorXd&)>& Psi, double lambda,
                      const std::vector<VectorXd>& grid) {
  Sweep s = sweep(static_cast<int>(grid.size()), 1, [&](int i) {
    MatrixXd R = dphi(grid[i]) * Psi(grid[i]);
    R.diagonal().array() += lambda;
    return std::make_pair(R.cwiseAbs().maxCoeff(), 0.0);
  });
  CheckReport r = finish("pde", s, grid, 1e-8, "sup |dphi Psi + lambda I|");
  if (r.samples) r.status = s.worst_value < 1e-8 ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

namespace {

MatrixXd derivative_along(const std::function<MatrixXd(const VectorXd&)>& P, const VectorXd& chi,
                          const VectorXd& f) {
  const double h = 1e-5;
  return (P(chi + h * f) - P(chi - h * f)) / (2.0 * h);
}

}  // namespace

CheckReport check_transverse(const VectorField& f, const TransverseWitness& w, const std::vector<VectorXd>& points) {
  Sweep s = sweep(static_cast<int>(points.size()), 1, [&](int i) {
    const VectorXd& c = points[i];
    MatrixXd J = f.jacobian(c);
    MatrixXd P = w.metric(c);
    MatrixXd L = derivative_along(w.metric, c, f.f(c)) + P * J + J.transpose() * P;
    MatrixXd Px = w.psi_jacobian(c);
    return std::make_pair(max_eigenvalue(Px * L * Px.transpose()), 0.0);
  });
  CheckReport r = finish("transverse", s, points, 1e-9, "max eig(psi_chi (dP + PJ + J'P) psi_chi')");
  if (r.samples) r.status = s.worst_value < -1e-9 ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

CheckReport check_semidefinite_metric(const VectorField& f, const TransverseWitness& w,
                                      const std::vector<VectorXd>& points) {
  CheckReport pre;
  pre.id = "semidefinite";
  // Each column of Psi must be a gradient field.
  for (const auto& c : points) {
    MatrixXd Psi0 = w.Psi(c);
    for (int col = 0; col < Psi0.cols(); ++col) {
      auto column = [&](const VectorXd& v) { return VectorXd(w.Psi(v).col(col)); };
      MatrixXd D = numeric_jacobian(column, c, 1e-5);
      double asym = (D - D.transpose()).cwiseAbs().maxCoeff();
      if (asym > 1e-6 * (1.0 + D.cwiseAbs().maxCoeff())) {
        pre.status = CheckStatus::PreconditionFail;
        pre.worst_point = c;
        pre.worst_margin = asym;
        std::ostringstream os;
        os << "column " << col + 1 << " of Psi is not a gradient (Jacobian asymmetry " << asym << ")";
        pre.message = os.str();
        return pre;
      }
    }
  }
  auto W = [&](const VectorXd& c) { return MatrixXd(w.Psi(c) * w.P(c) * w.Psi(c).transpose()); };
  Sweep s = sweep(static_cast<int>(points.size()), 1, [&](int i) {
    const VectorXd& c = points[i];
    MatrixXd J = f.jacobian(c);
    MatrixXd Wc = W(c);
    MatrixXd L = derivative_along(W, c, f.f(c)) + J.transpose() * Wc + Wc * J;
    MatrixXd Ps = w.Psi(c);
    return std::make_pair(max_eigenvalue(Ps.transpose() * L * Ps), 0.0);
  });
  CheckReport r = finish("semidefinite", s, points, 1e-9, "max eig(Psi' (dW + J'W + WJ) Psi)");
  if (r.samples) r.status = s.worst_value < -1e-9 ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

}  // namespace convobs
