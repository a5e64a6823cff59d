#include "convobs/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <ostream>

#include "convobs/linalg.hpp"

namespace convobs {

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Feasible: return "Feasible";
    case SdpStatus::Infeasible: return "Infeasible";
    case SdpStatus::MaxIter: return "MaxIter";
  }
  return "?";
}

SdpProblem::SdpProblem(std::vector<int> block_dims, int num_free)
    : block_dims_(std::move(block_dims)), num_free_(num_free), free_objective_(Eigen::VectorXd::Zero(num_free)) {
  if (num_free < 0) throw std::invalid_argument("negative free variable count");
  for (int d : block_dims_) {
    if (d < 1) throw std::invalid_argument("SDP block dimension must be >= 1");
    objective_.push_back(Eigen::MatrixXd::Zero(d, d));
  }
}

int SdpProblem::add_block(int dim) {
  if (dim < 1) throw std::invalid_argument("SDP block dimension must be >= 1");
  block_dims_.push_back(dim);
  objective_.push_back(Eigen::MatrixXd::Zero(dim, dim));
  return num_blocks() - 1;
}

int SdpProblem::add_free() {
  ++num_free_;
  free_objective_.conservativeResize(num_free_);
  free_objective_(num_free_ - 1) = 0.0;
  return num_free_ - 1;
}

int SdpProblem::add_constraint(double rhs) {
  rhs_.push_back(rhs);
  entries_.emplace_back();
  free_entries_.emplace_back();
  return num_constraints() - 1;
}

void SdpProblem::add_entry(int con, int block, int i, int j, double v) {
  if (con < 0 || con >= num_constraints()) throw std::out_of_range("constraint index");
  if (block < 0 || block >= num_blocks()) throw std::out_of_range("block index");
  int n = block_dims_[block];
  if (i < 0 || j < 0 || i >= n || j >= n) throw std::out_of_range("entry index");
  if (i > j) std::swap(i, j);
  if (v == 0.0) return;
  double& slot = entries_[con][{block, i, j}];
  slot += v;
  if (slot == 0.0) entries_[con].erase({block, i, j});
}

void SdpProblem::set_constraint(int con, int block, const Eigen::MatrixXd& a) {
  if (block < 0 || block >= num_blocks()) throw std::out_of_range("block index");
  int n = block_dims_[block];
  if (a.rows() != n || a.cols() != n) throw std::invalid_argument("constraint matrix has wrong shape");
  if (!is_symmetric(a, 1e-12)) throw std::invalid_argument("constraint matrix is not symmetric");
  auto& row = entries_.at(con);
  for (auto it = row.begin(); it != row.end();) {
    if (std::get<0>(it->first) == block)
      it = row.erase(it);
    else
      ++it;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      if (a(i, j) != 0.0) row[{block, i, j}] = 0.5 * (a(i, j) + a(j, i));
}

void SdpProblem::add_free_coefficient(int con, int free, double v) {
  if (free < 0 || free >= num_free_) throw std::out_of_range("free variable index");
  if (v == 0.0) return;
  double& slot = free_entries_.at(con)[free];
  slot += v;
  if (slot == 0.0) free_entries_[con].erase(free);
}

void SdpProblem::set_objective(int block, const Eigen::MatrixXd& c) {
  int n = block_dims_.at(block);
  if (c.rows() != n || c.cols() != n) throw std::invalid_argument("objective matrix has wrong shape");
  if (!is_symmetric(c, 1e-12)) throw std::invalid_argument("objective matrix is not symmetric");
  objective_[block] = sym(c);
}

void SdpProblem::add_objective_entry(int block, int i, int j, double v) {
  objective_.at(block)(i, j) += v;
  if (i != j) objective_[block](j, i) += v;
}

void SdpProblem::set_free_objective(int free, double c) { free_objective_(free) = c; }

bool SdpProblem::has_objective() const {
  for (const auto& c : objective_)
    if (c.cwiseAbs().maxCoeff() > 0.0) return true;
  return free_objective_.size() > 0 && free_objective_.cwiseAbs().maxCoeff() > 0.0;
}

Eigen::MatrixXd SdpProblem::constraint_matrix(int con, int block) const {
  int n = block_dims_.at(block);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [key, v] : entries_.at(con)) {
    auto [b, i, j] = key;
    if (b != block) continue;
    a(i, j) = v;
    a(j, i) = v;
  }
  return a;
}

Eigen::VectorXd SdpProblem::apply(const std::vector<Eigen::MatrixXd>& x, const Eigen::VectorXd& f) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_constraints());
  for (int i = 0; i < num_constraints(); ++i) {
    double acc = 0.0;
    for (const auto& [key, v] : entries_[i]) {
      auto [b, r, c] = key;
      acc += (r == c ? 1.0 : 2.0) * v * x[b](r, c);
    }
    for (const auto& [k, v] : free_entries_[i]) acc += v * f(k);
    out(i) = acc;
  }
  return out;
}

void SdpProblem::dump(std::ostream& os) const {
  os << std::setprecision(17);
  os << "blocks " << num_blocks();
  for (int d : block_dims_) os << ' ' << d;
  os << "\nfree " << num_free_ << "\nconstraints " << num_constraints() << '\n';
  for (int i = 0; i < num_constraints(); ++i) {
    os << "row " << i << " rhs " << rhs_[i] << '\n';
    for (const auto& [key, v] : entries_[i]) {
      auto [b, r, c] = key;
      os << "  A " << b << ' ' << r << ' ' << c << ' ' << v << '\n';
    }
    for (const auto& [k, v] : free_entries_[i]) os << "  B " << k << ' ' << v << '\n';
  }
  for (int b = 0; b < num_blocks(); ++b) {
    for (int r = 0; r < block_dims_[b]; ++r)
      for (int c = r; c < block_dims_[b]; ++c)
        if (objective_[b](r, c) != 0.0) os << "C " << b << ' ' << r << ' ' << c << ' ' << objective_[b](r, c) << '\n';
  }
  for (int k = 0; k < num_free_; ++k)
    if (free_objective_(k) != 0.0) os << "c " << k << ' ' << free_objective_(k) << '\n';
}

void dump(std::ostream& os, const SdpSolution& s) {
  os << std::setprecision(17);
  os << "status " << to_string(s.status) << "\niterations " << s.iterations << "\nprimal_objective "
     << s.primal_objective << "\ndual_objective " << s.dual_objective << "\nprimal_residual " << s.primal_residual
     << "\ndual_residual " << s.dual_residual << "\ngap " << s.gap << "\nslack " << s.slack << '\n';
  for (std::size_t b = 0; b < s.blocks.size(); ++b) {
    os << "X " << b << '\n';
    const auto& x = s.blocks[b];
    for (int r = 0; r < x.rows(); ++r) {
      os << ' ';
      for (int c = 0; c < x.cols(); ++c) os << ' ' << x(r, c);
      os << '\n';
    }
  }
  os << "f";
  for (int k = 0; k < s.free.size(); ++k) os << ' ' << s.free(k);
  os << '\n';
  if (!s.message.empty()) os << "message " << s.message << '\n';
}

namespace {

struct Entry {
  int block, r, c;
  double v;
};

// Flattened problem used by the interior point iteration.
struct Core {
  std::vector<int> dims;
  int m = 0;
  int nf = 0;
  std::vector<std::vector<Entry>> rows;
  Eigen::MatrixXd B;  // m x nf
  std::vector<Eigen::MatrixXd> C;
  Eigen::VectorXd c;
  Eigen::VectorXd b;

  int total_dim() const {
    int n = 0;
    for (int d : dims) n += d;
    return n;
  }

  Eigen::VectorXd A(const std::vector<Eigen::MatrixXd>& x) const {
    Eigen::VectorXd out(m);
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      for (const auto& e : rows[i]) acc += (e.r == e.c ? 1.0 : 2.0) * e.v * x[e.block](e.r, e.c);
      out(i) = acc;
    }
    return out;
  }

  std::vector<Eigen::MatrixXd> At(const Eigen::VectorXd& y) const {
    std::vector<Eigen::MatrixXd> out;
    for (int d : dims) out.push_back(Eigen::MatrixXd::Zero(d, d));
    for (int i = 0; i < m; ++i) {
      if (y(i) == 0.0) continue;
      for (const auto& e : rows[i]) {
        out[e.block](e.r, e.c) += y(i) * e.v;
        if (e.r != e.c) out[e.block](e.c, e.r) += y(i) * e.v;
      }
    }
    return out;
  }
};

Core make_core(const SdpProblem& p) {
  Core core;
  core.dims = p.block_dims();
  core.m = p.num_constraints();
  core.nf = p.num_free();
  core.rows.resize(core.m);
  core.B = Eigen::MatrixXd::Zero(core.m, core.nf);
  core.b.resize(core.m);
  for (int i = 0; i < core.m; ++i) {
    for (const auto& [key, v] : p.entries()[i]) {
      auto [blk, r, c] = key;
      core.rows[i].push_back({blk, r, c, v});
    }
    for (const auto& [k, v] : p.free_entries()[i]) core.B(i, k) = v;
    core.b(i) = p.rhs(i);
  }
  core.C = p.objective();
  core.c = p.free_objective();
  return core;
}

// Offset of each (block, r, c) upper-triangular slot in a flattened vector.
std::vector<int> svec_offsets(const std::vector<int>& dims) {
  std::vector<int> off;
  int acc = 0;
  for (int d : dims) {
    off.push_back(acc);
    acc += d * (d + 1) / 2;
  }
  off.push_back(acc);
  return off;
}

int svec_index(const std::vector<int>& off, const std::vector<int>& dims, int block, int r, int c) {
  int n = dims[block];
  return off[block] + r * n - r * (r - 1) / 2 + (c - r);
}

struct Presolve {
  std::vector<int> keep;  // independent row indices
  bool consistent = true;
  Eigen::VectorXd ray;  // y with A*(y) = 0, B'y = 0, b'y > 0 when inconsistent
};

// Removes linearly dependent equality rows; detects inconsistent systems.
Presolve presolve_rows(const Core& core) {
  Presolve out;
  auto off = svec_offsets(core.dims);
  int ncols = off.back() + core.nf;
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(core.m, ncols);
  for (int i = 0; i < core.m; ++i) {
    for (const auto& e : core.rows[i]) R(i, svec_index(off, core.dims, e.block, e.r, e.c)) += (e.r == e.c ? 1.0 : 2.0) * e.v;
    for (int k = 0; k < core.nf; ++k) R(i, off.back() + k) = core.B(i, k);
  }
  if (core.m == 0) return out;
  Eigen::VectorXd scale(core.m);
  for (int i = 0; i < core.m; ++i) {
    double n = R.row(i).norm();
    scale(i) = n > 0 ? 1.0 / n : 1.0;
  }
  Eigen::MatrixXd Rs = scale.asDiagonal() * R;
  Eigen::VectorXd bs = scale.asDiagonal() * core.b;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Rs.transpose());
  qr.setThreshold(1e-11);
  int rank = static_cast<int>(qr.rank());
  auto perm = qr.colsPermutation().indices();
  for (int k = 0; k < rank; ++k) out.keep.push_back(perm(k));
  std::sort(out.keep.begin(), out.keep.end());
  if (rank < core.m) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Rs);
    Eigen::VectorXd sol = cod.solve(bs);
    Eigen::VectorXd resid = bs - Rs * sol;
    if (resid.cwiseAbs().maxCoeff() > 1e-9 * (1.0 + bs.cwiseAbs().maxCoeff())) {
      out.consistent = false;
      out.ray = scale.asDiagonal() * resid;
    }
  }
  return out;
}

Core restrict_rows(const Core& core, const std::vector<int>& keep) {
  Core out;
  out.dims = core.dims;
  out.nf = core.nf;
  out.m = static_cast<int>(keep.size());
  out.B.resize(out.m, core.nf);
  out.b.resize(out.m);
  for (int k = 0; k < out.m; ++k) {
    out.rows.push_back(core.rows[keep[k]]);
    out.B.row(k) = core.B.row(keep[k]);
    out.b(k) = core.b(keep[k]);
  }
  out.C = core.C;
  out.c = core.c;
  return out;
}

struct Scaling {
  Eigen::MatrixXd W, G, Ginv, V;
};

// Nesterov-Todd scaling point: W S W = X.
Scaling nt_scaling(const Eigen::MatrixXd& X, const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(X);
  Eigen::VectorXd lx = ex.eigenvalues().cwiseMax(1e-300);
  Eigen::MatrixXd Xh = ex.eigenvectors() * lx.cwiseSqrt().asDiagonal() * ex.eigenvectors().transpose();
  Eigen::MatrixXd T = sym(Xh * S * Xh);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> et(T);
  Eigen::VectorXd lt = et.eigenvalues().cwiseMax(1e-300);
  Eigen::MatrixXd Tih = et.eigenvectors() * lt.cwiseSqrt().cwiseInverse().asDiagonal() * et.eigenvectors().transpose();
  Scaling s;
  s.W = sym(Xh * Tih * Xh);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ew(s.W);
  Eigen::VectorXd lw = ew.eigenvalues().cwiseMax(1e-300);
  s.G = ew.eigenvectors() * lw.cwiseSqrt().asDiagonal() * ew.eigenvectors().transpose();
  s.Ginv = ew.eigenvectors() * lw.cwiseSqrt().cwiseInverse().asDiagonal() * ew.eigenvectors().transpose();
  s.V = sym(s.G * S * s.G);
  return s;
}

// Solves V D + D V = R for symmetric D.
Eigen::MatrixXd lyapunov(const Eigen::MatrixXd& V, const Eigen::MatrixXd& R) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V);
  const auto& Q = es.eigenvectors();
  const auto& l = es.eigenvalues();
  Eigen::MatrixXd Rt = Q.transpose() * R * Q;
  for (int i = 0; i < Rt.rows(); ++i)
    for (int j = 0; j < Rt.cols(); ++j) Rt(i, j) /= (l(i) + l(j));
  return sym(Q * Rt * Q.transpose());
}

// Largest alpha in (0, 1] with X + alpha dX >= 0 scaled by tau.
double step_length(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dX, double tau) {
  Eigen::LLT<Eigen::MatrixXd> llt(X);
  double lmin;
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd T1 = L.triangularView<Eigen::Lower>().solve(dX);
    Eigen::MatrixXd T1t = T1.transpose();
    Eigen::MatrixXd T = L.triangularView<Eigen::Lower>().solve(T1t);
    lmin = min_eigenvalue(T);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X);
    Eigen::VectorXd l = es.eigenvalues().cwiseMax(1e-300);
    Eigen::MatrixXd Xih = es.eigenvectors() * l.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    lmin = min_eigenvalue(Xih * dX * Xih);
  }
  if (lmin >= 0.0) return 1.0;
  return std::min(1.0, -tau / lmin);
}

double inf_norm(const std::vector<Eigen::MatrixXd>& blocks) {
  double m = 0.0;
  for (const auto& b : blocks)
    if (b.size()) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double merit_of(double a, double b, double c) { return std::max({a, b, c}); }

struct IpmResult {
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
  std::vector<Eigen::MatrixXd> X, S;
  Eigen::VectorXd y, f;
  double pobj = 0, dobj = 0, rp = 0, rd = 0, gap = 0;
  std::string message;
};

IpmResult interior_point(const Core& core, const SdpOptions& opts) {
  const int nb = static_cast<int>(core.dims.size());
  const int m = core.m;
  const int nf = core.nf;
  const int N = core.total_dim();

  double bnorm = inf_norm(core.b);
  double cnorm = std::max(inf_norm(core.C), inf_norm(core.c));
  double anorm = 0.0;
  for (const auto& row : core.rows)
    for (const auto& e : row) anorm = std::max(anorm, std::abs(e.v));

  double xi = std::max(10.0, std::sqrt(static_cast<double>(N)) * bnorm / std::max(anorm, 1e-12));
  double eta = std::max(10.0, std::sqrt(static_cast<double>(N)) * std::max(cnorm, anorm));
  xi = std::min(xi, 1e4);
  eta = std::min(eta, 1e4);

  IpmResult res;
  for (int d : core.dims) {
    res.X.push_back(xi * Eigen::MatrixXd::Identity(d, d));
    res.S.push_back(eta * Eigen::MatrixXd::Identity(d, d));
  }
  res.y = Eigen::VectorXd::Zero(m);
  res.f = Eigen::VectorXd::Zero(nf);

  const double tau = opts.step_fraction;
  double prev_merit = std::numeric_limits<double>::infinity();
  double best_merit = std::numeric_limits<double>::infinity();
  IpmResult best;
  int stall = 0;

  for (int it = 0; it <= opts.max_iterations; ++it) {
    res.iterations = it;
    auto& X = res.X;
    auto& S = res.S;
    auto& y = res.y;
    auto& f = res.f;

    Eigen::VectorXd rp = core.b - core.A(X) - core.B * f;
    auto Aty = core.At(y);
    std::vector<Eigen::MatrixXd> Rd(nb);
    for (int j = 0; j < nb; ++j) Rd[j] = core.C[j] - Aty[j] - S[j];
    Eigen::VectorXd rc = core.c - core.B.transpose() * y;

    double xs = 0.0, pobj = core.c.dot(f), dobj = core.b.dot(y);
    for (int j = 0; j < nb; ++j) {
      xs += inner(X[j], S[j]);
      pobj += inner(core.C[j], X[j]);
    }
    double mu = xs / N;
    res.pobj = pobj;
    res.dobj = dobj;
    res.rp = inf_norm(rp);
    res.rd = std::max(inf_norm(Rd), inf_norm(rc));
    res.gap = xs;

    double rel_p = res.rp / (1.0 + bnorm);
    double rel_d = res.rd / (1.0 + cnorm);
    double rel_g = xs / (1.0 + std::abs(pobj) + std::abs(dobj));
    if (opts.verbose)
      std::cerr << "it " << it << " pobj " << pobj << " dobj " << dobj << " rp " << rel_p << " rd " << rel_d
                << " gap " << rel_g << '\n';
    if (rel_p <= opts.tolerance && rel_d <= opts.tolerance && rel_g <= opts.tolerance) {
      res.converged = true;
      res.message = "converged";
      return res;
    }
    double merit = merit_of(rel_p, rel_d, rel_g);
    if (merit < best_merit) {
      best_merit = merit;
      best = res;
    }
    auto finish_with_best = [&](const std::string& why) {
      if (best_merit <= opts.acceptable_tolerance) {
        IpmResult out = best;
        out.converged = true;
        out.iterations = it;
        out.message = "converged to reduced accuracy (" + why + ")";
        return out;
      }
      res.message = why;
      return res;
    };
    if (it == opts.max_iterations) return finish_with_best("iteration limit reached");
    double xnorm = inf_norm(X), ynorm = inf_norm(y);
    if (xnorm > 1e13 || ynorm > 1e13 || !std::isfinite(xs) || !std::isfinite(merit)) {
      res.diverged = true;
      return finish_with_best("iterates diverged");
    }
    if (merit > 0.999 * prev_merit) {
      if (++stall > 8) return finish_with_best("stalled");
    } else {
      stall = 0;
    }
    prev_merit = std::min(prev_merit, merit);

    std::vector<Scaling> sc(nb);
    for (int j = 0; j < nb; ++j) sc[j] = nt_scaling(X[j], S[j]);
    if (opts.verbose)
      for (int j = 0; j < nb; ++j)
        std::cerr << "   blk " << j << " eigX " << min_eigenvalue(X[j]) << " eigS " << min_eigenvalue(S[j]) << " WSW-X "
                  << (sc[j].W * S[j] * sc[j].W - X[j]).norm() << '\n';

    // Schur complement M_ik = <A_i, W A_k W>.
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    {
      std::vector<std::vector<int>> rows_in_block(nb);
      for (int i = 0; i < m; ++i) {
        std::vector<bool> seen(nb, false);
        for (const auto& e : core.rows[i])
          if (!seen[e.block]) {
            seen[e.block] = true;
            rows_in_block[e.block].push_back(i);
          }
      }
      for (int j = 0; j < nb; ++j) {
        const auto& W = sc[j].W;
        int d = core.dims[j];
        for (int k : rows_in_block[j]) {
          Eigen::MatrixXd T = Eigen::MatrixXd::Zero(d, d);
          for (const auto& e : core.rows[k]) {
            if (e.block != j) continue;
            if (e.r == e.c) {
              T.noalias() += e.v * W.col(e.r) * W.col(e.r).transpose();
            } else {
              T.noalias() += e.v * (W.col(e.r) * W.col(e.c).transpose() + W.col(e.c) * W.col(e.r).transpose());
            }
          }
          for (int i : rows_in_block[j]) {
            if (i < k) continue;
            double acc = 0.0;
            for (const auto& e : core.rows[i]) {
              if (e.block != j) continue;
              acc += (e.r == e.c ? 1.0 : 2.0) * e.v * T(e.r, e.c);
            }
            M(i, k) += acc;
            if (i != k) M(k, i) += acc;
          }
        }
      }
    }

    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + nf, m + nf);
    K.topLeftCorner(m, m) = M;
    K.topRightCorner(m, nf) = core.B;
    K.bottomLeftCorner(nf, m) = core.B.transpose();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
    double kscale = std::max(1.0, K.cwiseAbs().maxCoeff());
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_reg;
    bool use_reg = false;

    std::vector<Eigen::MatrixXd> WRdW(nb);
    for (int j = 0; j < nb; ++j) WRdW[j] = sc[j].W * Rd[j] * sc[j].W;
    Eigen::VectorXd A_WRdW = core.A(WRdW);

    auto solve_kkt = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
      if (!use_reg) {
        Eigen::VectorXd sol = lu.solve(rhs);
        double err = (K * sol - rhs).cwiseAbs().maxCoeff();
        if (std::isfinite(err) && err <= 1e-9 * (1.0 + rhs.cwiseAbs().maxCoeff())) return sol;
        use_reg = true;
        Eigen::MatrixXd Kr = K;
        for (int i = 0; i < m; ++i) Kr(i, i) += 1e-13 * kscale;
        for (int i = m; i < m + nf; ++i) Kr(i, i) -= 1e-13 * kscale;
        lu_reg.compute(Kr);
      }
      Eigen::VectorXd sol = lu_reg.solve(rhs);
      // One step of iterative refinement against the exact matrix.
      sol += lu_reg.solve(rhs - K * sol);
      return sol;
    };

    struct Dir {
      std::vector<Eigen::MatrixXd> dX, dS;
      Eigen::VectorXd dy, df;
    };
    auto direction = [&](const std::vector<Eigen::MatrixXd>& R) {
      Dir dir;
      std::vector<Eigen::MatrixXd> Rc(nb);
      for (int j = 0; j < nb; ++j) Rc[j] = sc[j].G * lyapunov(sc[j].V, R[j]) * sc[j].G;
      Eigen::VectorXd h = rp - core.A(Rc) + A_WRdW;
      Eigen::VectorXd rhs(m + nf);
      rhs << h, rc;
      Eigen::VectorXd sol = solve_kkt(rhs);
      dir.dX.resize(nb);
      dir.dS.resize(nb);
      // Iterative refinement against the unassembled operator.
      for (int pass = 0; pass < 3; ++pass) {
        dir.dy = sol.head(m);
        dir.df = sol.tail(nf);
        auto Atdy = core.At(dir.dy);
        for (int j = 0; j < nb; ++j) {
          dir.dS[j] = sym(Rd[j] - Atdy[j]);
          dir.dX[j] = sym(Rc[j] - sc[j].W * dir.dS[j] * sc[j].W);
        }
        Eigen::VectorXd e(m + nf);
        e << rp - core.A(dir.dX) - core.B * dir.df, rc - core.B.transpose() * dir.dy;
        if (e.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + rhs.cwiseAbs().maxCoeff())) break;
        sol += solve_kkt(e);
      }
      return dir;
    };

    // Predictor.
    std::vector<Eigen::MatrixXd> R(nb);
    for (int j = 0; j < nb; ++j) R[j] = -2.0 * sc[j].V * sc[j].V;
    Dir aff = direction(R);
    double ap = 1.0, ad = 1.0;
    for (int j = 0; j < nb; ++j) {
      ap = std::min(ap, step_length(X[j], aff.dX[j], 1.0));
      ad = std::min(ad, step_length(S[j], aff.dS[j], 1.0));
    }
    double mu_aff = 0.0;
    for (int j = 0; j < nb; ++j) mu_aff += inner(X[j] + ap * aff.dX[j], S[j] + ad * aff.dS[j]);
    mu_aff /= N;
    double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // Corrector.
    for (int j = 0; j < nb; ++j) {
      Eigen::MatrixXd dXt = sc[j].Ginv * aff.dX[j] * sc[j].Ginv;
      Eigen::MatrixXd dSt = sc[j].G * aff.dS[j] * sc[j].G;
      R[j] = 2.0 * sigma * mu * Eigen::MatrixXd::Identity(core.dims[j], core.dims[j]) - 2.0 * sc[j].V * sc[j].V -
             (dXt * dSt + dSt * dXt);
    }
    Dir cor = direction(R);
    ap = 1.0;
    ad = 1.0;
    for (int j = 0; j < nb; ++j) {
      ap = std::min(ap, step_length(X[j], cor.dX[j], tau));
      ad = std::min(ad, step_length(S[j], cor.dS[j], tau));
    }
    if (opts.verbose) std::cerr << "   ap " << ap << " ad " << ad << " sigma " << sigma << '\n';
    for (int j = 0; j < nb; ++j) {
      X[j] = sym(X[j] + ap * cor.dX[j]);
      S[j] = sym(S[j] + ad * cor.dS[j]);
    }
    f += ap * cor.df;
    y += ad * cor.dy;
  }
  res.message = "iteration limit reached";
  return res;
}

SdpSolution package(const Core& core, const IpmResult& r, const std::vector<int>& keep, int m_full) {
  SdpSolution s;
  s.blocks = r.X;
  s.dual_slack = r.S;
  s.free = r.f;
  s.dual = Eigen::VectorXd::Zero(m_full);
  for (std::size_t k = 0; k < keep.size(); ++k) s.dual(keep[k]) = r.y(static_cast<int>(k));
  s.primal_objective = r.pobj;
  s.dual_objective = r.dobj;
  s.gap = r.gap;
  s.iterations = r.iterations;
  s.message = r.message;
  (void)core;
  return s;
}

void fill_residuals(const SdpProblem& p, SdpSolution& s) {
  Eigen::VectorXd b(p.num_constraints());
  for (int i = 0; i < p.num_constraints(); ++i) b(i) = p.rhs(i);
  s.primal_residual = inf_norm(Eigen::VectorXd(b - p.apply(s.blocks, s.free)));
  Core core = make_core(p);
  auto Aty = core.At(s.dual);
  double rd = 0.0;
  for (int j = 0; j < p.num_blocks(); ++j)
    rd = std::max(rd, (core.C[j] - Aty[j] - s.dual_slack[j]).cwiseAbs().maxCoeff());
  if (core.nf) rd = std::max(rd, inf_norm(Eigen::VectorXd(core.c - core.B.transpose() * s.dual)));
  s.dual_residual = rd;
}

}  // namespace

SdpSolution solve_optimization(const SdpProblem& p, const SdpOptions& opts) {
  if (p.num_blocks() == 0) throw std::invalid_argument("SDP needs at least one block");
  Core core = make_core(p);
  Presolve pre = presolve_rows(core);
  if (!pre.consistent) {
    SdpSolution s;
    for (int d : p.block_dims()) {
      s.blocks.push_back(Eigen::MatrixXd::Zero(d, d));
      s.dual_slack.push_back(Eigen::MatrixXd::Zero(d, d));
    }
    s.free = Eigen::VectorXd::Zero(p.num_free());
    s.dual = Eigen::VectorXd::Zero(p.num_constraints());
    s.status = SdpStatus::Infeasible;
    s.certificate = pre.ray;
    s.certificate_value = core.b.dot(pre.ray) / std::max(1.0, inf_norm(pre.ray));
    s.message = "linear equality system is inconsistent";
    fill_residuals(p, s);
    return s;
  }
  Core reduced = restrict_rows(core, pre.keep);
  IpmResult r = interior_point(reduced, opts);
  SdpSolution s = package(reduced, r, pre.keep, p.num_constraints());
  fill_residuals(p, s);
  s.status = r.converged ? SdpStatus::Feasible : SdpStatus::MaxIter;
  s.converged = r.converged;
  return s;
}

SdpSolution solve_feasibility(const SdpProblem& p, const SdpOptions& opts) {
  if (p.num_blocks() == 0) throw std::invalid_argument("SDP needs at least one block");
  // X_j = X'_j + t I, t + s = 1, minimize -t.
  SdpProblem q(p.block_dims(), p.num_free());
  int sblock = q.add_block(1);
  int tvar = q.add_free();
  for (int i = 0; i < p.num_constraints(); ++i) {
    int row = q.add_constraint(p.rhs(i));
    double trace = 0.0;
    for (const auto& [key, v] : p.entries()[i]) {
      auto [b, r, c] = key;
      q.add_entry(row, b, r, c, v);
      if (r == c) trace += v;
    }
    for (const auto& [k, v] : p.free_entries()[i]) q.add_free_coefficient(row, k, v);
    q.add_free_coefficient(row, tvar, trace);
  }
  int cap = q.add_constraint(1.0);
  q.add_entry(cap, sblock, 0, 0, 1.0);
  q.add_free_coefficient(cap, tvar, 1.0);
  q.set_free_objective(tvar, -1.0);

  SdpSolution inner_sol = solve_optimization(q, opts);

  SdpSolution s;
  s.iterations = inner_sol.iterations;
  s.converged = inner_sol.converged;
  s.message = inner_sol.message;
  s.free = inner_sol.free.head(p.num_free());
  double t = inner_sol.free.size() > tvar ? inner_sol.free(tvar) : 0.0;
  s.slack = t;
  for (int j = 0; j < p.num_blocks(); ++j) {
    int d = p.block_dim(j);
    s.blocks.push_back(sym(inner_sol.blocks[j] + t * Eigen::MatrixXd::Identity(d, d)));
    s.dual_slack.push_back(inner_sol.dual_slack[j]);
  }
  s.dual = inner_sol.dual.head(p.num_constraints());
  s.primal_objective = t;
  s.dual_objective = -inner_sol.dual_objective;
  s.gap = inner_sol.gap;
  fill_residuals(p, s);

  // Certificate quality on the original rows.
  Core core = make_core(p);
  Eigen::VectorXd y = inner_sol.status == SdpStatus::Infeasible ? Eigen::VectorXd(inner_sol.certificate.head(p.num_constraints()))
                                                                : s.dual;
  auto Aty = core.At(y);
  double viol = 0.0;
  for (const auto& a : Aty) viol = std::max(viol, max_eigenvalue(a));
  if (core.nf) viol = std::max(viol, inf_norm(Eigen::VectorXd(core.B.transpose() * y)));
  double ynorm = std::max(1.0, inf_norm(y));
  s.certificate = y;
  s.certificate_value = core.b.dot(y) / ynorm;
  s.certificate_residual = viol / ynorm;

  if (inner_sol.status == SdpStatus::Infeasible) {
    s.status = SdpStatus::Infeasible;
    s.message = inner_sol.message;
    return s;
  }
  if (inner_sol.status != SdpStatus::Feasible) {
    s.status = SdpStatus::MaxIter;
    return s;
  }
  if (t >= opts.feasible_slack) {
    s.status = SdpStatus::Feasible;
  } else if (s.certificate_value > opts.infeasible_margin && s.certificate_residual < opts.certificate_tolerance) {
    s.status = SdpStatus::Infeasible;
    s.message = "Farkas certificate found";
  } else {
    s.status = SdpStatus::MaxIter;
    s.message = "slack below threshold but certificate inconclusive";
  }
  return s;
}

SdpSolution solve(const SdpProblem& p, const SdpOptions& opts) {
  if (!p.has_objective()) return solve_feasibility(p, opts);
  SdpSolution s = solve_optimization(p, opts);
  if (s.status == SdpStatus::Feasible || s.status == SdpStatus::Infeasible) return s;
  SdpProblem q = p;
  for (int j = 0; j < q.num_blocks(); ++j) q.set_objective(j, Eigen::MatrixXd::Zero(q.block_dim(j), q.block_dim(j)));
  for (int k = 0; k < q.num_free(); ++k) q.set_free_objective(k, 0.0);
  SdpSolution phase1 = solve_feasibility(q, opts);
  if (phase1.status == SdpStatus::Infeasible) return phase1;
  s.message += "; feasible set nonempty, objective may be unbounded";
  return s;
}

}  // namespace convobs
