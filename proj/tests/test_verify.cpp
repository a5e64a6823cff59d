#include <doctest.h>

#include <cmath>
#include <mutex>

#include "convobs/benchmarks.hpp"
#include "convobs/synth.hpp"
#include "convobs/verify.hpp"
#include "oracles/finite_diff.hpp"

using namespace convobs;

namespace {

Polynomial var(const std::string& n) { return Polynomial::variable(n); }

VectorXd v(std::initializer_list<double> l) {
  VectorXd out(static_cast<int>(l.size()));
  int i = 0;
  for (double d : l) out(i++) = d;
  return out;
}

// Solves A' M + M A = -I by Kronecker vectorization.
MatrixXd lyapunov(const MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  MatrixXd I = MatrixXd::Identity(n, n), K = MatrixXd::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n) += A(j, i) * I;  // (I kron A' + A' kron I)
      K.block(i * n, j * n, n, n) += (i == j ? 1.0 : 0.0) * A.transpose();
    }
  VectorXd rhs = -Eigen::Map<const VectorXd>(I.data(), n * n);
  VectorXd m = K.fullPivLu().solve(rhs);
  MatrixXd M = Eigen::Map<MatrixXd>(m.data(), n, n);
  return 0.5 * (M + M.transpose());
}

double eig_min(const MatrixXd& S) { return Eigen::SelfAdjointEigenSolver<MatrixXd>(S).eigenvalues().minCoeff(); }
double eig_max(const MatrixXd& S) { return Eigen::SelfAdjointEigenSolver<MatrixXd>(S).eigenvalues().maxCoeff(); }

// x' = A11 x + A12 y, y' = A21 x + A22 y with x in R^2, y scalar.
struct Lti {
  MatrixXd A11 = (MatrixXd(2, 2) << 0, 1, -1, 0).finished();
  VectorXd A12 = v({0.5, 0.0});
  MatrixXd A21 = (MatrixXd(1, 2) << 1, 0).finished();
  double A22 = -0.2;
  VectorXd L = v({-3.0, -2.0});

  MatrixXd F() const { return A11 + L * A21; }

  SystemModel model() const {
    PolyVector fx(2);
    for (int i = 0; i < 2; ++i) fx[i] = var("x1") * A11(i, 0) + var("x2") * A11(i, 1) + var("y") * A12(i);
    PolyVector fy = {var("x1") * A21(0, 0) + var("x2") * A21(0, 1) + var("y") * A22};
    return SystemModel::polynomial("lti", {"x1", "x2"}, {"y"}, {}, fx, fy);
  }

  // phi = x + L y, f_z = F x + (A12 + L A22) y.
  ObserverSpec spec(double sign = 1.0) const {
    MatrixXd Fm = F();
    VectorXd g = A12 + L * A22;
    PolyVector fz(2), varphi(2);
    for (int i = 0; i < 2; ++i) {
      fz[i] = (var("x1") * Fm(i, 0) + var("x2") * Fm(i, 1) + var("y") * g(i)) * sign;
      varphi[i] = var("y") * L(i);
    }
    ObserverSpec s =
        make_affine_spec("lti", MatrixXd::Identity(2, 2), varphi, fz, {"x1", "x2"}, {"y"}, {}, 2, 0.0, 1.0);
    s.metric = lyapunov(Fm);
    return s;
  }
};

Region box(const SystemModel& m, double r, int n = 1000) {
  const int d = m.nx() + m.ny();
  return box_region(m, 0, VectorXd::Constant(d, -r), VectorXd::Constant(d, r), n);
}

}  // namespace

TEST_CASE("status classification and tolerance") {
  CHECK(classify(-1e-3, 1e-6) == CheckStatus::Pass);
  CHECK(classify(5e-7, 1e-6) == CheckStatus::BoundaryPass);
  CHECK(classify(-5e-7, 1e-6) == CheckStatus::BoundaryPass);
  CHECK(classify(2e-6, 1e-6) == CheckStatus::Fail);
  CHECK(classify(std::nan(""), 1e-6) == CheckStatus::Fail);
  CHECK(check_tolerance(0.0) == 1e-9);
  CHECK(check_tolerance(2.0) == doctest::Approx(1e-9 + 2e-6));
  for (auto s : {CheckStatus::Pass, CheckStatus::BoundaryPass, CheckStatus::Fail, CheckStatus::PreconditionFail})
    CHECK(!to_string(s).empty());
}

TEST_CASE("box regions start at the center and respect the domain") {
  Benchmark b = benchmark("maglev");
  Region r = box_region(*b.model, 0, b.region_lo, b.region_hi, 300);
  REQUIRE(r.size() == 300);
  CHECK(r[0].stacked().head(3).isApprox(0.5 * (b.region_lo + b.region_hi)));
  for (const auto& p : r) CHECK(p.y(0) < 0.005);
}

TEST_CASE("H1 on an affine spec is k minus twice the smallest eigenvalue of P") {
  MatrixXd P = v({2.0, 3.0}).asDiagonal();
  ObserverSpec s = make_affine_spec("a", P, {Polynomial(), Polynomial()}, {var("x1"), var("x2")}, {"x1", "x2"}, {"y"},
                                    {}, 2, 0.0, 1.0);
  Lti sys;
  CheckReport r = check_H1(s, box(sys.model(), 2.0, 50));
  CHECK(r.status == CheckStatus::Pass);
  CHECK(r.worst_margin == doctest::Approx(1.0 - 4.0));
}

TEST_CASE("H1 fails for a cubic map near the origin") {
  SystemModel m = SystemModel::polynomial("cube", {"x"}, {"y"}, {}, {-var("x")}, {var("x")});
  Polynomial x = var("x");
  ObserverSpec s = make_polynomial_spec("cube", {x * x * x}, {x * x * x * -3.0}, {"x"}, {"y"}, {}, 1,
                                        MatrixXd::Identity(1, 1), 0.0, 0.05);
  CheckReport r = check_H1(s, box(m, 1.0, 200));
  CHECK(r.status == CheckStatus::Fail);
  CHECK(r.worst_margin == doctest::Approx(0.05));
  CHECK(r.worst_point.norm() < 1e-12);
  CHECK(r.worst_margin > r.tolerance);
}

TEST_CASE("the polynomial benchmark four-digit reference solution") {
  Benchmark b = benchmark("poly19");
  Region reg = b.region(1000);
  CheckReport h1 = check_H1(b.reference, reg);
  CHECK(h1.status == CheckStatus::Pass);
  CHECK(h1.worst_margin <= 0.1 - 2 * 0.6369 + 1e-9);
  CheckReport h2 = check_H2(b.reference, *b.model, reg);
  CHECK(h2.status == CheckStatus::Pass);
  CHECK(h2.worst_margin == 0.0);
  CHECK(h2.message.find("exact") != std::string::npos);

  // At the origin F = P A + dvarphi C is lower triangular; the zero
  // direction of F + F' + 2P comes from P11 + P22 differing by 1e-4.
  MatrixXd F = (MatrixXd(2, 2) << 0.6370 - 2.1872, 0, 0.6369 - 0.6368, -0.6369).finished();
  MatrixXd P = v({0.6370, 0.6369}).asDiagonal();
  const double origin = eig_max(F + F.transpose() + 2 * P);
  CheckReport h3 = check_H3(b.reference, reg);
  CHECK(h3.status == CheckStatus::BoundaryPass);
  CHECK(h3.worst_margin == doctest::Approx(origin).epsilon(1e-6));
  CHECK(h3.worst_point.norm() < 1e-12);

  CheckReport a2 = check_A2(b.reference, *b.model, reg, 1.0);
  CHECK(a2.ok());
  // A = P^-1 F P^-1; the scalar bound pays for P's anisotropy.
  MatrixXd Mi = P.inverse();
  double origin_a2 = eig_max(Mi * F * Mi + (Mi * F * Mi).transpose()) + 2.0 * eig_min(Mi);
  CHECK(a2.worst_margin >= origin_a2 - 1e-9);
}

TEST_CASE("H2 residuals") {
  SUBCASE("zero system") {
    SystemModel m =
        SystemModel::polynomial("zero", {"x1", "x2"}, {"y"}, {}, {Polynomial(), Polynomial()}, {Polynomial()});
    ObserverSpec s = make_affine_spec("zero", MatrixXd::Identity(2, 2), {Polynomial(), Polynomial()},
                                      {Polynomial(), Polynomial()}, {"x1", "x2"}, {"y"}, {}, 2, 0.0, 1.0);
    CheckReport r = check_H2(s, m, box(m, 1.0, 10));
    CHECK(r.status == CheckStatus::Pass);
    CHECK(r.worst_margin == 0.0);
  }
  SUBCASE("perturbed coefficient") {
    Benchmark b = benchmark("poly19");
    ObserverSpec s = b.reference;
    PolyVector fz = *s.fz_poly;
    fz[1] += var("x2") * 1e-3;
    ObserverSpec t = make_affine_spec("perturbed", s.phi.P(), {var("y") * -2.1872, var("y") * -0.6368}, fz,
                                      {"x1", "x2"}, {"y"}, {}, 2, 1.0, 0.1);
    CheckReport r = check_H2(t, *b.model, b.region(100));
    CHECK(r.status == CheckStatus::Fail);
    CHECK(r.worst_margin == doctest::Approx(1e-3));
  }
  SUBCASE("closed-form pendulum") {
    Benchmark b = benchmark("cartpend");
    CheckReport r = check_H2(b.reference, *b.model, b.region(1000));
    CHECK(r.ok());
    CHECK(r.worst_margin < 1e-9);
    CHECK(r.samples == 1000);
  }
}

TEST_CASE("A2 on a linear plant with a Lyapunov metric") {
  Lti sys;
  SystemModel m = sys.model();
  ObserverSpec s = sys.spec();
  // M F + F' M = -I, so the margin is -1 + 2 lambda min eig(M).
  const double lam = 0.25 / eig_min(s.metric);
  CheckReport r = check_A2(s, m, box(m, 3.0), lam);
  CHECK(r.status == CheckStatus::Pass);
  CHECK(r.worst_margin == doctest::Approx(-0.5).epsilon(1e-9));

  CheckReport flipped = check_A2(sys.spec(-1.0), m, box(m, 3.0), 0.0);
  CHECK(flipped.status == CheckStatus::Fail);
  CHECK(flipped.worst_margin == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("A2 with a state-dependent metric uses its derivative along the flow") {
  Lti sys;
  SystemModel m = sys.model();
  ObserverSpec s = sys.spec();
  // M(xi) = (1 + xi1^2) M0; with the constant metric the margin is -1 at
  // every point, so the derivative term must show up in the worst value.
  MatrixXd M0 = s.metric;
  MetricField Mf = [M0](const VectorXd& xi, const VectorXd&) { return MatrixXd((1.0 + xi(0) * xi(0)) * M0); };
  Region reg = box(m, 1.0, 200);
  CheckReport r = check_A2(s, m, reg, 0.0, Mf);
  double worst = -1e300;
  for (const auto& p : reg) {
    VectorXd xi = s.phi(p.xe, p.y);
    VectorXd fz = s.fz(p.xe, p.y, p.u);
    double scale = 1.0 + xi(0) * xi(0);
    MatrixXd dM = 2.0 * xi(0) * fz(0) * M0;
    MatrixXd A = scale * M0 * sys.F();
    worst = std::max(worst, eig_max(dM + A + A.transpose()));
  }
  CHECK(r.worst_margin == doctest::Approx(worst).epsilon(1e-6));
}

TEST_CASE("H3 and H4 preconditions and values") {
  Lti sys;
  SystemModel m = sys.model();
  ObserverSpec s = sys.spec();
  CHECK(check_H4(s, box(m, 1.0, 10)).status == CheckStatus::PreconditionFail);

  // Scalar F = -1, Phi_x = 1, r = 1, P = 1: block [[2, 0.5], [0.5, 1]].
  SystemModel sc = SystemModel::polynomial("sc", {"x"}, {"y"}, {}, {-var("x")}, {var("x")});
  ObserverSpec t = make_affine_spec("sc", MatrixXd::Identity(1, 1), {Polynomial()}, {-var("x")}, {"x"}, {"y"}, {}, 1,
                                    0.0, 1.0);
  t.r = 1.0;
  t.P_metric = MatrixXd::Identity(1, 1);
  CheckReport h4 = check_H4(t, box(sc, 1.0, 20));
  CHECK(h4.status == CheckStatus::Pass);
  CHECK(h4.worst_margin == doctest::Approx(-(1.5 - std::sqrt(0.5))).epsilon(1e-12));

  ObserverSpec u = make_affine_spec("sc+", MatrixXd::Identity(1, 1), {Polynomial()}, {var("x")}, {"x"}, {"y"}, {}, 1,
                                    0.0, 1.0);
  u.r = 1.0;
  u.P_metric = MatrixXd::Identity(1, 1);
  CHECK(check_H4(u, box(sc, 1.0, 20)).status == CheckStatus::Fail);

  Benchmark cp = benchmark("cartpend");
  ObserverSpec bent = cp.reference;
  bent.phi = Transformation::general(
      2, 2, 2, [](const VectorXd& x, const VectorXd&) { return VectorXd(x.array().pow(3) + x.array()); },
      [](const VectorXd& x, const VectorXd&) { return MatrixXd((3 * x.array().square() + 1).matrix().asDiagonal()); },
      [](const VectorXd&, const VectorXd&) { return MatrixXd::Zero(2, 2).eval(); });
  bent.Q = MatrixXd();
  CHECK(check_H3(bent, cp.region(10)).status == CheckStatus::PreconditionFail);
}

TEST_CASE("pendulum PDE") {
  CartpendParams p;
  CheckReport ok = cartpend_pde_check(p, p.lambda);
  CHECK(ok.status == CheckStatus::Pass);
  CHECK(ok.samples == 200);
  CHECK(ok.worst_margin < 1e-8);
  CHECK(cartpend_pde_check(p, 2 * p.lambda).status == CheckStatus::Fail);

  CartpendParams flat = p;
  flat.b = 0.0;
  CHECK(cartpend_pde_check(flat, flat.lambda).worst_margin <= 1e-15);
  for (double y1 : {-3.0, -1.0, 0.0, 0.5, 2.9}) {
    VectorXd q = v({y1, 0.4});
    CHECK(cartpend_varphi(q, flat)(0) == doctest::Approx(-flat.lambda * y1).epsilon(1e-14));
  }
}

TEST_CASE("transverse contraction") {
  SUBCASE("scalar decay has margin -2") {
    VectorField f{[](const VectorXd& x) { return VectorXd(-x); },
                  [](const VectorXd&) { return MatrixXd(-MatrixXd::Identity(1, 1)); }};
    TransverseWitness w;
    w.psi_jacobian = [](const VectorXd&) { return MatrixXd::Identity(1, 1).eval(); };
    w.metric = [](const VectorXd&) { return MatrixXd::Identity(1, 1).eval(); };
    CheckReport r = check_transverse(f, w, {v({-1.0}), v({0.0}), v({2.0})});
    CHECK(r.status == CheckStatus::Pass);
    CHECK(r.worst_margin == doctest::Approx(-2.0));
  }
  SUBCASE("identity witness on a rotation fails") {
    MatrixXd R = (MatrixXd(2, 2) << 0, 1, -1, 0).finished();
    VectorField f{[R](const VectorXd& x) { return VectorXd(R * x); }, [R](const VectorXd&) { return R; }};
    TransverseWitness w;
    w.psi_jacobian = [](const VectorXd&) { return MatrixXd::Identity(2, 2).eval(); };
    w.metric = [](const VectorXd&) { return MatrixXd::Identity(2, 2).eval(); };
    CheckReport r = check_transverse(f, w, {v({1.0, 0.0}), v({0.3, -2.0})});
    CHECK(r.status == CheckStatus::Fail);
  }
  SUBCASE("observer coordinates of a contracting linear design") {
    // chi = (z, y) with z = x + L y; psi = [I 0], metric blkdiag(M, I).
    Lti sys;
    MatrixXd F = sys.F();
    VectorXd g = sys.A12 + sys.L * sys.A22;
    MatrixXd J = MatrixXd::Zero(3, 3);
    J.topLeftCorner(2, 2) = F;
    J.topRightCorner(2, 1) = g - F * sys.L;
    J.bottomLeftCorner(1, 2) = sys.A21;
    J(2, 2) = sys.A22 - (sys.A21 * sys.L)(0);
    VectorField f{[J](const VectorXd& c) { return VectorXd(J * c); }, [J](const VectorXd&) { return J; }};
    MatrixXd M = sys.spec().metric;
    TransverseWitness w;
    w.psi_jacobian = [](const VectorXd&) {
      MatrixXd p = MatrixXd::Zero(2, 3);
      p.leftCols(2).setIdentity();
      return p;
    };
    w.metric = [M](const VectorXd&) {
      MatrixXd P = MatrixXd::Identity(3, 3);
      P.topLeftCorner(2, 2) = M;
      return P;
    };
    std::vector<VectorXd> pts;
    for (int i = 1; i <= 50; ++i) pts.push_back(halton(i, 3).array() * 4.0 - 2.0);
    CheckReport r = check_transverse(f, w, pts);
    CHECK(r.status == CheckStatus::Pass);
    CHECK(r.worst_margin == doctest::Approx(-1.0).epsilon(1e-9));
  }
}

TEST_CASE("semi-definite metrics") {
  SUBCASE("full rank reduces to the standard condition") {
    MatrixXd A = (MatrixXd(2, 2) << -1, 2, 0, -3).finished();
    MatrixXd M = lyapunov(A);
    VectorField f{[A](const VectorXd& x) { return VectorXd(A * x); }, [A](const VectorXd&) { return A; }};
    TransverseWitness w;
    w.Psi = [](const VectorXd&) { return MatrixXd::Identity(2, 2).eval(); };
    w.P = [M](const VectorXd&) { return M; };
    w.metric = w.P;
    w.psi_jacobian = w.Psi;
    std::vector<VectorXd> pts = {v({0.0, 0.0}), v({1.0, -1.0}), v({-2.0, 0.5})};
    CheckReport sd = check_semidefinite_metric(f, w, pts);
    CheckReport tr = check_transverse(f, w, pts);
    CHECK(sd.status == CheckStatus::Pass);
    CHECK(sd.worst_margin == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(sd.worst_margin == doctest::Approx(tr.worst_margin).epsilon(1e-12));
  }
  SUBCASE("a non-gradient column is a precondition failure") {
    VectorField f{[](const VectorXd& x) { return VectorXd(-x); },
                  [](const VectorXd&) { return MatrixXd(-MatrixXd::Identity(2, 2)); }};
    TransverseWitness w;
    w.Psi = [](const VectorXd& c) { return MatrixXd((MatrixXd(2, 1) << 1.0, c(0)).finished()); };
    w.P = [](const VectorXd&) { return MatrixXd::Identity(1, 1).eval(); };
    CheckReport r = check_semidefinite_metric(f, w, {v({0.2, 0.1})});
    CHECK(r.status == CheckStatus::PreconditionFail);
    CHECK(r.message.find("not a gradient") != std::string::npos);
  }
  SUBCASE("reactor with the conserved quantity x + y") {
    // mu = x (1 - x); f = (-mu y, mu y). The gradient of x + y is (1, 1)
    // and the Jacobian's entries sum to zero, so the projected form
    // 2 (Psi'Psi)(Psi'J Psi) vanishes identically.
    auto mu = [](double x) { return x * (1 - x); };
    VectorField f{[mu](const VectorXd& c) { return v({-mu(c(0)) * c(1), mu(c(0)) * c(1)}); },
                  [mu](const VectorXd& c) {
                    double dm = 1 - 2 * c(0);
                    return MatrixXd((MatrixXd(2, 2) << -dm * c(1), -mu(c(0)), dm * c(1), mu(c(0))).finished());
                  }};
    MatrixXd J0 = f.jacobian(v({0.3, 0.4}));
    MatrixXd Jfd = oracle::jacobian(f.f, v({0.3, 0.4}));
    CHECK((J0 - Jfd).norm() < 1e-8);
    TransverseWitness w;
    w.Psi = [](const VectorXd&) { return MatrixXd::Ones(2, 1).eval(); };
    w.P = [](const VectorXd&) { return MatrixXd::Identity(1, 1).eval(); };
    std::vector<VectorXd> pts;
    for (int i = 1; i <= 40; ++i) pts.push_back(v({0.05 + 0.4 * halton(i, 2)(0), 0.1 + 0.8 * halton(i, 2)(1)}));
    CheckReport r = check_semidefinite_metric(f, w, pts);
    CHECK(r.samples == 40);
    CHECK(std::abs(r.worst_margin) < 1e-12);
    CHECK(r.status == CheckStatus::Fail);
  }
}

TEST_CASE("synthesized specs pass the independent checks") {
  Benchmark b = benchmark("poly19");
  SynthesisConfig cfg;
  cfg.lambda = 1.0;
  cfg.fz_degree = 3;
  cfg.phi_degree = 2;
  auto res = synthesize(*b.model, cfg);
  REQUIRE(res.accepted());
  const ObserverSpec& s = *res.spec;
  Region reg = b.region(1000);
  CHECK(check_H1(s, reg).ok());
  CHECK(check_H2(s, *b.model, reg).ok());
  CHECK(check_H3(s, reg).ok());
  CHECK(check_A2(s, *b.model, reg, s.lambda).ok());
}

TEST_CASE("A2 holds along simulated runs of every benchmark") {
  for (const auto& name : benchmark_names()) {
    CAPTURE(name);
    Benchmark b = benchmark(name);
    REQUIRE(b.runs.size() == 10);
    for (const auto& run : b.runs) {
      Trajectory tr = b.simulate(run);
      Region reg = trajectory_region(tr, 20);
      CheckReport r = check_A2(b.reference, *b.model, reg, b.reference.lambda, {}, b.aug());
      CHECK(r.ok());
    }
  }
}

TEST_CASE("reports do not depend on the worker count") {
  Benchmark b = benchmark("cartpend");
  Region reg = b.region(500);
  for (int jobs : {2, 3, 8}) {
    CheckReport a = check_A2(b.reference, *b.model, reg, 1.0), c = check_A2(b.reference, *b.model, reg, 1.0, {}, nullptr, {jobs});
    CHECK(a.worst_margin == c.worst_margin);
    CHECK(a.worst_point == c.worst_point);
    CheckReport h = check_H3(benchmark("poly19").reference, benchmark("poly19").region(500));
    CheckReport k = check_H3(benchmark("poly19").reference, benchmark("poly19").region(500), {jobs});
    CHECK(h.worst_margin == k.worst_margin);
    CHECK(h.worst_point == k.worst_point);
  }
  int hits = 0;
  std::mutex mu;
  parallel_for(100, 4, [&](int) {
    std::lock_guard<std::mutex> g(mu);
    ++hits;
  });
  CHECK(hits == 100);
}
