#include <doctest.h>

#include <random>

#include "convobs/observer.hpp"

using namespace convobs;

namespace {

Polynomial P(const std::string& s) { return parse_polynomial(s); }

SystemModel poly19() {
  return SystemModel::polynomial("poly19", {"x1", "x2"}, {"y"}, {},
                                 {P("x1 - 0.3333333333333333*x1^3 - x1*x2^2"),
                                  P("x1 - x2 - 0.3333333333333333*x2^3 - x2*x1^2")},
                                 {P("x1")});
}

MatrixXd rounded_P() {
  MatrixXd Pm = MatrixXd::Zero(2, 2);
  Pm(0, 0) = 0.6370;
  Pm(1, 1) = 0.6369;
  return Pm;
}

// f_z = P f_x + varphi'(y) f_y with the four-digit P and varphi.
ObserverSpec rounded_spec() {
  auto m = poly19();
  MatrixXd Pm = rounded_P();
  PolyVector fz = {m.fx_poly()[0] * Pm(0, 0) + P("-2.1872*x1"), m.fx_poly()[1] * Pm(1, 1) + P("-0.6368*x1")};
  return make_affine_spec("poly19-rounded", Pm, {P("-2.1872*y"), P("-0.6368*y")}, fz, {"x1", "x2"}, {"y"}, {}, 2, 1.0,
                          0.1);
}

VectorXd v2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("affine inverse at the offset is zero") {
  auto s = rounded_spec();
  for (double yv : {-4.0, 0.0, 0.7, 3.0}) {
    VectorXd y = VectorXd::Constant(1, yv);
    VectorXd xi = s.phi.offset(y);
    CHECK(left_inverse(s, xi, y).xe.norm() < 1e-15);
  }
}

TEST_CASE("affine round trip at y = 1") {
  auto s = rounded_spec();
  VectorXd y = VectorXd::Constant(1, 1.0);
  VectorXd xi = rounded_P() * v2(1, 1) + v2(-2.1872, -0.6368);
  VectorXd xh = left_inverse(s, xi, y).xe;
  CHECK((xh - v2(1, 1)).norm() < 1e-14);
}

TEST_CASE("Newton inverse agrees with the closed form on affine specs") {
  auto s = rounded_spec();
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(-10, 10);
  for (int i = 0; i < 50; ++i) {
    VectorXd xi = v2(d(rng), d(rng));
    VectorXd y = VectorXd::Constant(1, d(rng));
    VectorXd a = left_inverse(s, xi, y).xe;
    auto n = newton_inverse(s, xi, y);
    CHECK((a - n.xe).norm() < 1e-12);
    CHECK(n.iterations <= 2);
  }
}

TEST_CASE("Newton inverse of a monotone polynomial map") {
  // phi = (x1 + x1^3/3 + y x2 + 0.5 y^2, x2 - y x1 + x2^3): symmetric part of
  // the Jacobian is diag(1 + x1^2, 1 + 3 x2^2).
  PolyVector phi = {P("x1 + 0.3333333333333333*x1^3 + y*x2 + 0.5*y^2"), P("x2 - y*x1 + x2^3")};
  auto s = make_polynomial_spec("mono", phi, {P("0"), P("0")}, {"x1", "x2"}, {"y"}, {}, 2, MatrixXd::Identity(2, 2),
                                0.0, 1.0);
  CHECK(s.strategy == LeftInverse::NewtonMonotone);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> d(-5, 5);
  for (int i = 0; i < 50; ++i) {
    VectorXd x = v2(d(rng), d(rng));
    VectorXd y = VectorXd::Constant(1, d(rng));
    VectorXd xi = s.phi(x, y);
    auto r = left_inverse(s, xi, y);
    CHECK((s.phi(r.xe, y) - xi).norm() <= 1e-10 * (1 + xi.norm()));
    CHECK((r.xe - x).norm() < 1e-8 * (1 + x.norm()));
  }
}

TEST_CASE("Newton reports non-convergence with its history") {
  // x^2 + 1 = 0 has no real root.
  auto s = make_polynomial_spec("bad", {P("x1^2 + 1")}, {P("0")}, {"x1"}, {"y"}, {}, 1, MatrixXd::Identity(1, 1), 0.0,
                                1.0);
  try {
    left_inverse(s, VectorXd::Zero(1), VectorXd::Zero(1));
    FAIL("expected NewtonFailure");
  } catch (const NewtonFailure& e) {
    CHECK(!e.residual_history().empty());
    CHECK(e.residual_history().front() == doctest::Approx(1.0));
  }
}

TEST_CASE("observer vector field matches d/dt phi along the plant") {
  auto m = poly19();
  auto s = rounded_spec();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> d(-3, 3);
  VectorXd u(0);
  for (int i = 0; i < 100; ++i) {
    VectorXd x = v2(d(rng), d(rng));
    VectorXd y = VectorXd::Constant(1, d(rng));
    VectorXd xi = s.phi(x, y);
    VectorXd zdot = s.phi.d_xe(x, y) * m.fx(x, y, u) + s.phi.d_y(x, y) * m.fy(x, y, u);
    VectorXd rhs = observer_rhs(s, xi, y, u);
    CHECK((rhs - zdot).norm() < 1e-10 * (1 + zdot.norm()));
  }
}

TEST_CASE("runtime dynamics wrap the spec") {
  auto s = rounded_spec();
  auto dyn = dynamics(s);
  CHECK(dyn.dim == 2);
  VectorXd y = VectorXd::Constant(1, 1.0);
  VectorXd xi = rounded_P() * v2(1, 1) + v2(-2.1872, -0.6368);
  CHECK((dyn.estimate(xi, y) - v2(1, 1)).norm() < 1e-14);
  CHECK((dyn.rhs(xi, y, VectorXd(0)) - observer_rhs(s, xi, y, VectorXd(0))).norm() == 0.0);
}

TEST_CASE("custom inverse strategy") {
  auto s = rounded_spec();
  s.strategy = LeftInverse::Custom;
  s.custom_inverse = [](const VectorXd& xi, const VectorXd& y) { return VectorXd(xi - VectorXd::Constant(2, y(0))); };
  CHECK((left_inverse(s, v2(3, 4), VectorXd::Constant(1, 1.0)).xe - v2(2, 3)).norm() == 0.0);
  CHECK(to_string(LeftInverse::NewtonMonotone) == "NewtonMonotone");
  CHECK_THROWS_AS(left_inverse(s, VectorXd::Zero(3), VectorXd::Zero(1)), DimensionError);
}
