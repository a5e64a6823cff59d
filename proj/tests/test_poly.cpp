#include <doctest.h>

#include <random>

#include "convobs/poly.hpp"
#include "oracles/finite_diff.hpp"

using namespace convobs;

namespace {

Polynomial x1() { return Polynomial::variable("x1"); }
Polynomial x2() { return Polynomial::variable("x2"); }

// Right-hand side of the two-state polynomial benchmark.
PolyVector poly19_fx() {
  return {x1() - (1.0 / 3.0) * pow(x1(), 3) - x1() * pow(x2(), 2),
          x1() - x2() - (1.0 / 3.0) * pow(x2(), 3) - x2() * pow(x1(), 2)};
}

Polynomial random_poly(std::mt19937_64& rng, const std::vector<std::string>& vars, int max_deg) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  Polynomial p;
  for (const auto& e : monomials_up_to(static_cast<int>(vars.size()), max_deg)) {
    if (coef(rng) < 0.0) continue;
    p += Polynomial::monomial(vars, e, coef(rng));
  }
  return p;
}

}  // namespace

TEST_CASE("arithmetic") {
  auto x = Polynomial::variable("x");
  auto y = Polynomial::variable("y");
  CHECK((x + (-x)).is_zero());
  CHECK((x - x).terms().empty());
  CHECK((x + y) * (x - y) == pow(x, 2) - pow(y, 2));
  auto f1 = poly19_fx()[0];
  CHECK(f1.size() == 3);
  CHECK(f1.coefficient({1, 0}) == doctest::Approx(1.0));
  CHECK(f1.coefficient({3, 0}) == doctest::Approx(-1.0 / 3.0));
  CHECK(f1.coefficient({1, 2}) == doctest::Approx(-1.0));
  CHECK(parse_polynomial(to_string(f1)) == f1);
  CHECK((x * 0.0).is_zero());
  CHECK((x * y).degree() == 2);
  CHECK(Polynomial().degree() == -1);
}

TEST_CASE("canonical form") {
  auto x = Polynomial::variable("x");
  auto p = (x + 1.0) * (x - 1.0) - pow(x, 2);
  CHECK(p == Polynomial(-1.0));
  for (const auto& [e, c] : p.terms()) {
    CHECK(c != 0.0);
    CHECK(e.size() == p.vars().size());
  }
  Polynomial q({"b", "a"}, {{{1, 0}, 2.0}, {{0, 1}, 3.0}});
  CHECK(q.vars() == std::vector<std::string>{"a", "b"});
  CHECK(q.coefficient({0, 1}) == 2.0);
  CHECK_THROWS_AS(Polynomial({"a", "a"}, {}), std::invalid_argument);
}

TEST_CASE("differentiate") {
  auto x = Polynomial::variable("x");
  CHECK(differentiate(pow(x, 2), "x") == 2.0 * x);
  CHECK(differentiate(Polynomial(4.0), "x").is_zero());
  auto f1 = poly19_fx()[0];
  auto d = differentiate(f1, "x2");
  CHECK(d == -2.0 * x1() * x2());
  std::function<double(const Eigen::VectorXd&)> fn = [&](const Eigen::VectorXd& v) {
    return evaluate(f1, std::map<std::string, double>{{"x1", v(0)}, {"x2", v(1)}});
  };
  Eigen::Vector2d pt(0.7, -1.3);
  double fd = oracle::central_difference(fn, pt, 1, 1e-5);
  CHECK(evaluate(d, std::map<std::string, double>{{"x1", 0.7}, {"x2", -1.3}}) == doctest::Approx(fd).epsilon(1e-8));
}

TEST_CASE("evaluate") {
  auto fx = poly19_fx();
  std::map<std::string, double> p10{{"x1", 1.0}, {"x2", 0.0}};
  CHECK(evaluate(fx[0], p10) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  std::map<std::string, double> p11{{"x1", 1.0}, {"x2", 1.0}};
  CHECK(evaluate(fx[1], p11) == doctest::Approx(-4.0 / 3.0).epsilon(1e-14));
  auto q = 3.5 + x1() * x2();
  CHECK(evaluate(q, std::map<std::string, double>{{"x1", 0.0}, {"x2", 0.0}}) == 3.5);
  CHECK_THROWS_AS(evaluate(q, std::map<std::string, double>{{"x1", 1.0}}), UnboundVariableError);
  CompiledPolynomial cq(q, {"x2", "x1"});
  CHECK(cq(Eigen::Vector2d(2.0, 3.0)) == doctest::Approx(9.5));
}

TEST_CASE("lie derivative") {
  auto y = Polynomial::variable("y");
  auto fx = poly19_fx();
  // Field over (x1, x2, y): (f_x, x1).
  PolyVector field = {fx[0], fx[1], x1()};
  std::vector<std::string> state = {"x1", "x2", "y"};
  CHECK(lie_derivative(y, field, state) == x1());
  CHECK(lie_derivative(Polynomial(2.0), field, state).is_zero());
  CHECK(lie_derivative(lie_derivative(y, field, state), field, state) == fx[0]);
  CHECK_THROWS_AS(lie_derivative(y, PolyVector{x1()}, state), DimensionError);
}

TEST_CASE("parser") {
  auto p = parse_polynomial("-0.3333*x1^3*x2^0 + 2*x1*x2 - 4");
  CHECK(p.coefficient({3, 0}) == doctest::Approx(-0.3333));
  CHECK(p.coefficient({1, 1}) == 2.0);
  CHECK(p.constant_term() == -4.0);
  CHECK(parse_polynomial("(x+y)^2") == parse_polynomial("x^2 + 2*x*y + y^2"));
  CHECK(parse_polynomial("2.5e-1 * y") == 0.25 * Polynomial::variable("y"));
  CHECK_THROWS_AS(parse_polynomial("x + * y"), std::invalid_argument);
  CHECK_THROWS_AS(parse_polynomial(""), std::invalid_argument);
}

TEST_CASE("property: derivative matches finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> box(-2.0, 2.0);
  std::vector<std::string> vars = {"a", "b", "c"};
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_poly(rng, vars, 4);
    Eigen::Vector3d pt(box(rng), box(rng), box(rng));
    std::function<double(const Eigen::VectorXd&)> fn = [&](const Eigen::VectorXd& v) {
      return evaluate(p, std::map<std::string, double>{{"a", v(0)}, {"b", v(1)}, {"c", v(2)}});
    };
    for (int i = 0; i < 3; ++i) {
      double sym = evaluate(differentiate(p, vars[i]), std::map<std::string, double>{{"a", pt(0)}, {"b", pt(1)}, {"c", pt(2)}});
      double fd = oracle::central_difference(fn, pt, i, 1e-5);
      CHECK(std::abs(sym - fd) <= 1e-6 * std::max(1.0, std::abs(sym)));
    }
  }
}

TEST_CASE("property: multiplication is commutative and associative") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_poly(rng, {"x", "y"}, 3);
    auto b = random_poly(rng, {"y", "z"}, 2);
    auto c = random_poly(rng, {"x", "z"}, 2);
    CHECK(max_abs_difference(a * b, b * a) == 0.0);
    CHECK(max_abs_difference((a * b) * c, a * (b * c)) <= 1e-12);
  }
}

TEST_CASE("property: lie derivative is linear in h") {
  std::mt19937_64 rng(3);
  std::vector<std::string> state = {"x", "y"};
  for (int trial = 0; trial < 10; ++trial) {
    auto h1 = random_poly(rng, state, 3);
    auto h2 = random_poly(rng, state, 3);
    PolyVector f = {random_poly(rng, state, 2), random_poly(rng, state, 2)};
    auto lhs = lie_derivative(2.0 * h1 + h2 * -3.0, f, state);
    auto rhs = 2.0 * lie_derivative(h1, f, state) - 3.0 * lie_derivative(h2, f, state);
    CHECK(max_abs_difference(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("poly matrix") {
  PolyVector f = poly19_fx();
  auto J = jacobian(f, {"x1", "x2"});
  Eigen::Matrix2d expected;
  expected << 1, 0, 1, -1;
  CHECK((J.evaluate({{"x1", 0.0}, {"x2", 0.0}}) - expected).norm() == 0.0);
  auto S = J + J.transpose();
  CHECK(S.is_symmetric());
  CHECK_FALSE(J.is_symmetric());
  auto P = PolyMatrix::constant(Eigen::Matrix2d::Identity() * 2.0);
  CHECK(((P * J).evaluate({{"x1", 0.0}, {"x2", 0.0}}) - 2.0 * expected).norm() == 0.0);
}

TEST_CASE("substitute and monomials") {
  auto p = parse_polynomial("x*y + y^2 + 3");
  auto q = substitute(p, {{"y", 2.0}});
  CHECK(q == parse_polynomial("2*x + 7"));
  auto m = monomials_up_to(2, 2);
  CHECK(m.size() == 6);
  CHECK(monomials_up_to(3, 2, 2).size() == 6);
}
