#include <doctest.h>

#include <random>

#include "convobs/linalg.hpp"
#include "convobs/sos.hpp"
#include "oracles/random_problems.hpp"

using namespace convobs;
using oracle::random_sos;

namespace {

Polynomial P(const std::string& s) { return parse_polynomial(s); }

}  // namespace

TEST_CASE("perfect square has the rank one Gram matrix") {
  auto c = compile_scalar(lift(P("x^2 + 2*x*y + y^2")));
  REQUIRE(c.fragment.basis.size() == 2);
  auto r = solve(c);
  CHECK(r.accepted());
  const auto& g = r.certificates.at(0);
  Eigen::MatrixXd expect(2, 2);
  expect << 1, 1, 1, 1;
  CHECK((g.gram - expect).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((g.reconstruct() - g.subject).pruned(1e-8).is_zero());
}

TEST_CASE("Motzkin polynomial is rejected") {
  auto m = lift(P("x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1"));
  for (int degree : {-1, 3, 4}) {
    CAPTURE(degree);
    auto r = solve(compile_scalar(m, degree));
    CHECK(r.status == SosStatus::Infeasible);
    CHECK(r.sdp.certificate_value > 1e-6);
    CHECK(r.sdp.certificate_residual < 1e-8);
  }
  // it is nonnegative: the rejection is about the SOS cone, not positivity
  CompiledPolynomial f(P("x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1"), {"x", "y"});
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 200; ++i) CHECK(f(Eigen::Vector2d(u(rng), u(rng))) >= -1e-12);
}

TEST_CASE("matrix inequalities through v'Sv") {
  SUBCASE("constant negative definite") {
    DecisionPolyMatrix S = lift(PolyMatrix::identity(2) * -1.0);
    CHECK(solve(compile_matrix(S, MatrixSense::NegativeSemidefinite)).accepted());
    CHECK(solve(compile_matrix(S, MatrixSense::PositiveSemidefinite)).status == SosStatus::Infeasible);
  }
  SUBCASE("diag(x^2, -1) is not negative semidefinite") {
    PolyMatrix S(2, 2);
    S(0, 0) = P("x^2");
    S(1, 1) = Polynomial(-1.0);
    // -v'Sv is negative at x = 1, v = e1, so no certificate can exist
    Polynomial q = -(P("x^2*a^2") - P("b^2"));
    CHECK(evaluate(q, std::map<std::string, double>{{"x", 1.0}, {"a", 1.0}, {"b", 0.0}}) < 0.0);
    auto c = compile_matrix(lift(S), MatrixSense::NegativeSemidefinite);
    CHECK(c.fragment.basis.size() >= 1);
    CHECK(solve(c).status == SosStatus::Infeasible);
  }
  SUBCASE("monotone block of the polynomial example") {
    PolyMatrix Pm = PolyMatrix::constant(Eigen::Vector2d(0.6370, 0.6369).asDiagonal().toDenseMatrix());
    PolyMatrix S = Pm + Pm.transpose() - PolyMatrix::identity(2) * 0.1;
    auto r = solve(compile_matrix(lift(S)));
    CHECK(r.status == SosStatus::Feasible);
    CHECK(r.certificates.at(0).min_eigenvalue() > 0.0);
  }
  SUBCASE("asymmetric matrix is refused") {
    PolyMatrix S(2, 2);
    S(0, 1) = P("x");
    S(1, 0) = P("y");
    CHECK_THROWS_AS(compile_matrix(lift(S)), std::invalid_argument);
    SosProgram prog;
    CHECK_THROWS_AS(prog.add_psd(lift(S)), std::invalid_argument);
  }
}

TEST_CASE("random constructed SOS polynomials are accepted with exact coefficient matching") {
  std::mt19937 rng(20);
  for (int trial = 0; trial < 20; ++trial) {
    CAPTURE(trial);
    std::vector<std::string> vars = trial % 2 ? std::vector<std::string>{"x", "y"} : std::vector<std::string>{"x", "y", "z"};
    Polynomial p = random_sos(rng, vars, 1 + trial % 2);
    auto r = solve(compile_scalar(lift(p)));
    REQUIRE(r.accepted());
    const auto& g = r.certificates.at(0);
    CHECK(g.min_eigenvalue() >= -1e-7);
    CHECK(max_abs_difference(g.reconstruct(), p) < 1e-8);
  }
}

TEST_CASE("Gram basis") {
  SUBCASE("default uses half the degree") {
    auto b = MonomialBasis::for_support(lift(P("x^4 + y^4 + 1")), {});
    for (const auto& m : b.monomials) CHECK(detail::total_degree(m) <= 2);
  }
  SUBCASE("per-variable bounds drop useless monomials") {
    auto b = MonomialBasis::for_support(lift(P("x^4 + y^2")), {});
    for (const auto& m : b.monomials) CHECK(detail::total_degree(m) >= 1);
    CHECK(b.size() == 2);  // x^2, y
  }
  SUBCASE("too small a basis names the offending monomial") {
    try {
      SdpProblem sdp(std::vector<int>{});
      compile_scalar(sdp, lift(P("x^4 + 1")), MonomialBasis::total_degree({"x"}, 1), {}, "h");
      FAIL("expected SosDegreeError");
    } catch (const SosDegreeError& e) {
      CHECK(e.monomial() == "x^4");
      CHECK(std::string(e.what()).find("'h'") != std::string::npos);
    }
  }
}

TEST_CASE("decision variables") {
  SUBCASE("bilinear terms are refused") {
    auto a = DecisionPolynomial(AffineExpr::decision(0));
    auto b = DecisionPolynomial(AffineExpr::decision(1));
    CHECK_THROWS_AS(a * b, BilinearError);
    CHECK_NOTHROW(a * lift(P("x")));
  }
  SUBCASE("scalar program with unknown coefficients") {
    // find c with x^2 + c x + 1 SOS and c = 2: feasible; c = 3: infeasible
    for (double target : {2.0, 3.0}) {
      SosProgram prog;
      int c = prog.new_decision("c");
      DecisionPolynomial p = lift(P("x^2 + 1")) + DecisionPolynomial(AffineExpr::decision(c)) * lift(P("x"));
      prog.add_sos(p, "q");
      prog.add_linear(AffineExpr::decision(c) - AffineExpr(target));
      auto r = prog.solve();
      if (target == 2.0) {
        CHECK(r.accepted());
        CHECK(r.theta(c) == doctest::Approx(2.0).epsilon(1e-6));
      } else {
        CHECK(r.status == SosStatus::Infeasible);
      }
    }
  }
  SUBCASE("matrix program recovers a Lyapunov-like certificate") {
    // P >= I and A'P + PA <= 0 for a Hurwitz A
    SosProgram prog;
    auto Pm = prog.new_symmetric_matrix(2);
    Eigen::Matrix2d A;
    A << -1, 2, 0, -3;
    DecisionPolyMatrix Ad = lift(PolyMatrix::constant(A));
    prog.add_psd(Pm - lift(PolyMatrix::identity(2)), "pd");
    prog.add_nsd(Ad.transpose() * Pm + Pm * Ad, "lyap");
    auto r = prog.solve();
    REQUIRE(r.accepted());
    Eigen::Matrix2d Pv = fix(Pm, r.theta).evaluate({});
    CHECK(min_eigenvalue(Pv) >= 1.0 - 1e-6);
    CHECK(max_eigenvalue(sym(A.transpose() * Pv + Pv * A)) <= 1e-6);
  }
  SUBCASE("free coefficients that cannot be matched become equalities") {
    SosProgram prog;
    int c = prog.new_decision();
    // c x^3 cannot appear in a degree 2 square, so c is forced to zero
    DecisionPolynomial p = lift(P("x^2 + 1")) + DecisionPolynomial(AffineExpr::decision(c)) * lift(P("x^3"));
    prog.add_sos(p, "q", 1);
    auto r = prog.solve();
    REQUIRE(r.accepted());
    CHECK(std::abs(r.theta(c)) < 1e-8);
  }
}
