#include <doctest.h>

#include <cmath>
#include <sstream>

#include "convobs/benchmarks.hpp"
#include "convobs/sim.hpp"

using namespace convobs;

namespace {

SimConfig quiet(const Benchmark& b, double h, double T) {
  SimConfig c = b.sim;
  c.noise = {};
  c.h = h;
  c.T = T;
  c.record_stride = 1 << 30;  // keep the endpoints only
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  SimConfig c;
  c.h = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.h = 1e-3;
  c.T = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.T = 1;
  c.noise = {0.02, 1e-4};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.noise = {0.02, 1e-3};
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("RK4 observed order on the polynomial benchmark") {
  Benchmark b = benchmark("poly19");
  auto terminal = [&](double h) { return b.simulate(quiet(b, h, 1.0)).terminal_state(); };
  const double h1 = 0.002, h2 = 0.001;
  double e1 = (terminal(h1) - terminal(h1 / 8)).norm();
  double e2 = (terminal(h2) - terminal(h2 / 8)).norm();
  double order = std::log2(e1 / e2);
  MESSAGE("observed order " << order << " e1 " << e1 << " e2 " << e2);
  CHECK(order >= 3.5);
}

TEST_CASE("RK4 error against the exact harmonic oscillator is fourth order") {
  PlantDynamics osc;
  osc.nx = 1;
  osc.ny = 1;
  osc.fx = [](const VectorXd&, const VectorXd& y, const VectorXd&) { return VectorXd(-y); };
  osc.fy = [](const VectorXd& x, const VectorXd&, const VectorXd&) { return VectorXd(x); };
  ObserverDynamics idle;
  idle.dim = 1;
  idle.rhs = [](const VectorXd&, const VectorXd&, const VectorXd&) { return VectorXd::Zero(1).eval(); };
  idle.estimate = [](const VectorXd& xi, const VectorXd&) { return xi; };
  auto err = [&](double h) {
    SimConfig c;
    c.h = h;
    c.T = 2.0;
    c.x0 = VectorXd::Constant(1, 1.0);
    c.y0 = VectorXd::Zero(1);
    c.xi0 = VectorXd::Zero(1);
    Trajectory tr = simulate(osc, idle, c);
    return std::abs(tr.x.back()(0) - std::cos(2.0)) + std::abs(tr.y.back()(0) - std::sin(2.0));
  };
  double order = std::log2(err(0.1) / err(0.05));
  CHECK(order > 3.8);
  CHECK(order < 4.2);
}

TEST_CASE("halving the step barely moves the terminal state") {
  Benchmark b = benchmark("poly19");
  VectorXd a = b.simulate(quiet(b, 1e-3, 10.0)).terminal_state();
  VectorXd c = b.simulate(quiet(b, 5e-4, 10.0)).terminal_state();
  CHECK((a - c).norm() < 1e-6);
}

TEST_CASE("fixed seed gives bit-identical trajectories") {
  Benchmark b = benchmark("poly19");
  SimConfig c = b.sim;
  c.T = 1.0;
  c.seed = 7;
  Trajectory t1 = b.simulate(c), t2 = b.simulate(c);
  REQUIRE(t1.size() == t2.size());
  bool same = true;
  for (std::size_t k = 0; k < t1.size(); ++k) same = same && t1.xi[k] == t2.xi[k] && t1.y_noisy[k] == t2.y_noisy[k];
  CHECK(same);
  c.seed = 8;
  Trajectory t3 = b.simulate(c);
  CHECK(t3.y_noisy[5] != t1.y_noisy[5]);
}

TEST_CASE("noise is uniform, bounded and held over its period") {
  Benchmark b = benchmark("poly19");
  SimConfig c = b.sim;
  c.T = 0.5;
  c.noise = {0.02, 5e-3};
  Trajectory tr = b.simulate(c);
  double mx = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    double n = (tr.y_noisy[k] - tr.y[k])(0);
    mx = std::max(mx, std::abs(n));
    if (k % 5 != 0) CHECK(n == doctest::Approx((tr.y_noisy[k - 1] - tr.y[k - 1])(0)).epsilon(1e-9));
  }
  CHECK(mx <= 0.02);
  CHECK(mx > 0.01);
}

TEST_CASE("trajectory columns line up and times increase") {
  Benchmark b = benchmark("cartpend");
  SimConfig c = b.sim;
  c.T = 1.0;
  c.record_stride = 7;
  Trajectory tr = b.simulate(c);
  for (auto n : {tr.x.size(), tr.y.size(), tr.y_noisy.size(), tr.u.size(), tr.xi.size(), tr.xhat.size(), tr.err.size()})
    CHECK(n == tr.t.size());
  for (std::size_t k = 1; k < tr.size(); ++k) CHECK(tr.t[k] > tr.t[k - 1]);
  CHECK(tr.t.back() == doctest::Approx(1.0));
}

TEST_CASE("fit_rate recovers a synthetic exponential") {
  std::vector<double> t, e;
  for (int i = 0; i <= 400; ++i) {
    t.push_back(0.01 * i);
    e.push_back(std::exp(-2.0 * t.back()));
  }
  RateFit f = fit_rate(t, e, 0.0, 4.0);
  CHECK(f.rate == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(f.points == 401);
}

TEST_CASE("fit_rate refuses windows with nothing to fit") {
  std::vector<double> t = {0, 1, 2, 3}, e = {1, 1e-6, 1e-13, 1e-14};
  CHECK_THROWS_AS(fit_rate(t, e, 0.0, 3.0), std::domain_error);
  CHECK_THROWS_AS(fit_rate(t, e, 0.0, 0.5), std::invalid_argument);
}

TEST_CASE("reactor conserves x + y") {
  Benchmark b = benchmark("reactor");
  SimConfig c = b.sim;
  c.record_stride = 100;
  Trajectory tr = b.simulate(c);
  REQUIRE(!tr.exited);
  const double s0 = tr.x[0](0) + tr.y[0](0);
  double drift = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) drift = std::max(drift, std::abs(tr.x[k](0) + tr.y[k](0) - s0));
  CHECK(drift < 1e-8);
}

TEST_CASE("leaving the domain truncates the run") {
  Benchmark b = benchmark("maglev");
  SimConfig c = b.sim;
  c.x0(0) = 3.0;  // strong flux pulls the ball into the magnet
  Trajectory tr = b.simulate(c);
  CHECK(tr.exited);
  CHECK(tr.exit_reason.find("q < c") != std::string::npos);
  CHECK(tr.t.back() < c.T);
}

TEST_CASE("initial conditions outside the domain are rejected") {
  Benchmark b = benchmark("maglev");
  SimConfig c = b.sim;
  c.y0(0) = 0.006;
  CHECK_THROWS_AS(b.simulate(c), DomainError);
}

TEST_CASE("an observer that cannot start is reported") {
  Benchmark b = benchmark("poly19");
  ObserverDynamics bad;
  bad.dim = 2;
  bad.rhs = [](const VectorXd& xi, const VectorXd&, const VectorXd&) { return xi; };
  bad.estimate = [](const VectorXd&, const VectorXd&) -> VectorXd { throw std::runtime_error("no inverse"); };
  CHECK_THROWS_WITH_AS(simulate(PlantDynamics::of(*b.model), bad, b.sim), doctest::Contains("observer cannot start"),
                       std::invalid_argument);
}

TEST_CASE("CSV header and row width") {
  Benchmark b = benchmark("cartpend");
  SimConfig c = b.sim;
  c.T = 0.01;
  std::ostringstream os;
  write_csv(os, b.simulate(c));
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  CHECK(header == "t,x1,x2,y1,y2,y_noisy1,y_noisy2,u1,xi1,xi2,xhat1,xhat2,err_norm");
  CHECK(std::count(row.begin(), row.end(), ',') == std::count(header.begin(), header.end(), ','));
}

TEST_CASE("settling time") {
  Trajectory tr;
  tr.t = {0, 1, 2, 3, 4};
  tr.err = {1, 0.01, 0.5, 0.01, 0.001};
  CHECK(*settling_time(tr, 0.1) == 3.0);
  CHECK(!settling_time(tr, 1e-6).has_value());
}
