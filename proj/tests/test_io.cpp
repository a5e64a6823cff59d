#include <doctest.h>

#include <filesystem>
#include <random>

#include "convobs/benchmarks.hpp"
#include "convobs/config.hpp"
#include "convobs/io.hpp"
#include "convobs/synth.hpp"

using namespace convobs;

namespace {

Polynomial P(const std::string& s) { return parse_polynomial(s); }

// Same phi, phi jacobian, f_z and metric at random points.
void check_same(const ObserverSpec& a, const ObserverSpec& b, double lo, double hi, double tol) {
  REQUIRE(a.nxe() == b.nxe());
  REQUIRE(a.ny == b.ny);
  REQUIRE(a.nu == b.nu);
  CHECK(a.name == b.name);
  CHECK(a.lambda == b.lambda);
  CHECK(a.k == b.k);
  CHECK(a.mode == b.mode);
  CHECK(a.strategy == b.strategy);
  CHECK((a.metric - b.metric).norm() <= tol);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(lo, hi);
  for (int i = 0; i < 50; ++i) {
    VectorXd xe(a.nxe()), y(a.ny), u = VectorXd::Zero(a.nu);
    for (int j = 0; j < xe.size(); ++j) xe(j) = d(rng);
    for (int j = 0; j < y.size(); ++j) y(j) = d(rng);
    CHECK((a.phi(xe, y) - b.phi(xe, y)).norm() <= tol * (1 + a.phi(xe, y).norm()));
    CHECK((a.phi.d_xe(xe, y) - b.phi.d_xe(xe, y)).norm() <= tol * (1 + a.phi.d_xe(xe, y).norm()));
    CHECK((a.fz(xe, y, u) - b.fz(xe, y, u)).norm() <= tol * (1 + a.fz(xe, y, u).norm()));
  }
}

ObserverSpec round_trip(const ObserverSpec& s) {
  const auto path = (std::filesystem::temp_directory_path() / ("convobs_rt_" + s.name + ".json")).string();
  write_json(path, spec_to_json(s));
  ObserverSpec back = spec_from_json(read_json(path));
  std::filesystem::remove(path);
  return back;
}

}  // namespace

TEST_CASE("matrix and vector json") {
  MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6.5;
  CHECK(matrix_from_json(matrix_to_json(m)) == m);
  VectorXd v(3);
  v << -1, 0.25, 1e-300;
  CHECK(vector_from_json(vector_to_json(v)) == v);
  CHECK_THROWS_AS(matrix_from_json(Json::parse("[[1,2],[3]]")), FormatError);
  VectorXd bad(1);
  bad << std::nan("");
  CHECK(vector_to_json(bad)[0].is_null());
}

TEST_CASE("affine spec round trip") {
  auto s = poly19_reference_spec();
  auto b = round_trip(s);
  check_same(s, b, -5, 5, 1e-12);
  CHECK(b.phi.is_affine());
  CHECK((b.phi.P() - s.phi.P()).norm() == 0.0);
}

TEST_CASE("synthesized spec round trip keeps the record") {
  auto r = synthesize(*benchmark("poly19").model, SynthesisConfig{});
  REQUIRE(r.accepted());
  auto b = round_trip(*r.spec);
  check_same(*r.spec, b, -5, 5, 1e-9);
  CHECK(b.mode == "h3");
}

TEST_CASE("polynomial H4 spec round trip") {
  auto m = SystemModel::polynomial("osc", {"x1", "x2"}, {"y"}, {}, {P("x2 + y^2"), P("-x1")}, {P("x1")});
  SynthesisConfig cfg;
  cfg.mode = SynthMode::H4;
  cfg.lambda = 0.0;
  cfg.phi_degree = 2;
  cfg.fz_degree = 2;
  auto r = synthesize(m, cfg);
  REQUIRE(r.accepted());
  auto b = round_trip(*r.spec);
  check_same(*r.spec, b, -2, 2, 1e-9);
  CHECK(b.strategy == LeftInverse::NewtonMonotone);
  REQUIRE(b.r);
  CHECK(*b.r == *r.spec->r);
  CHECK((b.P_metric - r.spec->P_metric).norm() == 0.0);
  VectorXd xe(2), y(1);
  xe << 0.3, -0.7;
  y << 0.4;
  CHECK((left_inverse(b, b.phi(xe, y), y).xe - xe).norm() < 1e-8);
}

TEST_CASE("builtin specs round trip by name") {
  auto c = cartpend_reference_spec();
  check_same(c, round_trip(c), -1, 1, 0.0);
  auto bench = benchmark("reactor");
  auto& r = bench.reference;
  auto j = spec_to_json(r);
  CHECK(j["builtin"] == "reactor");
  CHECK_FALSE(j.contains("fz"));
  auto b = spec_from_json(j);
  CHECK(b.params == r.params);
  const auto& s = bench.sim;
  VectorXd xe(bench.model->nx() + s.w0.size());
  xe << s.x0, s.w0;
  CHECK((b.phi(xe, s.y0) - r.phi(xe, s.y0)).norm() == 0.0);
}

TEST_CASE("spec format errors") {
  Json j = spec_to_json(poly19_reference_spec());
  Json v2 = j;
  v2["format_version"] = 2;
  CHECK_THROWS_AS(spec_from_json(v2), FormatError);
  Json nophi = j;
  nophi.erase("phi");
  CHECK_THROWS_AS(spec_from_json(nophi), FormatError);
  Json form = j;
  form["phi"]["form"] = "spline";
  CHECK_THROWS_AS(spec_from_json(form), FormatError);
  Json unknown = spec_to_json(cartpend_reference_spec());
  unknown["builtin"] = "tokamak";
  CHECK_THROWS_AS(spec_from_json(unknown), FormatError);
  Json noparam = spec_to_json(benchmark("reactor").reference);
  noparam["params"].erase("rho");
  CHECK_THROWS_AS(spec_from_json(noparam), FormatError);
  CHECK_THROWS_AS(read_json("/nonexistent/convobs.json"), FormatError);
}

TEST_CASE("reports and synthesis summaries") {
  CheckReport r;
  r.id = "H1";
  r.status = CheckStatus::BoundaryPass;
  r.worst_margin = 1e-10;
  r.worst_point = VectorXd::Ones(2);
  r.samples = 7;
  auto j = reports_to_json({r});
  CHECK(j["format_version"] == kFormatVersion);
  CHECK(j["reports"][0]["status"] == "boundary-pass");
  CHECK(j["reports"][0]["samples"] == 7);
  auto s = synthesis_to_json(synthesize(*benchmark("poly19").model, SynthesisConfig{}));
  CHECK(s["status"] == "Feasible");
  CHECK(s["lambda"] == 1.0);
  CHECK(s["certificates"].size() > 0);
  CHECK_FALSE(s.contains("seconds"));
}

TEST_CASE("manifest fields") {
  RunManifest m;
  m.command = "synth";
  m.seed = 9;
  m.outputs = {"spec.json"};
  m.exit_code = 2;
  auto j = m.to_json();
  for (const char* k : {"format_version", "command", "config", "seed", "out", "tool_version", "outputs", "exit_code",
                        "seconds"})
    CHECK(j.contains(k));
  CHECK(j["seed"] == 9);
}

TEST_CASE("benchmark configs load") {
  for (const char* n : {"poly19", "maglev", "maglev_flux", "cartpend", "reactor", "infeasible_toy"}) {
    CAPTURE(n);
    auto rc = load_config(std::string(CONVOBS_SOURCE_DIR) + "/benchmarks/" + n + ".yaml");
    CHECK(rc.model);
  }
  auto rc = load_config(std::string(CONVOBS_SOURCE_DIR) + "/benchmarks/poly19.yaml");
  CHECK(rc.synth.lambda == 1.0);
  CHECK(rc.synth.mode == SynthMode::H3);
  CHECK(rc.sim.noise.amplitude == 0.02);
  CHECK(rc.verify.region_lo.size() == 3);
}

TEST_CASE("inline model config") {
  auto rc = parse_config(R"(
format_version: 1
model: {name: toy, states: [x1, x2], outputs: [y], fx: ["x2", "-x1 - x2"], fy: ["x1"]}
synth: {lambda: 0.5, fz_degree: 1, phi_degree: 1}
bisect: {steps: 3}
sim: {T: 2, x0: [1, 0], y0: [1], input: {kind: zero}}
)");
  CHECK(rc.benchmark_name.empty());
  CHECK(rc.model->nx() == 2);
  REQUIRE(rc.bisect);
  CHECK(rc.bisect->hi == 0.5);
  CHECK(rc.bisect->steps == 3);
  CHECK(rc.sim.T == 2.0);
}

TEST_CASE("spec paths resolve against the config file") {
  auto rc = parse_config("format_version: 1\nbenchmark: poly19\nspec: out/spec.json\n", "/a/b/run.yaml");
  CHECK(rc.spec_path == "/a/b/out/spec.json");
  rc = parse_config("format_version: 1\nbenchmark: poly19\nspec: /abs.json\n", "/a/b/run.yaml");
  CHECK(rc.spec_path == "/abs.json");
}

TEST_CASE("config errors") {
  const char* bad[] = {
      "benchmark: poly19",                                               // no version
      "format_version: 2\nbenchmark: poly19",                            // wrong version
      "format_version: 1",                                               // nothing to run
      "format_version: 1\nbenchmark: poly19\nextra: 1",                  // unknown key
      "format_version: 1\nbenchmark: nosuch",                            // unknown benchmark
      "format_version: 1\nbenchmark: poly19\nparams: {zeta: 1}",         // unknown parameter
      "format_version: 1\nbenchmark: poly19\nsynth: {lambda: -1}",       // negative rate
      "format_version: 1\nbenchmark: poly19\nsynth: {mode: h5}",         // unknown mode
      "format_version: 1\nbenchmark: poly19\nsynth: {lambda: fast}",     // not a number
      "format_version: 1\nbenchmark: poly19\nsim: {h: 0}",               // bad step
      "format_version: 1\nbenchmark: poly19\nsim: {noise: {period: 1e-5}}",
      "format_version: 1\nbenchmark: poly19\nsim: {input: {kind: chirp}}",
      "format_version: 1\nbenchmark: poly19\nverify: {samples: 0}",
      "format_version: 1\nbenchmark: poly19\nverify: {region: {lo: [1], hi: [0]}}",
      "format_version: 1\nbenchmark: poly19\nbisect: {lo: 2, hi: 1}",
      "format_version: 1\nbenchmark: poly19\nmodel: {fx: [x]}",          // both
      "format_version: 1\nmodel: {states: [x], outputs: [y], fx: [\"x +\"], fy: [x]}",
      "format_version: 1\nmodel: {states: [x, z], outputs: [y], fx: [x], fy: [x]}",
      "format_version: 1\nmodel: {builtin: tokamak}",
      "[1, 2]",
      "format_version: [",
  };
  for (const char* t : bad) {
    CAPTURE(t);
    CHECK_THROWS_AS(parse_config(t), ConfigError);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/run.yaml"), ConfigError);
}
