// convobs: synthesize, simulate, verify and benchmark observers from YAML
// configs. Exit codes: 0 pass/feasible, 2 infeasible/fail, 3 usage error,
// 4 numeric failure.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "convobs/config.hpp"
#include "convobs/io.hpp"
#include "convobs/verify.hpp"

using namespace convobs;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFail = 2, kUsage = 3, kNumeric = 4 };

struct Options {
  std::string config, out = "out", spec, mode, name;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<int> samples;
  int jobs = 1;
  bool bisect = false;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Run {
  RunManifest manifest;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  std::string output(const std::string& file) {
    manifest.outputs.push_back(file);
    return (fs::path(manifest.out_dir) / file).string();
  }
  int finish(int code) {
    manifest.exit_code = code;
    manifest.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json((fs::path(manifest.out_dir) / "manifest.json").string(), manifest.to_json());
    return code;
  }
};

Run begin(const std::string& command, const Options& o) {
  Run r;
  r.manifest.command = command;
  r.manifest.config_path = o.config;
  r.manifest.seed = o.seed.value_or(1);
  r.manifest.out_dir = o.out;
  r.manifest.tool_version = CONVOBS_VERSION;
  fs::create_directories(o.out);
  return r;
}

RunConfig configure(const Options& o) {
  RunConfig rc = load_config(o.config);
  if (o.lambda) rc.synth.lambda = *o.lambda;
  if (!o.mode.empty()) {
    try {
      rc.synth.mode = parse_mode(o.mode);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (o.samples) rc.verify.samples = *o.samples;
  if (o.seed) rc.sim.seed = *o.seed;
  return rc;
}

ObserverSpec load_spec(const Options& o, const RunConfig& rc) {
  std::string path = !o.spec.empty() ? o.spec : rc.spec_path;
  if (!path.empty()) return spec_from_json(read_json(path));
  if (rc.bench) return rc.bench->reference;
  throw UsageError("no observer spec: pass --spec, set 'spec' in the config or use a benchmark");
}

const AugmentedModel* aug_of(const RunConfig& rc) { return rc.bench ? rc.bench->aug() : nullptr; }

bool lower_mode(const ObserverSpec& s, const char* m) {
  std::string x = s.mode;
  for (auto& c : x) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return x == m;
}

int cmd_synth(const Options& o, Run& run) {
  RunConfig rc = configure(o);
  if (!rc.model->is_polynomial()) throw UsageError("synthesis needs a polynomial model");
  run.manifest.seed = rc.sim.seed;
  SynthesisResult res;
  if (o.bisect || rc.bisect) {
    BisectConfig b = rc.bisect.value_or(BisectConfig{0.0, rc.synth.lambda, 6});
    if (o.lambda) b.hi = *o.lambda;
    auto best = bisect_lambda(*rc.model, rc.synth, b.lo, b.hi, b.steps, &res);
    if (best) {
      std::cout << "largest feasible lambda: " << *best << "\n";
    } else {
      std::cout << "largest feasible lambda: none in [" << b.lo << ", " << b.hi << "]\n";
      res.status = SosStatus::Infeasible;
    }
    res.largest_feasible_lambda = best;
  } else {
    res = synthesize(*rc.model, rc.synth);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - run.start).count();
  std::cout << "status: " << to_string(res.status) << "\n";
  std::cout << "lambda: " << res.lambda << "\n";
  if (res.r) std::cout << "r: " << *res.r << "\n";
  std::cout << "wall time: " << secs << " s\n";
  write_json(run.output("synth.json"), synthesis_to_json(res));
  if (res.accepted() && res.spec) {
    write_json(run.output("spec.json"), spec_to_json(*res.spec));
    std::cout << "spec: " << (fs::path(o.out) / "spec.json").string() << "\n";
    return run.finish(kOk);
  }
  std::cout << "certificate: " << res.message << "\n";
  return run.finish(res.status == SosStatus::Failed ? kNumeric : kFail);
}

int cmd_simulate(const Options& o, Run& run) {
  RunConfig rc = configure(o);
  ObserverSpec spec = load_spec(o, rc);
  SimConfig c = rc.sim;
  if (c.x0.size() != rc.model->nx() || c.y0.size() != rc.model->ny()) throw UsageError("sim: x0 and y0 are required");
  if (rc.sim_matched) {
    VectorXd xe(spec.nxe());
    xe << c.x0, c.w0;
    c.xi0 = spec.phi(xe, c.y0);
  } else if (c.xi0.size() == 0) {
    c.xi0 = VectorXd::Zero(spec.nxi());
  }
  run.manifest.seed = c.seed;
  const AugmentedModel* am = aug_of(rc);
  Trajectory tr = am ? simulate(*am, spec, c) : simulate(*rc.model, spec, c);
  {
    std::ofstream f(run.output("trajectory.csv"));
    write_csv(f, tr);
  }
  Json s;
  s["format_version"] = kFormatVersion;
  s["kind"] = "simulation";
  s["samples"] = tr.size();
  s["final_time"] = tr.t.back();
  s["final_error"] = tr.err.back();
  s["rms_error_second_half"] = tr.t.back() > c.T / 2 ? Json(tr.rms_error(c.T / 2)) : Json(nullptr);
  s["exited"] = tr.exited;
  s["exit_reason"] = tr.exit_reason;
  write_json(run.output("simulation.json"), s);
  std::cout << "final error: " << tr.err.back() << " at t = " << tr.t.back() << "\n";
  if (tr.exited) {
    std::cerr << "run truncated: " << tr.exit_reason << "\n";
    return run.finish(kNumeric);
  }
  return run.finish(kOk);
}

std::vector<CheckReport> run_checks(const RunConfig& rc, const ObserverSpec& spec, const Options& o) {
  VerifyOptions vo{o.jobs};
  Region reg;
  if (rc.verify.region_lo.size()) {
    reg = box_region(*rc.model, spec.nw, rc.verify.region_lo, rc.verify.region_hi, rc.verify.samples);
  } else if (rc.bench) {
    reg = rc.bench->region(rc.verify.samples);
  } else {
    throw UsageError("verify: a region is required for inline models");
  }
  std::vector<std::string> checks = rc.verify.checks;
  if (checks.empty()) {
    checks = {"H1", "H2"};
    if (lower_mode(spec, "h3") || lower_mode(spec, "h3p")) checks.push_back("H3");
    if (spec.r) checks.push_back("H4");
    checks.push_back("A2");
    if (spec.builtin == "cartpend") checks.push_back("PDE");
  }
  const AugmentedModel* am = aug_of(rc);
  std::vector<CheckReport> out;
  for (const auto& c : checks) {
    if (c == "H1") {
      out.push_back(check_H1(spec, reg, vo));
    } else if (c == "H2") {
      out.push_back(check_H2(spec, *rc.model, reg, am, vo));
    } else if (c == "H3") {
      out.push_back(check_H3(spec, reg, vo));
    } else if (c == "H4") {
      out.push_back(check_H4(spec, reg, vo));
    } else if (c == "A2") {
      out.push_back(check_A2(spec, *rc.model, reg, spec.lambda, {}, am, vo));
    } else if (c == "PDE") {
      if (spec.builtin != "cartpend") throw UsageError("verify: PDE applies to the cart-pendulum spec only");
      out.push_back(cartpend_pde_check(CartpendParams::from(spec.params), spec.lambda));
    } else {
      throw UsageError("verify: unknown check '" + c + "' (H1, H2, H3, H4, A2, PDE)");
    }
  }
  if (rc.verify.along_runs && rc.bench) {
    for (std::size_t i = 0; i < rc.bench->runs.size(); ++i) {
      Trajectory tr = rc.bench->simulate(rc.bench->runs[i]);
      CheckReport r = check_A2(spec, *rc.model, trajectory_region(tr, 20), spec.lambda, {}, am, vo);
      r.id = "A2-run" + std::to_string(i + 1);
      out.push_back(r);
    }
  }
  return out;
}

int report(const std::vector<CheckReport>& rs) {
  int code = kOk;
  for (const auto& r : rs) {
    std::cout << r.id << ": " << to_string(r.status) << " (worst " << r.worst_margin << ", tolerance " << r.tolerance
              << ", " << r.samples << " samples)\n";
    if (r.status == CheckStatus::BoundaryPass) std::cerr << "warning: " << r.id << " holds only up to tolerance\n";
    if (!r.ok()) code = kFail;
  }
  return code;
}

int cmd_verify(const Options& o, Run& run) {
  RunConfig rc = configure(o);
  ObserverSpec spec = load_spec(o, rc);
  run.manifest.seed = rc.sim.seed;
  auto rs = run_checks(rc, spec, o);
  write_json(run.output("report.json"), reports_to_json(rs));
  return run.finish(report(rs));
}

int cmd_benchmark(const Options& o, Run& run) {
  RunConfig rc;
  if (!o.config.empty()) {
    rc = configure(o);
    if (!rc.bench) throw UsageError("benchmark: the config names no benchmark");
  } else {
    try {
      rc.bench = benchmark(o.name);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    rc.benchmark_name = o.name;
    rc.model = rc.bench->model;
    rc.sim = rc.bench->sim;
    if (o.samples) rc.verify.samples = *o.samples;
    if (o.seed) rc.sim.seed = *o.seed;
  }
  rc.verify.along_runs = true;
  const ObserverSpec& spec = rc.bench->reference;
  run.manifest.seed = rc.sim.seed;
  auto rs = run_checks(rc, spec, o);
  write_json(run.output("report.json"), reports_to_json(rs));
  write_json(run.output("spec.json"), spec_to_json(spec));
  Trajectory tr = rc.bench->simulate(rc.sim);
  {
    std::ofstream f(run.output("trajectory.csv"));
    write_csv(f, tr);
  }
  std::cout << rc.benchmark_name << ": final error " << tr.err.back() << " at t = " << tr.t.back() << "\n";
  int code = report(rs);
  if (tr.exited) {
    std::cerr << "run truncated: " << tr.exit_reason << "\n";
    code = std::max(code, static_cast<int>(kNumeric));
  }
  return run.finish(code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contraction-based reduced-order observer toolkit"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* s, bool need_config) {
    auto* c = s->add_option("--config", o.config, "YAML run configuration");
    if (need_config) c->required();
    s->add_option("--out", o.out, "output directory");
    s->add_option("--seed", o.seed, "noise seed");
    s->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    s->add_option("--samples", o.samples, "verification samples")->check(CLI::PositiveNumber);
  };
  auto* synth = app.add_subcommand("synth", "synthesize an observer");
  common(synth, true);
  synth->add_option("--lambda", o.lambda, "contraction rate")->check(CLI::NonNegativeNumber);
  synth->add_option("--mode", o.mode, "h3, h4, h3p or h4p");
  synth->add_flag("--bisect", o.bisect, "bisect on the rate and print the largest feasible one");
  auto* sim = app.add_subcommand("simulate", "simulate plant and observer");
  common(sim, true);
  sim->add_option("--spec", o.spec, "observer spec JSON");
  auto* ver = app.add_subcommand("verify", "check certificate conditions");
  common(ver, true);
  ver->add_option("--spec", o.spec, "observer spec JSON");
  auto* bench = app.add_subcommand("benchmark", "run a built-in benchmark end to end");
  common(bench, false);
  bench->add_option("name", o.name, "poly19, maglev, cartpend or reactor");

  // Usage errors still leave a manifest once a subcommand is known.
  auto usage_exit = [&]() -> int {
    const auto subs = app.get_subcommands();
    if (subs.empty()) return kUsage;
    try {
      return begin(subs.front()->get_name(), o).finish(kUsage);
    } catch (const std::exception&) {
      return kUsage;
    }
  };
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage_exit();
  }
  if (bench->parsed() && o.config.empty() && o.name.empty()) {
    std::cerr << "benchmark: give a name or --config\n";
    return usage_exit();
  }
  Run run;
  try {
    run = begin(app.get_subcommands().front()->get_name(), o);
  } catch (const std::exception& e) {
    std::cerr << "cannot create " << o.out << ": " << e.what() << "\n";
    return kUsage;
  }
  try {
    if (synth->parsed()) return cmd_synth(o, run);
    if (sim->parsed()) return cmd_simulate(o, run);
    if (ver->parsed()) return cmd_verify(o, run);
    return cmd_benchmark(o, run);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return run.finish(kUsage);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return run.finish(kUsage);
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return run.finish(kUsage);
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return run.finish(kNumeric);
  }
}
