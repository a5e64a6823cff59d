#include "convobs/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "convobs/io.hpp"

namespace convobs {

namespace {

void allow(const YAML::Node& n, const std::string& where, std::set<std::string> keys) {
  if (!n.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : n) {
    const auto k = kv.first.as<std::string>();
    if (!keys.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
T get(const YAML::Node& n, const std::string& where) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + ": bad value");
  }
}

VectorXd vec_of(const YAML::Node& n, const std::string& where) {
  if (!n.IsSequence()) throw ConfigError(where + ": expected a list of numbers");
  VectorXd v(static_cast<int>(n.size()));
  for (std::size_t i = 0; i < n.size(); ++i) v(static_cast<int>(i)) = get<double>(n[i], where);
  return v;
}

ParamMap params_of(const YAML::Node& n, const std::string& where) {
  ParamMap p;
  if (!n) return p;
  if (!n.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : n) p[kv.first.as<std::string>()] = get<double>(kv.second, where + "." + kv.first.as<std::string>());
  return p;
}

std::vector<std::string> names_of(const YAML::Node& n, const std::string& where) {
  if (!n) return {};
  if (!n.IsSequence()) throw ConfigError(where + ": expected a list of names");
  return get<std::vector<std::string>>(n, where);
}

PolyVector polys_of(const YAML::Node& n, const std::string& where) {
  PolyVector out;
  for (const auto& s : names_of(n, where)) {
    try {
      out.push_back(parse_polynomial(s));
    } catch (const std::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return out;
}

std::shared_ptr<const SystemModel> inline_model(const YAML::Node& n) {
  allow(n, "model", {"name", "states", "outputs", "inputs", "fx", "fy", "builtin", "params"});
  if (n["builtin"]) {
    const auto b = get<std::string>(n["builtin"], "model.builtin");
    if (b == "maglev-flux") return std::make_shared<SystemModel>(maglev_flux_model(MaglevParams::from(params_of(n["params"], "model.params"))));
    throw ConfigError("model.builtin: unknown model '" + b + "'");
  }
  auto x = names_of(n["states"], "model.states"), y = names_of(n["outputs"], "model.outputs"),
       u = names_of(n["inputs"], "model.inputs");
  PolyVector fx = polys_of(n["fx"], "model.fx"), fy = polys_of(n["fy"], "model.fy");
  if (fx.size() != x.size() || fy.size() != y.size()) throw ConfigError("model: one field per state and output");
  try {
    return std::make_shared<SystemModel>(SystemModel::polynomial(n["name"] ? n["name"].as<std::string>() : "model", x,
                                                                 y, u, fx, fy));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

void read_synth(const YAML::Node& n, SynthesisConfig& c) {
  allow(n, "synth", {"lambda", "mode", "phi_degree", "fz_degree", "k", "r_grid", "q_epsilon", "metric_degree",
                     "bisect_steps", "domain_substitution"});
  if (n["lambda"]) c.lambda = get<double>(n["lambda"], "synth.lambda");
  if (n["mode"]) {
    try {
      c.mode = parse_mode(get<std::string>(n["mode"], "synth.mode"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("synth.mode: ") + e.what());
    }
  }
  if (n["phi_degree"]) c.phi_degree = get<int>(n["phi_degree"], "synth.phi_degree");
  if (n["fz_degree"]) c.fz_degree = get<int>(n["fz_degree"], "synth.fz_degree");
  if (n["k"]) c.k = get<double>(n["k"], "synth.k");
  if (n["r_grid"]) c.r_grid = get<std::vector<double>>(n["r_grid"], "synth.r_grid");
  if (n["q_epsilon"]) c.q_epsilon = get<double>(n["q_epsilon"], "synth.q_epsilon");
  if (n["metric_degree"]) c.metric_degree = get<int>(n["metric_degree"], "synth.metric_degree");
  if (n["bisect_steps"]) c.bisect_steps = get<int>(n["bisect_steps"], "synth.bisect_steps");
  if (n["domain_substitution"]) {
    for (const auto& kv : n["domain_substitution"]) {
      const auto v = kv.first.as<std::string>();
      try {
        c.domain_substitution[v] = parse_polynomial(get<std::string>(kv.second, "synth.domain_substitution"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("synth.domain_substitution: ") + e.what());
      }
    }
  }
}

void read_sim(const YAML::Node& n, RunConfig& rc) {
  allow(n, "sim", {"T", "h", "x0", "y0", "w0", "xi0", "matched", "noise", "seed", "record_stride", "input"});
  SimConfig& c = rc.sim;
  if (n["T"]) c.T = get<double>(n["T"], "sim.T");
  if (n["h"]) c.h = get<double>(n["h"], "sim.h");
  if (n["x0"]) c.x0 = vec_of(n["x0"], "sim.x0");
  if (n["y0"]) c.y0 = vec_of(n["y0"], "sim.y0");
  if (n["w0"]) c.w0 = vec_of(n["w0"], "sim.w0");
  if (n["xi0"]) c.xi0 = vec_of(n["xi0"], "sim.xi0");
  if (n["matched"]) rc.sim_matched = get<bool>(n["matched"], "sim.matched");
  if (n["seed"]) c.seed = get<std::uint64_t>(n["seed"], "sim.seed");
  if (n["record_stride"]) c.record_stride = get<int>(n["record_stride"], "sim.record_stride");
  if (n["noise"]) {
    allow(n["noise"], "sim.noise", {"amplitude", "period"});
    if (n["noise"]["amplitude"]) c.noise.amplitude = get<double>(n["noise"]["amplitude"], "sim.noise.amplitude");
    if (n["noise"]["period"]) c.noise.period = get<double>(n["noise"]["period"], "sim.noise.period");
  }
  if (n["input"]) {
    const YAML::Node& in = n["input"];
    allow(in, "sim.input", {"kind", "value", "amplitude", "omega", "phase"});
    const auto kind = in["kind"] ? get<std::string>(in["kind"], "sim.input.kind") : std::string("zero");
    const int nu = rc.model ? rc.model->nu() : 0;
    if (kind == "zero") {
      c.input = InputSignal::zero(nu);
    } else if (kind == "constant") {
      c.input = InputSignal::constant(vec_of(in["value"], "sim.input.value"));
    } else if (kind == "sinusoid") {
      c.input = InputSignal::sinusoid(vec_of(in["amplitude"], "sim.input.amplitude"),
                                      get<double>(in["omega"], "sim.input.omega"),
                                      in["phase"] ? get<double>(in["phase"], "sim.input.phase") : 0.0);
    } else {
      throw ConfigError("sim.input.kind: expected zero, constant or sinusoid");
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("sim: ") + e.what());
  }
}

void read_verify(const YAML::Node& n, VerifyConfig& v) {
  allow(n, "verify", {"samples", "checks", "region", "along_runs"});
  if (n["samples"]) v.samples = get<int>(n["samples"], "verify.samples");
  if (v.samples < 1) throw ConfigError("verify.samples: must be positive");
  if (n["checks"]) v.checks = names_of(n["checks"], "verify.checks");
  if (n["along_runs"]) v.along_runs = get<bool>(n["along_runs"], "verify.along_runs");
  if (n["region"]) {
    allow(n["region"], "verify.region", {"lo", "hi"});
    v.region_lo = vec_of(n["region"]["lo"], "verify.region.lo");
    v.region_hi = vec_of(n["region"]["hi"], "verify.region.hi");
    if (v.region_lo.size() != v.region_hi.size() || ((v.region_hi - v.region_lo).array() < 0).any())
      throw ConfigError("verify.region: lo and hi must match and be ordered");
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (!root.IsMap()) throw ConfigError(origin + ": expected a mapping at the top level");
  allow(root, origin, {"format_version", "benchmark", "params", "model", "synth", "bisect", "sim", "verify", "spec"});
  if (!root["format_version"] || get<int>(root["format_version"], "format_version") != kFormatVersion)
    throw ConfigError(origin + ": format_version must be " + std::to_string(kFormatVersion));

  RunConfig rc;
  rc.path = origin;
  rc.params = params_of(root["params"], "params");
  if (root["benchmark"] && root["model"]) throw ConfigError(origin + ": give either benchmark or model");
  if (root["benchmark"]) {
    rc.benchmark_name = get<std::string>(root["benchmark"], "benchmark");
    try {
      rc.bench = benchmark(rc.benchmark_name, rc.params);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("benchmark: ") + e.what());
    }
    rc.model = rc.bench->model;
    rc.sim = rc.bench->sim;
  } else if (root["model"]) {
    rc.model = inline_model(root["model"]);
    rc.sim.input = InputSignal::zero(rc.model->nu());
  } else {
    throw ConfigError(origin + ": a benchmark or a model is required");
  }
  if (root["synth"]) read_synth(root["synth"], rc.synth);
  try {
    rc.synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("synth: ") + e.what());
  }
  if (root["bisect"]) {
    allow(root["bisect"], "bisect", {"lo", "hi", "steps"});
    BisectConfig b;
    b.hi = rc.synth.lambda;
    if (root["bisect"]["lo"]) b.lo = get<double>(root["bisect"]["lo"], "bisect.lo");
    if (root["bisect"]["hi"]) b.hi = get<double>(root["bisect"]["hi"], "bisect.hi");
    if (root["bisect"]["steps"]) b.steps = get<int>(root["bisect"]["steps"], "bisect.steps");
    if (!(b.lo >= 0 && b.hi > b.lo && b.steps > 0)) throw ConfigError("bisect: need 0 <= lo < hi and steps > 0");
    rc.bisect = b;
  }
  if (root["sim"]) read_sim(root["sim"], rc);
  if (root["verify"]) read_verify(root["verify"], rc.verify);
  if (root["spec"]) {
    rc.spec_path = get<std::string>(root["spec"], "spec");
    std::filesystem::path p(rc.spec_path);
    if (p.is_relative()) rc.spec_path = (std::filesystem::path(origin).parent_path() / p).string();
  }
  return rc;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace convobs
