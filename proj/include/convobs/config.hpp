#pragma once

// YAML run configurations consumed by the command-line tool.
//
//   format_version: 1
//   benchmark: poly19            # or an inline polynomial `model:`
//   params: {ell: 0.5}
//   synth: {lambda: 1, mode: h3, phi_degree: 2, fz_degree: 3, k: 0.1}
//   bisect: {lo: 0, hi: 2, steps: 6}
//   sim: {T: 10, h: 0.001, x0: [3, 5], y0: [-4], noise: {amplitude: 0.02, period: 0.001}}
//   verify: {samples: 1000, checks: [H1, H2, H3, A2], region: {lo: [...], hi: [...]}}

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "convobs/benchmarks.hpp"
#include "convobs/synth.hpp"

namespace convobs {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BisectConfig {
  double lo = 0.0, hi = 0.0;
  int steps = 6;
};

struct VerifyConfig {
  int samples = 1000;
  std::vector<std::string> checks;  // empty: H1, H2, H3 (affine), A2, PDE (cartpend)
  VectorXd region_lo, region_hi;    // empty: the benchmark box
  bool along_runs = false;          // also check A2 along the benchmark runs
};

struct RunConfig {
  std::string path;
  std::string benchmark_name;  // empty for inline models
  ParamMap params;
  std::optional<Benchmark> bench;
  std::shared_ptr<const SystemModel> model;
  SynthesisConfig synth;
  std::optional<BisectConfig> bisect;
  SimConfig sim;
  bool sim_matched = false;  // xi0 = phi(x0, y0)
  VerifyConfig verify;
  std::string spec_path;     // relative paths resolved against the config file
};

/// Throws ConfigError on unreadable files, unknown keys or bad values.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& origin = "<string>");

}  // namespace convobs
