#pragma once

// JSON files for observer specs, check reports, synthesis summaries and run
// manifests. Every document carries "format_version".

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "convobs/observer.hpp"
#include "convobs/synth.hpp"
#include "convobs/verify.hpp"

namespace convobs {

inline constexpr int kFormatVersion = 1;
using Json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json matrix_to_json(const MatrixXd& m);
MatrixXd matrix_from_json(const Json& j);
Json vector_to_json(const VectorXd& v);
VectorXd vector_from_json(const Json& j);

/// Polynomial specs store phi and f_z as polynomial strings; closed-form
/// specs store their builtin name and parameters.
Json spec_to_json(const ObserverSpec& s);
ObserverSpec spec_from_json(const Json& j);

Json report_to_json(const CheckReport& r);
Json reports_to_json(const std::vector<CheckReport>& rs);

/// Status, rate, step, bisection result and certificate summary; no timing.
Json synthesis_to_json(const SynthesisResult& r);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_dir;
  std::string tool_version;
  double seconds = 0.0;
  std::vector<std::string> outputs;
  int exit_code = 0;

  Json to_json() const;
};

/// Pretty-printed with a trailing newline.
void write_json(const std::string& path, const Json& j);
/// Throws FormatError on unreadable files, bad JSON or a missing or
/// unsupported format_version.
Json read_json(const std::string& path);

}  // namespace convobs
