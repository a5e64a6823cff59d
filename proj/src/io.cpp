#include "convobs/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "convobs/benchmarks.hpp"

namespace convobs {

namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json strings(const PolyVector& v) {
  Json a = Json::array();
  for (const auto& p : v) a.push_back(to_string(p));
  return a;
}

PolyVector polys(const Json& j) {
  PolyVector out;
  for (const auto& s : j) out.push_back(parse_polynomial(s.get<std::string>()));
  return out;
}

std::vector<std::string> names(const Json& j, const char* key) {
  return j.contains(key) ? j.at(key).get<std::vector<std::string>>() : std::vector<std::string>{};
}

}  // namespace

Json matrix_to_json(const MatrixXd& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

MatrixXd matrix_from_json(const Json& j) {
  const int n = static_cast<int>(j.size());
  const int c = n ? static_cast<int>(j[0].size()) : 0;
  MatrixXd m(n, c);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(j[i].size()) != c) throw FormatError("ragged matrix");
    for (int k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

Json vector_to_json(const VectorXd& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

VectorXd vector_from_json(const Json& j) {
  VectorXd v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

Json spec_to_json(const ObserverSpec& s) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "observer_spec";
  j["name"] = s.name;
  j["x_names"] = s.x_names;
  j["w_names"] = s.w_names;
  j["y_names"] = s.y_names;
  j["u_names"] = s.u_names;
  j["lambda"] = s.lambda;
  j["k"] = s.k;
  j["mode"] = s.mode;
  j["strategy"] = to_string(s.strategy);
  if (!s.builtin.empty()) {
    j["builtin"] = s.builtin;
    j["params"] = s.params;
    return j;
  }
  if (!s.phi.poly() || !s.fz_poly) throw FormatError("spec '" + s.name + "' has no symbolic form to serialize");
  if (s.phi.is_affine()) {
    const MatrixXd& P = s.phi.P();
    const auto xe = s.xe_names();
    PolyVector varphi = *s.phi.poly();
    for (int i = 0; i < P.rows(); ++i)
      for (int k = 0; k < P.cols(); ++k) varphi[i] -= Polynomial::variable(xe[k]) * P(i, k);
    j["phi"] = {{"form", "affine"}, {"P", matrix_to_json(P)}, {"varphi", strings(varphi)}};
  } else {
    j["phi"] = {{"form", "polynomial"}, {"map", strings(*s.phi.poly())}};
  }
  j["fz"] = strings(*s.fz_poly);
  j["metric"] = matrix_to_json(s.metric);
  if (s.r) j["r"] = *s.r;
  if (s.Q.size()) j["Q"] = matrix_to_json(s.Q);
  if (s.P_metric.size()) j["P_metric"] = matrix_to_json(s.P_metric);
  if (!s.params.empty()) j["params"] = s.params;
  return j;
}

ObserverSpec spec_from_json(const Json& j) {
  if (!j.contains("format_version") || j["format_version"] != kFormatVersion)
    throw FormatError("observer spec: unsupported or missing format_version");
  try {
    if (j.contains("builtin")) {
      const std::string b = j["builtin"];
      auto params = j.value("params", std::map<std::string, double>{});
      if (b == "cartpend") return cartpend_reference_spec(CartpendParams::from(params));
      if (b == "reactor") return reactor_reference_spec(params.at("lambda"), params.at("rho"));
      throw FormatError("unknown builtin spec '" + b + "'");
    }
    std::vector<std::string> xe = names(j, "x_names"), w = names(j, "w_names");
    const int nx = static_cast<int>(xe.size());
    xe.insert(xe.end(), w.begin(), w.end());
    const Json& phi = j.at("phi");
    PolyVector fz = polys(j.at("fz"));
    MatrixXd metric = matrix_from_json(j.at("metric"));
    ObserverSpec s;
    if (phi.at("form") == "affine") {
      s = make_affine_spec(j.at("name"), matrix_from_json(phi.at("P")), polys(phi.at("varphi")), fz, xe,
                           names(j, "y_names"), names(j, "u_names"), nx, j.at("lambda"), j.at("k"));
      s.metric = metric;
    } else if (phi.at("form") == "polynomial") {
      s = make_polynomial_spec(j.at("name"), polys(phi.at("map")), fz, xe, names(j, "y_names"), names(j, "u_names"),
                               nx, metric, j.at("lambda"), j.at("k"));
    } else {
      throw FormatError("unknown phi form");
    }
    s.mode = j.value("mode", "");
    if (j.contains("r")) s.r = j["r"].get<double>();
    if (j.contains("Q")) s.Q = matrix_from_json(j["Q"]);
    if (j.contains("P_metric")) s.P_metric = matrix_from_json(j["P_metric"]);
    if (j.contains("params")) s.params = j["params"].get<std::map<std::string, double>>();
    return s;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("observer spec: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw FormatError(std::string("observer spec: missing parameter ") + e.what());
  }
}

Json report_to_json(const CheckReport& r) {
  Json j;
  j["id"] = r.id;
  j["status"] = to_string(r.status);
  j["worst_margin"] = number(r.worst_margin);
  j["worst_point"] = vector_to_json(r.worst_point);
  j["samples"] = r.samples;
  j["tolerance"] = r.tolerance;
  j["message"] = r.message;
  return j;
}

Json reports_to_json(const std::vector<CheckReport>& rs) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "check_reports";
  j["reports"] = Json::array();
  for (const auto& r : rs) j["reports"].push_back(report_to_json(r));
  return j;
}

Json synthesis_to_json(const SynthesisResult& r) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "synthesis";
  j["status"] = to_string(r.status);
  j["lambda"] = r.lambda;
  j["r"] = r.r ? Json(*r.r) : Json(nullptr);
  j["largest_feasible_lambda"] = r.largest_feasible_lambda ? Json(*r.largest_feasible_lambda) : Json(nullptr);
  j["slack"] = number(r.sos.slack);
  j["message"] = r.message;
  Json certs = Json::array();
  for (const auto& c : r.sos.certificates)
    certs.push_back({{"label", c.label}, {"size", c.gram.rows()}, {"min_eigenvalue", number(c.min_eigenvalue())}});
  j["certificates"] = certs;
  return j;
}

Json RunManifest::to_json() const {
  Json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "run_manifest";
  j["command"] = command;
  j["config"] = config_path;
  j["seed"] = seed;
  j["out"] = out_dir;
  j["tool_version"] = tool_version;
  j["outputs"] = outputs;
  j["exit_code"] = exit_code;
  j["seconds"] = seconds;
  return j;
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream f(path);
  if (!f) throw FormatError("cannot write " + path);
  f << j.dump(2) << '\n';
}

Json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot read " + path);
  Json j;
  try {
    j = Json::parse(f);
  } catch (const Json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (!j.contains("format_version")) throw FormatError(path + ": missing format_version");
  if (j["format_version"] != kFormatVersion) throw FormatError(path + ": unsupported format_version");
  return j;
}

}  // namespace convobs
