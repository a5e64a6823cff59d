#pragma once

// Sampled and exact checks of the certificate conditions. Independent of the
// synthesis code path: everything here works from an ObserverSpec and a
// model, never from SOS data.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convobs/model.hpp"
#include "convobs/observer.hpp"
#include "convobs/sim.hpp"

namespace convobs {

enum class CheckStatus { Pass, BoundaryPass, Fail, PreconditionFail };

std::string to_string(CheckStatus s);

struct CheckReport {
  std::string id;
  CheckStatus status = CheckStatus::Fail;
  VectorXd worst_point;
  double worst_margin = 0.0;  // largest value of the "<= 0" quantity
  int samples = 0;
  double tolerance = 0.0;
  std::string message;

  bool ok() const { return status == CheckStatus::Pass || status == CheckStatus::BoundaryPass; }
};

/// Pass when v < -tol, boundary-pass when |v| <= tol, fail above.
CheckStatus classify(double v, double tol);
/// 1e-9 absolute plus 1e-6 relative to `scale`.
inline double check_tolerance(double scale) { return 1e-9 + 1e-6 * scale; }

/// A state sample: extended state x_e = col(x, w), output and input.
struct SamplePoint {
  VectorXd xe, y, u;
  VectorXd stacked() const;  // col(x_e, y, u)
};
using Region = std::vector<SamplePoint>;

/// Halton points of the box over col(x_e, y) (inputs held at `u`), keeping
/// those whose col(x, y) lies in the model domain. Without `skip` the box
/// center comes first.
Region box_region(const SystemModel& m, int nw, const VectorXd& lo, const VectorXd& hi, int n,
                  const VectorXd& u = VectorXd(), int skip = 0);
/// Every `stride`-th recorded state of a trajectory.
Region trajectory_region(const Trajectory& tr, int stride = 1);

struct VerifyOptions {
  int jobs = 1;
};

CheckReport check_H1(const ObserverSpec& spec, const Region& region, const VerifyOptions& o = {});

/// Exact coefficient residual for polynomial specs and models; otherwise the
/// largest sampled residual of Phi_x f_x + Phi_y f_y (+ Phi_w f_w) - f_z.
CheckReport check_H2(const ObserverSpec& spec, const SystemModel& m, const Region& region,
                     const AugmentedModel* aug = nullptr, const VerifyOptions& o = {});

/// max eig(F + F' + Q) with Q = 2 lambda Phi_x (affine specs) or spec.Q.
CheckReport check_H3(const ObserverSpec& spec, const Region& region, const VerifyOptions& o = {});

/// Minimum eigenvalue of the H4 block (negated, so the quantity is "<= 0").
CheckReport check_H4(const ObserverSpec& spec, const Region& region, const VerifyOptions& o = {});

/// Metric in xi coordinates; may depend on (xi, y).
using MetricField = std::function<MatrixXd(const VectorXd& xi, const VectorXd& y)>;

/// lambda_max(d_f M + A + A') + 2 lambda lambda_min(M) <= 1e-6 with
/// A = M F Phi_x^-1. The metric defaults to spec.metric; non-constant metrics
/// are differentiated along (f_z, f_y) with central differences, h = 1e-5.
CheckReport check_A2(const ObserverSpec& spec, const SystemModel& m, const Region& region, double lambda,
                     const MetricField& metric = {}, const AugmentedModel* aug = nullptr, const VerifyOptions& o = {});

/// sup |dphi/dy(y) Psi(y) + lambda I|_inf < 1e-8 over the grid.
CheckReport check_pde(const std::function<MatrixXd(const VectorXd&)>& dphi,
                      const std::function<MatrixXd(const VectorXd&)>& Psi, double lambda,
                      const std::vector<VectorXd>& grid);

/// Autonomous vector field on chi.
struct VectorField {
  std::function<VectorXd(const VectorXd&)> f;
  std::function<MatrixXd(const VectorXd&)> jacobian;
};

struct TransverseWitness {
  std::function<MatrixXd(const VectorXd&)> psi_jacobian;  // d psi / d chi
  std::function<MatrixXd(const VectorXd&)> metric;        // P(chi)
  /// Semi-definite metric factors W = Psi P Psi'.
  std::function<MatrixXd(const VectorXd&)> Psi;
  std::function<MatrixXd(const VectorXd&)> P;
};

/// lambda_max of psi_chi (d_f P + P J + J' P) psi_chi' < -1e-9 at every point.
CheckReport check_transverse(const VectorField& f, const TransverseWitness& w, const std::vector<VectorXd>& points);

/// Symmetry of each column Jacobian of Psi first, then lambda_max of
/// Psi' (d_f W + J' W + W J) Psi < 0.
CheckReport check_semidefinite_metric(const VectorField& f, const TransverseWitness& w,
                                      const std::vector<VectorXd>& points);

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace convobs
