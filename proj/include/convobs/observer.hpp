#pragma once

// Reduced-order observers  xi' = f_z(x_hat, y, u),  x_hat = phi^L(xi, y).

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convobs/model.hpp"
#include "convobs/poly.hpp"

namespace convobs {

enum class LeftInverse { AffineClosedForm, NewtonMonotone, Custom };

std::string to_string(LeftInverse s);

struct ObserverSpec {
  using Fz = std::function<VectorXd(const VectorXd& xe, const VectorXd& y, const VectorXd& u)>;
  using FzJacobian = std::function<MatrixXd(const VectorXd& xe, const VectorXd& y, const VectorXd& u)>;
  using Inverse = std::function<VectorXd(const VectorXd& xi, const VectorXd& y)>;

  std::string name;
  int nx = 0, nw = 0, ny = 0, nu = 0;
  std::vector<std::string> x_names, w_names, y_names, u_names;

  Transformation phi;
  Fz fz;              // in original coordinates x_e = col(x, w)
  FzJacobian fz_xe;   // d f_z / d x_e
  std::optional<PolyVector> fz_poly;  // over x, w, y, u names

  MatrixXd metric;    // constant metric M in xi coordinates
  double lambda = 0.0;
  double k = 0.0;     // monotonicity margin
  LeftInverse strategy = LeftInverse::AffineClosedForm;
  Inverse custom_inverse;

  // Synthesis record.
  std::string mode;
  VectorXd theta;
  std::optional<double> r;
  MatrixXd Q;
  MatrixXd P_metric;  // H4 metric P

  // Closed-form specs are serialized by name and parameters.
  std::string builtin;
  std::map<std::string, double> params;

  int nxe() const { return nx + nw; }
  int nxi() const { return phi.nxi(); }
  std::vector<std::string> xe_names() const;
};

/// phi = P x_e + varphi(y) with polynomial varphi and f_z; metric P^-1.
ObserverSpec make_affine_spec(std::string name, const MatrixXd& P, const PolyVector& varphi, const PolyVector& fz,
                              std::vector<std::string> xe_names, std::vector<std::string> y_names,
                              std::vector<std::string> u_names, int nx, double lambda, double k);

/// General polynomial phi (Newton left inverse).
ObserverSpec make_polynomial_spec(std::string name, const PolyVector& phi, const PolyVector& fz,
                                  std::vector<std::string> xe_names, std::vector<std::string> y_names,
                                  std::vector<std::string> u_names, int nx, const MatrixXd& metric, double lambda,
                                  double k);

struct NewtonOptions {
  double tolerance = 1e-10;  // relative to 1 + |xi|
  int max_iterations = 100;
  double min_step = 1.0 / (1 << 20);
};

class NewtonFailure : public std::runtime_error {
 public:
  NewtonFailure(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Result of a left inversion: x_e estimate and Newton iteration count.
struct InverseResult {
  VectorXd xe;
  int iterations = 0;
  double residual = 0.0;
};

InverseResult left_inverse(const ObserverSpec& spec, const VectorXd& xi, const VectorXd& y,
                           const VectorXd* guess = nullptr, const NewtonOptions& opts = {});

/// Damped Newton on phi(x, y) = xi regardless of the spec strategy.
InverseResult newton_inverse(const ObserverSpec& spec, const VectorXd& xi, const VectorXd& y,
                             const VectorXd* guess = nullptr, const NewtonOptions& opts = {});

VectorXd observer_rhs(const ObserverSpec& spec, const VectorXd& xi, const VectorXd& y, const VectorXd& u);

struct ObserverState {
  VectorXd xi;
  VectorXd xhat;
  VectorXd what;
  int newton_iterations = 0;
};

/// Runtime view used by the simulator; HGO-style observers plug in here too.
struct ObserverDynamics {
  int dim = 0;
  std::function<VectorXd(const VectorXd& xi, const VectorXd& y, const VectorXd& u)> rhs;
  /// Unmeasured-state estimate x_hat.
  std::function<VectorXd(const VectorXd& xi, const VectorXd& y)> estimate;
};

ObserverDynamics dynamics(const ObserverSpec& spec);

}  // namespace convobs
