#pragma once

// Built-in benchmark plants, their reference observers and default runs.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convobs/model.hpp"
#include "convobs/observer.hpp"
#include "convobs/sim.hpp"
#include "convobs/verify.hpp"

namespace convobs {

using ParamMap = std::map<std::string, double>;

struct Benchmark {
  std::string name;
  std::shared_ptr<const SystemModel> model;
  std::optional<AugmentedModel> augmented;
  ObserverSpec reference;
  SimConfig sim;
  /// Box over col(x_e, y) used for sampled verification.
  VectorXd region_lo, region_hi;
  /// Plant initial conditions for trajectory-based checks.
  std::vector<SimConfig> runs;
  /// Acceptance thresholds.
  std::map<std::string, double> expected;
  ParamMap params;

  /// Halton samples of the region box intersected with the domain; the
  /// reactor uses states along its runs instead (its certificate holds on
  /// the invariant set of the augmentation).
  Region region(int n) const;
  /// Copy of `cfg` with xi0 = phi(x0, w0, y0).
  SimConfig matched(const SimConfig& cfg) const;
  Trajectory simulate(const SimConfig& cfg) const;
  Trajectory simulate() const { return simulate(sim); }
  const AugmentedModel* aug() const { return augmented ? &*augmented : nullptr; }
};

std::vector<std::string> benchmark_names();

/// Throws std::invalid_argument on an unknown name or parameter.
Benchmark benchmark(const std::string& name, const ParamMap& params = {});

// Polynomial example: x = (x1, x2), y scalar.
SystemModel poly19_model();
/// P = diag(0.6370, 0.6369), varphi = (-2.1872 y, -0.6368 y), f_z completed
/// from the correctness equation; lambda = 1, k = 0.1.
ObserverSpec poly19_reference_spec();

// Magnetic levitation: x = (lam, p), y = q, u = voltage.
struct MaglevParams {
  double m = 0.1, R = 2.5, k = 0.65, c = 0.005, g = 9.81, ell = 0.5;
  static MaglevParams from(const ParamMap& p);
  ParamMap to_map() const;
};
SystemModel maglev_model(const MaglevParams& p = {});
/// phi = (lam, p - ell q); metric diag(1e4, 1) in xi coordinates.
ObserverSpec maglev_reference_spec(const MaglevParams& p = {});
/// Flux subsystem x = {lam}, y = {q}, inputs {u, p}.
SystemModel maglev_flux_model(const MaglevParams& p = {});

// Cart-pendulum in port-Hamiltonian form: x = p (momenta), y = q.
struct CartpendParams {
  double m = 1.0, a = 1.0, b = 0.1, lambda = 1.0;
  static CartpendParams from(const ParamMap& p);
  ParamMap to_map() const;
};
MatrixXd cartpend_Psi(const VectorXd& q, const CartpendParams& p);
/// varphi(y) = -lambda (int_0^{y1} sqrt(1 - (b^2/m) cos^2 s) ds, (b/sqrt m) sin y1 + sqrt(m) y2).
VectorXd cartpend_varphi(const VectorXd& q, const CartpendParams& p);
MatrixXd cartpend_dvarphi(const VectorXd& q, const CartpendParams& p);
SystemModel cartpend_model(const CartpendParams& p = {});
ObserverSpec cartpend_reference_spec(const CartpendParams& p = {});
/// PDE residual check on an n-point grid of y1 in [-pi, pi] (y2 = 0.3).
CheckReport cartpend_pde_check(const CartpendParams& p, double lambda_checked, int n = 200);

// Bioreactor x' = -mu(x) y, y' = mu(x) y, mu(x) = x (1 - x), with the
// augmentation w' = -w + (ln y, 2y + 1, y + y^2).
SystemModel reactor_model();
AugmentedModel reactor_augmentation(std::shared_ptr<const SystemModel> base);
/// Root  (w2 - sqrt(w2^2 - 4 (w3 - w1 + ln y))) / 2  of the invariant quadratic.
double reactor_root(const VectorXd& w, double y);
/// z^2 - w2 z + w3 - w1 + ln y with z = x + y; zero along exact-IC runs.
double reactor_quadratic(double x, const VectorXd& w, double y);
/// w(0) on the invariant set with the root above equal to x + y.
VectorXd reactor_consistent_w0(double x0, double y0);
/// w2(0) = w3(0) = 0, w1(0) = (x0 + y0)^2 + ln y0.
VectorXd reactor_identity_w0(double x0, double y0);
/// xi = (x + y, rho w), f_z = (-(x + y) + root(w, y), rho (-w + f_a(y))).
ObserverSpec reactor_reference_spec(double lambda, double rho);
/// Smallest rho making F + F' + 2 lambda P <= 0 along the given states, times `slack`.
double reactor_required_rho(const Region& states, double lambda, double slack = 2.0);
/// The same observer in the ordering xi = (w, x + y).
ObserverDynamics reactor_w_first_observer();

// High-gain observer baseline for the reactor, in the coordinates
// (ln y, mu(x), (1 - 2x) mu(x)).
// Defaults bound ln y, mu and the third-state drift over x in (0, 0.4],
// y in [0.2, 0.6] with 20% slack.
struct HgoParams {
  double ell = 3.0;
  double xi1_bar = 0.72;
  double m = -0.03, M = 0.077;
  double xi2_star = 0.3;
  void validate() const;
};

enum class HgoBranch { Clamped, Cubic, Ratio };
std::string to_string(HgoBranch b);

struct HgoOutput {
  VectorXd dxi;   // d xi / dt
  VectorXd xhat;  // (y estimate, x estimate)
  HgoBranch branch = HgoBranch::Ratio;
  double phi_tilde = 0.0;
};

/// Start from the measured output: (ln y, 0, 0).
VectorXd hgo_reactor_xi0(double y0);

HgoOutput hgo_reactor_rhs(const VectorXd& xi, double y, const HgoParams& p = {});
/// Simulator view; the estimate is the x component.
ObserverDynamics hgo_reactor_dynamics(const HgoParams& p = {});

}  // namespace convobs
