#pragma once

// Fixed-step RK4 co-integration of plant, augmentation and observer.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convobs/model.hpp"
#include "convobs/observer.hpp"

namespace convobs {

struct NoiseConfig {
  double amplitude = 0.0;  // uniform on [-a, a]; 0 disables
  double period = 1e-3;    // zero-order hold
};

struct SimConfig {
  double h = 1e-3;
  double T = 10.0;
  VectorXd x0, y0, w0;
  VectorXd xi0;
  InputSignal input;
  NoiseConfig noise;
  std::uint64_t seed = 1;
  int record_stride = 1;

  void validate() const;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<VectorXd> x, y, y_noisy, u, w, xi, xhat;
  std::vector<double> err;  // |x_hat - x|

  bool exited = false;  // domain exit or numeric failure truncated the run
  std::string exit_reason;
  double exit_time = 0.0;

  std::size_t size() const { return t.size(); }
  /// Final plant and observer state stacked as col(x, y, w, xi).
  VectorXd terminal_state() const;
  /// Root-mean-square of err over t >= t0.
  double rms_error(double t0) const;
};

/// Plant-side hook used to integrate extra states (augmentations).
struct PlantDynamics {
  int nx = 0, ny = 0, nw = 0;
  std::function<VectorXd(const VectorXd& x, const VectorXd& y, const VectorXd& u)> fx, fy;
  std::function<VectorXd(const VectorXd& x, const VectorXd& w, const VectorXd& y, const VectorXd& u)> fw;
  std::function<std::string(const VectorXd& chi)> violated;  // empty when inside

  static PlantDynamics of(const SystemModel& m);
  static PlantDynamics of(const AugmentedModel& am);
};

Trajectory simulate(const PlantDynamics& plant, const ObserverDynamics& obs, const SimConfig& cfg);
Trajectory simulate(const SystemModel& m, const ObserverSpec& spec, const SimConfig& cfg);
Trajectory simulate(const AugmentedModel& am, const ObserverSpec& spec, const SimConfig& cfg);

struct RateFit {
  double rate = 0.0;       // -slope of log error
  double intercept = 0.0;  // of log error
  double r2 = 0.0;
  int points = 0;
};

/// Least-squares fit of log e(t) on [t0, t1]; throws when any error on the
/// window is below 1e-12.
RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& e, double t0, double t1);
RateFit fit_rate(const Trajectory& traj, double t0, double t1);

/// First time the error drops below `level` and stays there; nullopt if never.
std::optional<double> settling_time(const Trajectory& traj, double level);

/// CSV with header t,x1..,y1..,y_noisy1..,u1..,xi1..,xhat1..,err_norm.
void write_csv(std::ostream& os, const Trajectory& traj);

}  // namespace convobs
