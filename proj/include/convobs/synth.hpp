#pragma once

// Convex observer synthesis for polynomial plants.
//
// Unknowns: the transformation phi (affine P x + varphi(y) in the H3 modes,
// a general polynomial in the H4 modes), the metric P and f_z. f_z is
// eliminated through the correctness identity
//   f_z = Phi_x f_x + Phi_y f_y (+ Phi_w f_w),
// which is affine in the unknowns; monomials beyond the f_z degree become
// linear equalities. The contraction and monotonicity conditions are matrix
// SOS constraints.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "convobs/model.hpp"
#include "convobs/observer.hpp"
#include "convobs/sos.hpp"

namespace convobs {

enum class SynthMode { H3, H4, H3p, H4p };

std::string to_string(SynthMode m);
SynthMode parse_mode(const std::string& s);

struct SynthesisConfig {
  int phi_degree = 2;   // varphi(y) in H3 modes, phi(x, y) in H4 modes
  int fz_degree = 3;
  double lambda = 1.0;  // 0: asymptotic only, Q = q_epsilon I
  double k = 0.1;
  SynthMode mode = SynthMode::H3;
  std::vector<double> r_grid = default_r_grid();
  double q_epsilon = 1e-3;
  /// Replace a variable inside the SOS subjects only (e.g. q = c - s^2 to
  /// encode q < c globally).
  std::map<std::string, Polynomial> domain_substitution;
  /// H3 with P(y) of this degree in y (0: constant P).
  int metric_degree = 0;
  /// Bisection steps on [0, lambda] after a rejection (0 disables).
  int bisect_steps = 6;
  SdpOptions sdp;

  static std::vector<double> default_r_grid();
  void validate() const;
};

/// Monomials of Phi f whose coefficient is fixed and nonzero but exceed the
/// f_z degree.
class UncoverableMonomials : public std::invalid_argument {
 public:
  explicit UncoverableMonomials(std::vector<std::string> monomials);
  const std::vector<std::string>& monomials() const { return monomials_; }

 private:
  std::vector<std::string> monomials_;
};

struct CorrectnessSystem {
  DecisionPolyVector fz;                // Phi f truncated to the f_z degree
  std::vector<AffineExpr> equalities;   // coefficients that must vanish
  std::vector<std::string> labels;      // "component:monomial"
};

/// phi is over (x, w, y); f_w (optional) over (x, w, y, u). Adds the
/// equalities to `prog` and returns f_z.
CorrectnessSystem build_correctness(SosProgram& prog, const SystemModel& m, const DecisionPolyVector& phi,
                                    int fz_degree, const std::vector<std::string>& w_names = {},
                                    const DecisionPolyVector& fw = {});

struct SynthesisResult {
  SosStatus status = SosStatus::Failed;
  std::optional<ObserverSpec> spec;
  double lambda = 0.0;
  std::optional<double> r;
  SosResult sos;
  std::optional<double> largest_feasible_lambda;
  double seconds = 0.0;
  std::string message;

  bool accepted() const { return status == SosStatus::Feasible || status == SosStatus::Marginal; }
};

/// Certificate program: H1, H2 and H3 or H4.
SynthesisResult synthesize(const SystemModel& m, const SynthesisConfig& cfg);

/// Largest accepted rate in [lo, hi] after `steps` bisection steps.
/// Returns nullopt when even `lo` is rejected.
std::optional<double> bisect_lambda(const SystemModel& m, SynthesisConfig cfg, double lo, double hi, int steps,
                                    SynthesisResult* best = nullptr);

/// Immersion variant over x_e = col(x, w) with f_w fixed (H1', H2', H3'/H4').
SynthesisResult synthesize_immersed(const AugmentedModel& am, const SynthesisConfig& cfg);

/// Lower-level entry used by synthesize_immersed; f_w may carry unknowns,
/// which raises BilinearError when phi multiplies them.
SynthesisResult synthesize_with(const SystemModel& m, const std::vector<std::string>& w_names,
                                const DecisionPolyVector& fw, const SynthesisConfig& cfg, SosProgram* prog = nullptr);

struct SdoTransform {
  Transformation phi;
  PolyVector phi_poly;    // H(x, y) - l Lambda y
  PolyVector lie_chain;   // H(x, y) = (f_y, L_f f_y, ...)
  PolyVector fz;          // exact d/dt phi along the plant
  MatrixXd Q;             // companion matrix of Lambda
  PolyVector b;           // (0, ..., 0, L_f^{n_x} f_y)
};

class NotHurwitz : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Single-output autonomous polynomial plants.
SdoTransform sdo_transform(const SystemModel& m, double ell, const VectorXd& Lambda);

}  // namespace convobs
