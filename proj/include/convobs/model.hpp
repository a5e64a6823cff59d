#pragma once

// Plants split into unmeasured states x and measured outputs y:
//   x' = f_x(x, y, u),   y' = f_y(x, y, u).
// Polynomial plants carry symbolic fields; closed-form plants carry callables
// with hand-written Jacobians that are checked against finite differences at
// construction.

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convobs/poly.hpp"

namespace convobs {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// A point left the declared state domain.
class DomainError : public std::domain_error {
 public:
  DomainError(const std::string& constraint, const VectorXd& point);
  const std::string& constraint() const { return constraint_; }

 private:
  std::string constraint_;
};

/// Closed-form Jacobian disagrees with finite differences.
class JacobianMismatch : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Jacobians {
  MatrixXd fx_x, fx_y, fy_x, fy_y;
};

/// Strict inequality margin(chi) > 0 on chi = col(x, y).
struct DomainConstraint {
  std::string name;
  std::function<double(const VectorXd&)> margin;
};

/// Exogenous input u(t).
class InputSignal {
 public:
  InputSignal() : InputSignal(zero(0)) {}

  static InputSignal zero(int n);
  static InputSignal constant(const VectorXd& value);
  /// amplitude * cos(omega t + phase), per channel.
  static InputSignal sinusoid(const VectorXd& amplitude, double omega, double phase = 0.0);
  /// Piecewise-linear interpolation, held constant outside the table.
  static InputSignal tabulated(std::vector<double> times, std::vector<VectorXd> values);

  VectorXd operator()(double t) const { return fn_(t); }
  int dim() const { return dim_; }
  const std::string& describe() const { return desc_; }

 private:
  InputSignal(int dim, std::function<VectorXd(double)> fn, std::string desc)
      : dim_(dim), fn_(std::move(fn)), desc_(std::move(desc)) {}
  int dim_;
  std::function<VectorXd(double)> fn_;
  std::string desc_;
};

class SystemModel {
 public:
  using Field = std::function<VectorXd(const VectorXd& x, const VectorXd& y, const VectorXd& u)>;
  using FieldJacobians = std::function<Jacobians(const VectorXd& x, const VectorXd& y, const VectorXd& u)>;

  /// Fields are polynomials over x_names, y_names and u_names.
  static SystemModel polynomial(std::string name, std::vector<std::string> x_names, std::vector<std::string> y_names,
                                std::vector<std::string> u_names, PolyVector fx, PolyVector fy);

  /// The Jacobians are compared with central differences at `validation`
  /// random points of the box (or at the origin when the box is unbounded);
  /// a relative error above 1e-6 raises JacobianMismatch.
  static SystemModel closed_form(std::string name, int nx, int ny, int nu, Field fx, Field fy, FieldJacobians jac,
                                 std::vector<DomainConstraint> constraints = {},
                                 std::optional<std::pair<VectorXd, VectorXd>> box = std::nullopt, int validation = 50);

  const std::string& name() const { return name_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nu() const { return nu_; }
  int nchi() const { return nx_ + ny_; }
  const std::vector<std::string>& x_names() const { return x_names_; }
  const std::vector<std::string>& y_names() const { return y_names_; }
  const std::vector<std::string>& u_names() const { return u_names_; }

  bool is_polynomial() const { return fx_poly_.has_value(); }
  const PolyVector& fx_poly() const;
  const PolyVector& fy_poly() const;

  VectorXd fx(const VectorXd& x, const VectorXd& y, const VectorXd& u) const;
  VectorXd fy(const VectorXd& x, const VectorXd& y, const VectorXd& u) const;
  /// Throws DomainError outside the domain.
  Jacobians jacobians(const VectorXd& x, const VectorXd& y, const VectorXd& u) const;

  // Domain: optional box on chi plus strict inequalities.
  void set_box(const VectorXd& lo, const VectorXd& hi);
  const VectorXd& box_lo() const { return lo_; }
  const VectorXd& box_hi() const { return hi_; }
  void add_constraint(DomainConstraint c) { constraints_.push_back(std::move(c)); }
  const std::vector<DomainConstraint>& constraints() const { return constraints_; }
  /// Name of the first violated constraint, empty when inside.
  std::string violated(const VectorXd& chi) const;
  bool in_domain(const VectorXd& chi) const { return violated(chi).empty(); }
  void check_domain(const VectorXd& chi) const;

  /// Deterministic low-discrepancy points of the box intersected with the
  /// constraints. `box` overrides the stored box (needed when it is infinite).
  std::vector<VectorXd> sample(int n, std::optional<std::pair<VectorXd, VectorXd>> box = std::nullopt,
                               int skip = 0) const;

  /// Parameter record for reports and spec files.
  std::map<std::string, double> parameters;
  std::string input_class = "zero";

 private:
  SystemModel() = default;

  std::string name_;
  int nx_ = 0, ny_ = 0, nu_ = 0;
  std::vector<std::string> x_names_, y_names_, u_names_;
  std::optional<PolyVector> fx_poly_, fy_poly_;
  Field fx_, fy_;
  FieldJacobians jac_;
  VectorXd lo_, hi_;
  std::vector<DomainConstraint> constraints_;
};

/// Splits chi = col(x, y).
inline VectorXd chi_of(const VectorXd& x, const VectorXd& y) {
  VectorXd c(x.size() + y.size());
  c << x, y;
  return c;
}

/// Halton point `index` (1-based recommended) in [0,1]^dim.
VectorXd halton(int index, int dim);

/// Central-difference Jacobian of g at v.
MatrixXd numeric_jacobian(const std::function<VectorXd(const VectorXd&)>& g, const VectorXd& v, double h = 1e-6);

/// Augmentation w' = f_w(x, w, y, u) with a constant contraction witness
/// M_w: (M_w A + A' M_w) <= -2 lambda_w M_w, A = d f_w / d w.
struct AugmentedModel {
  using WField = std::function<VectorXd(const VectorXd& x, const VectorXd& w, const VectorXd& y, const VectorXd& u)>;
  using WJacobian = std::function<MatrixXd(const VectorXd& x, const VectorXd& w, const VectorXd& y, const VectorXd& u)>;

  std::shared_ptr<const SystemModel> base;
  int nw = 0;
  std::vector<std::string> w_names;
  WField fw;
  WJacobian fw_w;
  std::optional<PolyVector> fw_poly;  // over x, w, y, u names
  MatrixXd Mw;
  double lambda_w = 0.0;

  int nxe() const { return base->nx() + nw; }
};

class WitnessViolation : public std::domain_error {
 public:
  WitnessViolation(const VectorXd& point, double eigenvalue);
  const VectorXd& point() const { return point_; }
  double eigenvalue() const { return eigenvalue_; }

 private:
  VectorXd point_;
  double eigenvalue_;
};

/// Checks the witness at `n_samples` points (x, y from the base domain, w
/// from `w_box`) and returns the extended model.
AugmentedModel augment(std::shared_ptr<const SystemModel> base, std::vector<std::string> w_names,
                       AugmentedModel::WField fw, AugmentedModel::WJacobian fw_w, const MatrixXd& Mw, double lambda_w,
                       std::optional<std::pair<VectorXd, VectorXd>> chi_box = std::nullopt, double w_box = 1.0,
                       int n_samples = 200);

/// Polynomial augmentation; f_w over x, w, y and u names.
AugmentedModel augment(std::shared_ptr<const SystemModel> base, std::vector<std::string> w_names, PolyVector fw,
                       const MatrixXd& Mw, double lambda_w,
                       std::optional<std::pair<VectorXd, VectorXd>> chi_box = std::nullopt, double w_box = 1.0,
                       int n_samples = 200);

// Coordinate transformations xi = phi(x_e, y), x_e = col(x, w).

class Transformation {
 public:
  using Map = std::function<VectorXd(const VectorXd& xe, const VectorXd& y)>;
  using MapJacobian = std::function<MatrixXd(const VectorXd& xe, const VectorXd& y)>;
  using Offset = std::function<VectorXd(const VectorXd& y)>;
  using OffsetJacobian = std::function<MatrixXd(const VectorXd& y)>;

  Transformation() = default;

  /// phi = P x_e + varphi(y).
  static Transformation affine(const MatrixXd& P, Offset varphi, OffsetJacobian d_varphi);
  /// Affine form with polynomial varphi over y_names; with xe_names the
  /// symbolic form P x_e + varphi is kept as well.
  static Transformation affine(const MatrixXd& P, const PolyVector& varphi, const std::vector<std::string>& y_names,
                               const std::vector<std::string>& xe_names = {});
  /// General polynomial map over xe_names and y_names.
  static Transformation polynomial(const PolyVector& phi, const std::vector<std::string>& xe_names,
                                   const std::vector<std::string>& y_names);
  /// General callable map.
  static Transformation general(int nxe, int ny, int nxi, Map phi, MapJacobian d_xe, MapJacobian d_y);

  int nxe() const { return nxe_; }
  int nxi() const { return nxi_; }
  int ny() const { return ny_; }

  VectorXd operator()(const VectorXd& xe, const VectorXd& y) const { return map_(xe, y); }
  MatrixXd d_xe(const VectorXd& xe, const VectorXd& y) const { return d_xe_(xe, y); }
  MatrixXd d_y(const VectorXd& xe, const VectorXd& y) const { return d_y_(xe, y); }

  bool is_affine() const { return P_.has_value(); }
  const MatrixXd& P() const { return *P_; }
  VectorXd offset(const VectorXd& y) const { return varphi_(y); }

  /// Symbolic form when available (affine with polynomial offset included).
  const std::optional<PolyVector>& poly() const { return poly_; }
  const std::vector<std::string>& xe_names() const { return xe_names_; }
  const std::vector<std::string>& y_names() const { return y_names_; }

 private:
  int nxe_ = 0, nxi_ = 0, ny_ = 0;
  Map map_;
  MapJacobian d_xe_, d_y_;
  std::optional<MatrixXd> P_;
  Offset varphi_;
  std::optional<PolyVector> poly_;
  std::vector<std::string> xe_names_, y_names_;
};

/// Polynomial vector evaluated against an argument ordering.
class CompiledPolyVector {
 public:
  CompiledPolyVector() = default;
  CompiledPolyVector(const PolyVector& v, const std::vector<std::string>& args);
  VectorXd operator()(const VectorXd& args) const;
  /// Jacobian with respect to the arguments listed in `wrt` (indices).
  MatrixXd jacobian(const VectorXd& args, const std::vector<int>& wrt) const;
  int size() const { return static_cast<int>(f_.size()); }

 private:
  std::vector<CompiledPolynomial> f_;
  std::vector<std::vector<CompiledPolynomial>> df_;  // df_[i][j] = d f_i / d args_j
};

}  // namespace convobs
