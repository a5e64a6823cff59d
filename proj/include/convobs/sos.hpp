#pragma once

// Sum-of-squares programs compiled to block SDPs through Gram matrices.
//
// A polynomial p(x; theta), affine in the decision variables theta, is SOS when
// p = m(x)' G m(x) for some G >= 0. Matching coefficients gives linear
// equalities between the Gram entries and theta. A symmetric polynomial matrix
// S(x; theta) is certified positive semidefinite pointwise through the scalar
// polynomial v' S v with Gram basis m(x) (x) v.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convobs/decision.hpp"
#include "convobs/poly.hpp"
#include "convobs/sdp.hpp"

namespace convobs {

/// Raised when a subject polynomial has a fixed nonzero coefficient that no
/// product of basis monomials can produce.
class SosDegreeError : public std::invalid_argument {
 public:
  SosDegreeError(const std::string& label, const std::string& monomial)
      : std::invalid_argument("constraint '" + label + "': monomial " + monomial +
                              " lies outside the span of the Gram basis"),
        monomial_(monomial) {}
  const std::string& monomial() const { return monomial_; }

 private:
  std::string monomial_;
};

struct MonomialBasis {
  std::vector<std::string> vars;
  std::vector<Exponent> monomials;

  int size() const { return static_cast<int>(monomials.size()); }

  /// All monomials with total degree in [min_degree, max_degree].
  static MonomialBasis total_degree(const std::vector<std::string>& vars, int max_degree, int min_degree = 0);

  /// Smallest basis able to represent p as m'Gm: half-degree and per-variable
  /// bounds, then repeated removal of monomials whose Gram diagonal is forced
  /// to zero. `max_degree` >= 0 caps the total degree.
  static MonomialBasis for_support(const DecisionPolynomial& p, const std::vector<std::string>& vars,
                                   int max_degree = -1);

  Polynomial monomial(int i) const { return Polynomial::monomial(vars, monomials.at(i)); }
  std::string name(int i) const;
};

enum class SosKind { Scalar, Matrix };

struct SosConstraint {
  std::string label;
  SosKind kind = SosKind::Scalar;
  DecisionPolynomial subject;   // scalar kind
  DecisionPolyMatrix matrix;    // matrix kind, required >= 0
  std::vector<std::string> indeterminates;  // empty: every variable of the subject
  int degree = -1;              // Gram basis degree in the indeterminates; -1 = automatic
};

/// Result of compiling one SOS constraint into an SdpProblem.
struct SosFragment {
  std::string label;
  int block = -1;
  MonomialBasis basis;        // over indeterminates (and v for matrix kind)
  std::vector<int> rows;      // coefficient-matching constraint indices
  DecisionPolynomial subject; // the scalar polynomial actually matched
};

enum class SosStatus { Feasible, Marginal, Infeasible, Failed };

std::string to_string(SosStatus s);

struct GramCertificate {
  std::string label;
  MonomialBasis basis;
  Eigen::MatrixXd gram;
  Polynomial subject;  // with theta fixed

  /// m' G m as a polynomial.
  Polynomial reconstruct() const;
  double min_eigenvalue() const;
};

struct SosResult {
  SosStatus status = SosStatus::Failed;
  Eigen::VectorXd theta;
  std::vector<GramCertificate> certificates;
  SdpSolution sdp;
  double slack = 0.0;
  std::string message;

  bool accepted() const { return status == SosStatus::Feasible || status == SosStatus::Marginal; }
};

/// Compiles `p` SOS into `sdp`; theta_k becomes free variable theta_column[k].
/// The caller must have created enough free variables.
SosFragment compile_scalar(SdpProblem& sdp, const DecisionPolynomial& p, const MonomialBasis& basis,
                           const std::vector<int>& theta_column, const std::string& label = "sos");

enum class MatrixSense { PositiveSemidefinite, NegativeSemidefinite };

/// Compiles S >= 0 (or S <= 0) pointwise through v'Sv (or -v'Sv). S must be
/// symmetric.
SosFragment compile_matrix(SdpProblem& sdp, const DecisionPolyMatrix& S, const std::vector<std::string>& indeterminates,
                           int degree, const std::vector<int>& theta_column, const std::string& label = "psd",
                           MatrixSense sense = MatrixSense::PositiveSemidefinite);

/// Standalone forms: a fresh SdpProblem holding one Gram block.
struct CompiledSos {
  SdpProblem sdp;
  SosFragment fragment;
  std::vector<int> theta_column;
};
CompiledSos compile_scalar(const DecisionPolynomial& p, int degree = -1);
CompiledSos compile_matrix(const DecisionPolyMatrix& S, MatrixSense sense = MatrixSense::PositiveSemidefinite,
                           int degree = -1);

/// Feasibility of a standalone compiled instance.
SosResult solve(const CompiledSos& c, const SdpOptions& opts = {});

class SosProgram {
 public:
  int new_decision(const std::string& name = "");
  int num_decisions() const { return static_cast<int>(names_.size()); }
  const std::string& decision_name(int k) const { return names_.at(k); }

  /// sum_k theta_k m_k over all monomials of the given degree range.
  DecisionPolynomial new_polynomial(const std::vector<std::string>& vars, int max_degree, int min_degree = 0,
                                    const std::string& name = "c");
  /// Symmetric matrix of fresh constant decision variables.
  DecisionPolyMatrix new_symmetric_matrix(int n, const std::string& name = "P");

  /// Every coefficient of p vanishes.
  void add_equality(const DecisionPolynomial& p, const std::string& label = "eq");
  /// Linear equality on the decision variables.
  void add_linear(const AffineExpr& e, const std::string& label = "lin");
  void add_sos(const DecisionPolynomial& p, const std::string& label = "sos", int degree = -1,
               const std::vector<std::string>& indeterminates = {});
  /// S <= 0 pointwise.
  void add_nsd(const DecisionPolyMatrix& S, const std::string& label = "nsd", int degree = -1,
               const std::vector<std::string>& indeterminates = {}) {
    add_psd(-S, label, degree, indeterminates);
  }
  /// S >= 0 pointwise.
  void add_psd(const DecisionPolyMatrix& S, const std::string& label = "psd", int degree = -1,
               const std::vector<std::string>& indeterminates = {});

  const std::vector<SosConstraint>& constraints() const { return sos_; }

  struct Compiled {
    SdpProblem sdp{std::vector<int>{}};
    std::vector<SosFragment> fragments;
    std::vector<int> theta_column;  // -1 when the decision appears nowhere
  };
  Compiled compile() const;

  SosResult solve(const SdpOptions& opts = {}) const;

 private:
  std::vector<std::string> names_;
  std::vector<SosConstraint> sos_;
  std::vector<std::pair<std::string, DecisionPolynomial>> equalities_;
  std::vector<std::pair<std::string, AffineExpr>> linear_;
};

/// Marginal acceptance threshold for the slack of a Gram block.
inline double marginal_threshold(double scale) { return -1e-6 * (1.0 + scale); }

}  // namespace convobs
