#pragma once

// Dense semidefinite programs in block form
//
//   minimize    sum_j <C_j, X_j> + c' f
//   subject to  sum_j <A_ij, X_j> + sum_k B_ik f_k = b_i,   X_j >= 0,  f free
//
// solved by an infeasible-start primal-dual interior point method with
// Nesterov-Todd scaling and a Mehrotra corrector.

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

namespace convobs {

enum class SdpStatus { Feasible, Infeasible, MaxIter };

std::string to_string(SdpStatus s);

struct SdpOptions {
  int max_iterations = 120;
  double tolerance = 1e-10;     // relative residual / gap target
  double acceptable_tolerance = 1e-7;  // accepted when progress stalls
  double step_fraction = 0.98;  // fraction of the distance to the cone boundary
  double feasible_slack = -1e-9;
  double infeasible_margin = 1e-6;
  double certificate_tolerance = 1e-8;
  bool verbose = false;
};

class SdpProblem {
 public:
  explicit SdpProblem(std::vector<int> block_dims, int num_free = 0);

  int num_blocks() const { return static_cast<int>(block_dims_.size()); }
  int block_dim(int j) const { return block_dims_.at(j); }
  const std::vector<int>& block_dims() const { return block_dims_; }
  int num_free() const { return num_free_; }
  int num_constraints() const { return static_cast<int>(rhs_.size()); }

  int add_block(int dim);
  int add_free();

  /// Appends an empty constraint row and returns its index.
  int add_constraint(double rhs);
  void set_rhs(int con, double rhs) { rhs_.at(con) = rhs; }
  double rhs(int con) const { return rhs_.at(con); }

  /// Adds v at (i,j) and (j,i) of block `block` in constraint `con`.
  void add_entry(int con, int block, int i, int j, double v);
  /// Replaces the block coefficient with a dense symmetric matrix.
  void set_constraint(int con, int block, const Eigen::MatrixXd& a);
  void add_free_coefficient(int con, int free, double v);

  void set_objective(int block, const Eigen::MatrixXd& c);
  void add_objective_entry(int block, int i, int j, double v);
  void set_free_objective(int free, double c);

  bool has_objective() const;

  /// Coefficient matrix of one constraint on one block (dense, symmetric).
  Eigen::MatrixXd constraint_matrix(int con, int block) const;
  const std::vector<std::map<std::tuple<int, int, int>, double>>& entries() const { return entries_; }
  const std::vector<std::map<int, double>>& free_entries() const { return free_entries_; }
  const std::vector<Eigen::MatrixXd>& objective() const { return objective_; }
  const Eigen::VectorXd& free_objective() const { return free_objective_; }

  /// Evaluates the constraint rows at a candidate point.
  Eigen::VectorXd apply(const std::vector<Eigen::MatrixXd>& x, const Eigen::VectorXd& f) const;

  /// Plain-text dump for debugging.
  void dump(std::ostream& os) const;

 private:
  std::vector<int> block_dims_;
  int num_free_ = 0;
  std::vector<double> rhs_;
  // Per constraint: (block, i, j) with i <= j -> value.
  std::vector<std::map<std::tuple<int, int, int>, double>> entries_;
  std::vector<std::map<int, double>> free_entries_;
  std::vector<Eigen::MatrixXd> objective_;
  Eigen::VectorXd free_objective_;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::MaxIter;
  std::vector<Eigen::MatrixXd> blocks;   // primal X_j
  Eigen::VectorXd free;                  // primal f
  Eigen::VectorXd dual;                  // y
  std::vector<Eigen::MatrixXd> dual_slack;  // S_j
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;  // inf-norm of b - A(X) - Bf
  double dual_residual = 0.0;    // inf-norm of C - A*(y) - S and c - B'y
  double gap = 0.0;              // <X, S>
  double slack = 0.0;            // t of the feasibility formulation
  int iterations = 0;
  bool converged = false;  // interior point method met its tolerances
  std::string message;

  // Farkas ray: -A*(y) >= 0, B'y = 0, b'y > 0 certifies infeasibility.
  Eigen::VectorXd certificate;
  double certificate_value = 0.0;     // b'y / max(1, |y|_inf)
  double certificate_residual = 0.0;  // violation of -A*(y) >= 0, B'y = 0
};

/// Solves the problem. Problems without objective are treated as feasibility
/// problems and solved through the slack formulation X = X' + tI, max t.
SdpSolution solve(const SdpProblem& p, const SdpOptions& opts = {});

/// Minimizes the objective directly (no feasibility classification).
SdpSolution solve_optimization(const SdpProblem& p, const SdpOptions& opts = {});

/// Maximizes t subject to the constraints with every block shifted by tI.
SdpSolution solve_feasibility(const SdpProblem& p, const SdpOptions& opts = {});

void dump(std::ostream& os, const SdpSolution& s);

}  // namespace convobs
