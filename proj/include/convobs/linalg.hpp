#pragma once

#include <Eigen/Dense>

namespace convobs {

template <typename Derived>
Eigen::MatrixXd sym(const Eigen::MatrixBase<Derived>& a) {
  return 0.5 * (a + a.transpose());
}

inline double min_eigenvalue(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline double max_eigenvalue(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(a.rows() - 1);
}

inline bool is_symmetric(const Eigen::MatrixXd& a, double tol = 0.0) {
  if (a.rows() != a.cols()) return false;
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * (1.0 + a.cwiseAbs().maxCoeff());
}

/// Frobenius inner product.
inline double inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return a.cwiseProduct(b).sum(); }

}  // namespace convobs
