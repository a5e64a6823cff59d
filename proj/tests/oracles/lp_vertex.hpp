#pragma once

// Brute-force linear programming by enumerating basic solutions of
// min c'x s.t. Ax = b, x >= 0. Only for tiny instances.

#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

struct LpResult {
  double objective;
  Eigen::VectorXd x;
};

inline std::optional<LpResult> lp_vertex_enumeration(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                                     const Eigen::VectorXd& c) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  std::optional<LpResult> best;
  std::vector<int> idx(m);
  // Iterate all m-subsets of columns.
  std::vector<bool> pick(n, false);
  std::fill(pick.end() - m, pick.end(), true);
  do {
    int k = 0;
    for (int j = 0; j < n; ++j)
      if (pick[j]) idx[k++] = j;
    Eigen::MatrixXd Ab(m, m);
    for (int r = 0; r < m; ++r) Ab.col(r) = A.col(idx[r]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Ab);
    if (lu.rank() < m) continue;
    Eigen::VectorXd xb = lu.solve(b);
    if (xb.minCoeff() < -1e-12) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int r = 0; r < m; ++r) x(idx[r]) = xb(r);
    double obj = c.dot(x);
    if (!best || obj < best->objective) best = LpResult{obj, x};
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

}  // namespace oracle
