#pragma once

// Random problem generators with known answers, shared by the solver tests
// and the acceptance run.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convobs/linalg.hpp"
#include "convobs/sdp.hpp"
#include "convobs/sos.hpp"

namespace oracle {

using namespace convobs;

inline Eigen::MatrixXd random_sym(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  return sym(a);
}

inline Eigen::MatrixXd random_pd(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

// Feasible and dual-feasible random instance: b = A(X0), C = A*(y0) + S0.
inline SdpProblem random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nblocks(1, 3), dim(1, 6), ncons(1, 20);
  std::normal_distribution<double> g;
  std::vector<int> dims;
  int nb = nblocks(rng);
  for (int j = 0; j < nb; ++j) dims.push_back(dim(rng));
  SdpProblem p(dims);
  int total = 0;
  for (int d : dims) total += d * (d + 1) / 2;
  int m = std::min(ncons(rng), total);
  std::vector<Eigen::MatrixXd> X0, S0;
  for (int d : dims) {
    X0.push_back(random_pd(rng, d));
    S0.push_back(random_pd(rng, d));
  }
  Eigen::VectorXd y0(m);
  for (int i = 0; i < m; ++i) y0(i) = g(rng);
  std::vector<Eigen::MatrixXd> C = S0;
  for (int i = 0; i < m; ++i) {
    double rhs = 0.0;
    int row = p.add_constraint(0.0);
    for (int j = 0; j < nb; ++j) {
      Eigen::MatrixXd a = random_sym(rng, dims[j]);
      p.set_constraint(row, j, a);
      rhs += inner(a, X0[j]);
      C[j] += y0(i) * a;
    }
    p.set_rhs(row, rhs);
  }
  for (int j = 0; j < nb; ++j) p.set_objective(j, C[j]);
  return p;
}

// Random polynomial sum of squares with a known Gram matrix.
inline Polynomial random_sos(std::mt19937& rng, const std::vector<std::string>& vars, int half_degree) {
  auto mons = monomials_up_to(static_cast<int>(vars.size()), half_degree, 0);
  const int n = static_cast<int>(mons.size());
  std::normal_distribution<double> g;
  Eigen::MatrixXd L(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) L(i, j) = g(rng);
  Eigen::MatrixXd G = L * L.transpose() / n;
  Polynomial p;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Exponent e(vars.size());
      for (std::size_t i = 0; i < vars.size(); ++i) e[i] = mons[a][i] + mons[b][i];
      p += Polynomial::monomial(vars, e, G(a, b));
    }
  return p;
}

}  // namespace oracle
