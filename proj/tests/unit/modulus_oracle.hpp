#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "qclab/graph.hpp"

namespace oracle {

/// Coefficient rows a_gamma with integral = a_gamma . rho for every simple E-F path.
inline std::vector<Eigen::VectorXd> path_rows(const qclab::WeightedGraph& g, const std::vector<qclab::NodeId>& E,
                                              const std::vector<qclab::NodeId>& F) {
  const int n = g.num_nodes();
  std::vector<char> is_f(n, 0);
  for (auto v : F) is_f[v] = 1;
  std::vector<Eigen::VectorXd> rows;
  std::vector<char> on(n, 0);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  std::function<void(qclab::NodeId)> walk = [&](qclab::NodeId u) {
    if (is_f[u]) {
      rows.push_back(acc);
      return;
    }
    g.for_each_neighbor(u, [&](qclab::NodeId v, double len) {
      if (on[v]) return;
      on[v] = 1;
      acc[u] += 0.5 * len;
      acc[v] += 0.5 * len;
      walk(v);
      acc[u] -= 0.5 * len;
      acc[v] -= 0.5 * len;
      on[v] = 0;
    });
  };
  for (auto e : E) {
    on[e] = 1;
    walk(e);
    on[e] = 0;
  }
  return rows;
}

/// min sum mu_i rho_i^Q subject to a . rho >= 1 for every row and rho >= 0, by a
/// log-barrier Newton method on the full path list.
inline double modulus(const std::vector<Eigen::VectorXd>& rows, const std::vector<double>& mu, double Q) {
  const int n = static_cast<int>(mu.size());
  double min_row = INFINITY;
  for (const auto& a : rows) min_row = std::min(min_row, a.sum());
  Eigen::VectorXd rho = Eigen::VectorXd::Constant(n, 2.0 / min_row);
  auto feasible = [&](const Eigen::VectorXd& r) {
    if ((r.array() <= 0.0).any()) return false;
    for (const auto& a : rows)
      if (a.dot(r) <= 1.0) return false;
    return true;
  };
  auto objective = [&](const Eigen::VectorXd& r, double t) {
    double f = 0.0;
    for (int i = 0; i < n; ++i) f += t * mu[i] * std::pow(r[i], Q) - std::log(r[i]);
    for (const auto& a : rows) f -= std::log(a.dot(r) - 1.0);
    return f;
  };
  const double m = static_cast<double>(rows.size() + n);
  for (double t = 1.0; m / t > 1e-8; t *= 8.0) {
    for (int it = 0; it < 200; ++it) {
      Eigen::VectorXd grad(n);
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        grad[i] = t * Q * mu[i] * std::pow(rho[i], Q - 1.0) - 1.0 / rho[i];
        hess(i, i) = t * Q * (Q - 1.0) * mu[i] * std::pow(rho[i], Q - 2.0) + 1.0 / (rho[i] * rho[i]);
      }
      for (const auto& a : rows) {
        const double s = a.dot(rho) - 1.0;
        grad -= a / s;
        hess += a * a.transpose() / (s * s);
      }
      const Eigen::VectorXd step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      if (decrement < 1e-12) break;
      double alpha = 1.0;
      const double f0 = objective(rho, t);
      while (alpha > 1e-16 &&
             (!feasible(rho + alpha * step) || objective(rho + alpha * step, t) > f0 - 0.25 * alpha * decrement))
        alpha *= 0.5;
      if (alpha <= 1e-16) break;
      rho += alpha * step;
    }
  }
  double e = 0.0;
  for (int i = 0; i < n; ++i) e += mu[i] * std::pow(rho[i], Q);
  return e;
}

}  // namespace oracle
