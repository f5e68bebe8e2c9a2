#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace qclab {

struct LbfgsOptions {
  int max_iterations = 500;
  int history = 8;
  double gradient_tolerance = 1e-10;
  /// Stop when the relative decrease of f over one iteration drops below this.
  double relative_decrease_tolerance = 1e-14;
  double armijo = 1e-4;
  int max_backtracks = 40;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Limited-memory BFGS with backtracking Armijo line search.
/// `fun(x, grad)` returns f(x) and writes the gradient into grad.
template <class Fun>
LbfgsResult minimize_lbfgs(Fun&& fun, Eigen::VectorXd x, const LbfgsOptions& opt = {}) {
  using Eigen::VectorXd;
  const Eigen::Index n = x.size();
  VectorXd g(n);
  double f = fun(x, g);
  std::deque<VectorXd> s_hist;
  std::deque<VectorXd> y_hist;
  std::deque<double> rho_hist;

  LbfgsResult res;
  VectorXd g_new(n);
  VectorXd x_new(n);
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    if (g.lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    // Two-loop recursion.
    VectorXd q = g;
    const std::size_t m = s_hist.size();
    std::vector<double> alpha(m);
    for (std::size_t i = m; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (m > 0) {
      q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      q /= std::max(1.0, g.norm());
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += s_hist[i] * (alpha[i] - beta);
    }
    VectorXd dir = -q;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      dir = -g;
      slope = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      x_new = x + step * dir;
      f_new = fun(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + opt.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    VectorXd s = x_new - x;
    VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double decrease = f - f_new;
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    if (sy > 1e-16 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (decrease <= opt.relative_decrease_tolerance * std::max(1.0, std::abs(f))) {
      res.converged = true;
      break;
    }
  }
  res.x = std::move(x);
  res.value = f;
  return res;
}

}  // namespace qclab
