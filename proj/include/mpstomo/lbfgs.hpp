#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mpstomo {

struct LbfgsOptions {
  std::size_t memory = 10;
  std::size_t max_iterations = 500;
  double gradient_tolerance = 1e-7;   // on the infinity norm of the gradient
  double relative_tolerance = 1e-12;  // on |f_k - f_{k+1}| / max(1, |f_k|)
  double armijo = 1e-4;
  std::size_t max_backtracks = 40;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::string reason;
};

// Objective: returns f(x) and writes the gradient.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;
// Called after every accepted step with (iteration, x, f); return false to stop.
using IterationCallback = std::function<bool(std::size_t, const Eigen::VectorXd&, double)>;

// Limited-memory BFGS with the two-loop recursion and a backtracking Armijo
// line search, so every accepted step strictly lowers f. Curvature pairs
// with s.y <= 0 are skipped.
inline LbfgsResult lbfgs_minimize(const Objective& f, Eigen::VectorXd x, const LbfgsOptions& opt = {},
                                  const IterationCallback& callback = {}) {
  LbfgsResult res;
  Eigen::VectorXd g(x.size());
  double fx = f(x, g);
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    if (!std::isfinite(fx)) {
      res.reason = "non-finite objective";
      break;
    }
    if (g.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) {
      res.converged = true;
      res.reason = "gradient tolerance";
      break;
    }

    // Two-loop recursion for d = -H g.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t j = s_hist.size(); j-- > 0;) {
      alpha[j] = rho_hist[j] * s_hist[j].dot(q);
      q -= alpha[j] * y_hist[j];
    }
    if (!s_hist.empty()) {
      q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      q /= std::max(1.0, g.norm());
    }
    for (std::size_t j = 0; j < s_hist.size(); ++j) {
      const double beta = rho_hist[j] * y_hist[j].dot(q);
      q += (alpha[j] - beta) * s_hist[j];
    }
    Eigen::VectorXd d = -q;
    double slope = g.dot(d);
    if (!(slope < 0)) {
      // Lost descent: fall back to steepest descent and forget the history.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g / std::max(1.0, g.norm());
      slope = g.dot(d);
    }

    double step = 1.0;
    Eigen::VectorXd x_new, g_new(x.size());
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (std::size_t bt = 0; bt < opt.max_backtracks; ++bt) {
      x_new = x + step * d;
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + opt.armijo * step * slope && f_new < fx) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.converged = g.lpNorm<Eigen::Infinity>() < 10 * opt.gradient_tolerance;
      res.reason = "line search failed";
      break;
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const double change = std::abs(fx - f_new) / std::max(1.0, std::abs(fx));
    x = std::move(x_new);
    g = g_new;
    fx = f_new;
    res.iterations = it + 1;
    if (callback && !callback(res.iterations, x, fx)) {
      res.reason = "stopped by callback";
      break;
    }
    if (change < opt.relative_tolerance) {
      res.converged = true;
      res.reason = "relative tolerance";
      break;
    }
  }
  if (res.reason.empty()) res.reason = "iteration cap";
  res.x = std::move(x);
  res.value = fx;
  return res;
}

}  // namespace mpstomo
