#pragma once

#include <functional>
#include <vector>

namespace cvp {

struct LbfgsOptions {
  int max_iters = 1000;
  double grad_tol = 1e-6;  // L2 norm of the gradient
  int history = 10;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;      // objective at x
  double grad_norm = 0.0;  // L2 norm at x
  int iterations = 0;
  bool converged = false;
};

// Objective callback: returns f(x) and fills grad (same size as x).
using Objective = std::function<double(const std::vector<double>&, std::vector<double>&)>;

// Deterministic L-BFGS ascent with Armijo backtracking. The iteration path
// depends only on x0 and the objective, so repeated runs are bit-identical.
// Throws NonFinite when the objective is NaN/inf at x0 or line search cannot
// restore a finite value.
LbfgsResult lbfgs_maximize(const Objective& fn, std::vector<double> x0, const LbfgsOptions& opts = {});

}  // namespace cvp
