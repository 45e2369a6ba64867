#include "cvp/optim.hpp"

#include <cmath>
#include <deque>

#include "cvp/errors.hpp"

namespace cvp {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

bool finite(double v) { return std::isfinite(v); }

}  // namespace

LbfgsResult lbfgs_maximize(const Objective& fn, std::vector<double> x0, const LbfgsOptions& opts) {
  const size_t n = x0.size();
  std::vector<double> x = std::move(x0);
  std::vector<double> grad(n, 0.0);
  double value = fn(x, grad);
  if (!finite(value)) throw NonFinite("objective not finite at the starting point");

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> mem;

  LbfgsResult res;
  std::vector<double> dir(n), x_new(n), grad_new(n);

  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    const double gnorm = norm2(grad);
    if (gnorm <= opts.grad_tol) {
      res.converged = true;
      break;
    }

    // two-loop recursion on the negated gradient of the minimization problem,
    // i.e. direction approximating H * grad for ascent
    dir = grad;
    std::vector<double> alpha(mem.size());
    for (size_t i = mem.size(); i-- > 0;) {
      alpha[i] = mem[i].rho * dot(mem[i].s, dir);
      for (size_t k = 0; k < n; ++k) dir[k] -= alpha[i] * mem[i].y[k];
    }
    if (!mem.empty()) {
      const auto& last = mem.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (size_t k = 0; k < n; ++k) dir[k] *= gamma;
    }
    for (size_t i = 0; i < mem.size(); ++i) {
      const double beta = mem[i].rho * dot(mem[i].y, dir);
      for (size_t k = 0; k < n; ++k) dir[k] += (alpha[i] - beta) * mem[i].s[k];
    }

    double slope = dot(dir, grad);
    if (!(slope > 0.0)) {  // not an ascent direction; fall back to steepest
      dir = grad;
      slope = gnorm * gnorm;
    }

    // Armijo backtracking
    const double c1 = 1e-4;
    double step = 1.0;
    double value_new = -HUGE_VAL;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (size_t k = 0; k < n; ++k) x_new[k] = x[k] + step * dir[k];
      value_new = fn(x_new, grad_new);
      if (finite(value_new) && value_new >= value + c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!finite(value_new)) throw NonFinite("line search could not restore a finite objective");
      break;  // no further progress possible at this scale
    }

    Pair p;
    p.s.resize(n);
    p.y.resize(n);
    for (size_t k = 0; k < n; ++k) {
      p.s[k] = x_new[k] - x[k];
      p.y[k] = grad[k] - grad_new[k];  // minimization curvature pair
    }
    const double sy = dot(p.s, p.y);
    if (sy > 1e-12) {
      p.rho = 1.0 / sy;
      mem.push_back(std::move(p));
      if (static_cast<int>(mem.size()) > opts.history) mem.pop_front();
    }

    x.swap(x_new);
    grad.swap(grad_new);
    value = value_new;
  }

  res.x = std::move(x);
  res.value = value;
  res.grad_norm = norm2(grad);
  res.iterations = iter;
  if (res.grad_norm <= opts.grad_tol) res.converged = true;
  return res;
}

}  // namespace cvp
