#pragma once

#include "catnet/common.hpp"

namespace catnet {

struct NewtonOptions {
  int max_iterations = 50;
  double tolerance = 1e-9;     // on ||gradient||_inf
  double max_condition = 1e12; // singular-Jacobian bailout
};

struct NewtonResult {
  Vector x;
  bool converged = false;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
};

/// Newton iteration for grad(x) = 0 with a symmetric Jacobian hess(x).
///
/// Once the residual drops below tolerance the iteration keeps polishing
/// while it still makes progress, so that a multiple root is approached as
/// closely as the iteration budget allows. The returned point is the best
/// converged iterate.
template <class GradFn, class HessFn>
NewtonResult newton_solve(GradFn &&grad, HessFn &&hess, Vector x,
                          const NewtonOptions &opts = {}) {
  NewtonResult out;
  out.x = x;
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iterations; ++it) {
    out.iterations = it + 1;
    const Vector g = grad(x);
    const double r = inf_norm(g);
    if (!std::isfinite(r))
      break;
    if (r < opts.tolerance) {
      if (!out.converged || r < out.residual) {
        out.x = x;
        out.residual = r;
      }
      const bool stalled = out.converged && r > 0.5 * previous;
      out.converged = true;
      if (r == 0.0 || stalled)
        break;
    }
    previous = r;

    const Matrix h = hess(x);
    const Vector ev = symmetric_eigenvalues(h).cwiseAbs();
    const double lo = ev.minCoeff(), hi = ev.maxCoeff();
    if (!(lo > 0.0) || hi / lo > opts.max_condition)
      break;
    const Vector step = h.partialPivLu().solve(-g);
    if (!step.allFinite())
      break;
    if (out.converged && inf_norm(step) <= 1e-15 * (1.0 + inf_norm(x)))
      break;
    x += step;
  }
  if (!out.converged) {
    out.x = x;
    const Vector g = grad(x);
    out.residual = inf_norm(g);
  }
  return out;
}

} // namespace catnet
