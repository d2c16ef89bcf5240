#include "sfps/bfgs.hpp"

#include <cmath>

#include "sfps/errors.hpp"

namespace sfps {

BfgsResult minimize_bfgs(const DomainObjective& objective, Vector x0, Matrix inverse_hessian,
                         const BfgsOptions& options) {
  BfgsResult res;
  res.x = std::move(x0);
  if (!objective(res.x, res.value, res.gradient)) {
    throw InfeasibleError("BFGS: starting point outside the objective's domain");
  }
  Matrix& hinv = inverse_hessian;
  const Index d = res.x.size();

  for (;;) {
    if (res.gradient.norm() <= options.gradient_tolerance) {
      res.status = BfgsStatus::kConverged;
      return res;
    }
    if (res.value < options.lower_bound) {
      res.status = BfgsStatus::kUnbounded;
      return res;
    }
    if (res.iterations >= options.max_iterations) {
      res.status = BfgsStatus::kMaxIterations;
      return res;
    }
    ++res.iterations;

    Vector dir = -(hinv * res.gradient);
    double slope = res.gradient.dot(dir);
    if (!(slope < 0.0)) {
      hinv.setIdentity(d, d);
      dir = -res.gradient;
      slope = -res.gradient.squaredNorm();
    }

    double t = 1.0;
    bool accepted = false;
    Vector xn, gn;
    double fn = 0.0;
    bool fallback_ok = false;
    Vector fb_x, fb_g;
    double fb_f = 0.0;
    for (int h = 0; h < options.max_halvings; ++h, t *= 0.5) {
      xn = res.x + t * dir;
      if (!objective(xn, fn, gn)) continue;
      if (fn - res.value <= options.armijo * t * slope) {
        accepted = true;
        break;
      }
      // Near the optimum the Armijo decrease drowns in rounding; keep the
      // first reasonably long feasible trial that does not increase the
      // objective beyond it and reduces the gradient.
      if (!fallback_ok && t >= 1e-3 && fn <= res.value + 1e-13 * std::abs(res.value) &&
          gn.norm() < res.gradient.norm()) {
        fallback_ok = true;
        fb_x = xn;
        fb_g = gn;
        fb_f = fn;
      }
    }
    if (!accepted) {
      if (!fallback_ok) {
        res.status = BfgsStatus::kLineSearchFailed;
        return res;
      }
      xn = std::move(fb_x);
      gn = std::move(fb_g);
      fn = fb_f;
    }

    const Vector s = xn - res.x;
    const Vector y = gn - res.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      const double r = 1.0 / sy;
      const Vector hy = hinv * y;
      hinv += (r * r * (sy + y.dot(hy))) * (s * s.transpose()) -
              r * (hy * s.transpose() + s * hy.transpose());
    }
    res.x = std::move(xn);
    res.gradient = std::move(gn);
    res.value = fn;
  }
}

}  // namespace sfps
