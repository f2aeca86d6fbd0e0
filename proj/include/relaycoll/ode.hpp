#pragma once

#include <functional>
#include <vector>

#include "relaycoll/types.hpp"

namespace relaycoll {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-10;
  double h_init = 0.0;  // 0 selects an initial step automatically
  double h_min = 1e-13;
  long max_steps = 2'000'000;
};

/// Right-hand side dy/dt = rhs(t, y).
using OdeRhs = std::function<Vec(double, const Vec&)>;

struct OdeStep {
  double t;
  Vec y;
};

/// Adaptive Dormand-Prince 5(4) integration from t0 to t1 (either direction).
/// Accepted steps are appended to `steps` when it is non-null, including the
/// initial point. Throws IntegrationFailure on step-size underflow.
Vec integrate_dopri5(const OdeRhs& rhs, double t0, const Vec& y0, double t1,
                     const OdeOptions& opts = {}, std::vector<OdeStep>* steps = nullptr);

}  // namespace relaycoll
