#pragma once

#include <functional>
#include <optional>

namespace relaycoll::roots {

struct Result {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
};

using ScalarFn = std::function<double(double)>;
/// Returns (f(x), f'(x)).
using ScalarFnWithDerivative = std::function<std::pair<double, double>(double)>;

/// Refines a sign-changing bracket [a, b] (fa * fb <= 0) with an Illinois
/// secant step, falling back to bisection whenever the secant step does not
/// at least halve the bracket. Stops once |f| <= ftol or the bracket has
/// collapsed to rounding level.
Result refine_bracket(const ScalarFn& f, double a, double b, double fa, double fb,
                      double ftol = 1e-12, int max_iter = 200);

/// Plain bisection to a bracket width of `xtol`.
Result bisect(const ScalarFn& f, double a, double b, double xtol = 1e-14,
              int max_iter = 200);

/// Newton iteration from x0 that must stay inside [lo, hi]. Returns nullopt
/// when it leaves the interval, hits a vanishing derivative or does not reach
/// |f| <= ftol within max_iter steps.
std::optional<Result> newton(const ScalarFnWithDerivative& f, double x0, double lo,
                             double hi, double ftol = 1e-12, int max_iter = 30);

/// Scans [lo, hi] outward from `center` in `n` steps per side and returns the
/// sign-changing sub-bracket closest to center, if any.
std::optional<std::pair<double, double>> bracket_near(const ScalarFn& f, double center,
                                                      double lo, double hi, int n = 64);

/// Newton with bracketed fallback: the standard scalar solve used by the
/// implicit-time computations. Returns nullopt when no root exists in [lo, hi].
std::optional<Result> solve(const ScalarFnWithDerivative& f, double x0, double lo,
                            double hi, double ftol = 1e-12, int max_newton = 30);

}  // namespace relaycoll::roots
