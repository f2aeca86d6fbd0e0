#include "relaycoll/roots.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace relaycoll::roots {

Result refine_bracket(const ScalarFn& f, double a, double b, double fa, double fb,
                      double ftol, int max_iter) {
  if (fa == 0.0) return {a, fa, 0};
  if (fb == 0.0) return {b, fb, 0};
  int side = 0;
  Result best = std::abs(fa) < std::abs(fb) ? Result{a, fa, 0} : Result{b, fb, 0};
  for (int it = 1; it <= max_iter; ++it) {
    const double width = std::abs(b - a);
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    if (width <= 4.0 * std::numeric_limits<double>::epsilon() * scale) {
      best.iterations = it;
      return best;
    }
    double x = (a * fb - b * fa) / (fb - fa);
    // keep the secant point strictly inside and useful
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (!(x > lo && x < hi)) x = 0.5 * (a + b);
    double fx = f(x);
    if (std::abs(fx) < std::abs(best.fx)) best = {x, fx, it};
    if (std::abs(fx) <= ftol) return {x, fx, it};
    if ((fx > 0) == (fb > 0)) {
      b = x;
      fb = fx;
      if (side == -1) fa *= 0.5;
      side = -1;
    } else {
      a = x;
      fa = fx;
      if (side == +1) fb *= 0.5;
      side = +1;
    }
    // bisection safeguard when the bracket shrinks slowly
    if (std::abs(b - a) > 0.5 * width) {
      const double m = 0.5 * (a + b);
      const double fm = f(m);
      if (std::abs(fm) < std::abs(best.fx)) best = {m, fm, it};
      if (std::abs(fm) <= ftol) return {m, fm, it};
      if ((fm > 0) == (fb > 0)) {
        b = m;
        fb = fm;
      } else {
        a = m;
        fa = fm;
      }
      side = 0;
    }
  }
  best.iterations = max_iter;
  return best;
}

Result bisect(const ScalarFn& f, double a, double b, double xtol, int max_iter) {
  double fa = f(a);
  double fb = f(b);
  int it = 0;
  for (; it < max_iter && std::abs(b - a) > xtol; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0) return {m, fm, it + 1};
    if ((fm > 0) == (fa > 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
      fb = fm;
    }
  }
  return std::abs(fa) < std::abs(fb) ? Result{a, fa, it} : Result{b, fb, it};
}

std::optional<Result> newton(const ScalarFnWithDerivative& f, double x0, double lo,
                             double hi, double ftol, int max_iter) {
  double x = x0;
  for (int it = 0; it <= max_iter; ++it) {
    const auto [fx, dfx] = f(x);
    if (!std::isfinite(fx)) return std::nullopt;
    if (std::abs(fx) <= ftol) return Result{x, fx, it};
    if (dfx == 0.0 || !std::isfinite(dfx)) return std::nullopt;
    x -= fx / dfx;
    if (x < lo || x > hi) return std::nullopt;
  }
  return std::nullopt;
}

std::optional<std::pair<double, double>> bracket_near(const ScalarFn& f, double center,
                                                      double lo, double hi, int n) {
  const double fc = f(center);
  if (fc == 0.0) return std::make_pair(center, center);
  double l_prev = center, r_prev = center;
  double fl_prev = fc, fr_prev = fc;
  for (int k = 1; k <= n; ++k) {
    const double r = center + (hi - center) * k / n;
    const double fr = f(r);
    if ((fr > 0) != (fr_prev > 0) || fr == 0.0) return std::make_pair(r_prev, r);
    r_prev = r;
    fr_prev = fr;
    const double l = center - (center - lo) * k / n;
    const double fl = f(l);
    if ((fl > 0) != (fl_prev > 0) || fl == 0.0) return std::make_pair(l, l_prev);
    l_prev = l;
    fl_prev = fl;
  }
  return std::nullopt;
}

std::optional<Result> solve(const ScalarFnWithDerivative& f, double x0, double lo,
                            double hi, double ftol, int max_newton) {
  if (auto r = newton(f, x0, lo, hi, ftol, max_newton)) return r;
  auto value = [&](double x) { return f(x).first; };
  auto br = bracket_near(value, x0, lo, hi);
  if (!br) return std::nullopt;
  auto [a, b] = *br;
  if (a == b) return Result{a, 0.0, 0};
  Result r = refine_bracket(value, a, b, value(a), value(b), ftol);
  // polish with Newton from the bracketed estimate
  if (auto polished = newton(f, r.x, a, b, ftol, 5)) return polished;
  return r;
}

}  // namespace relaycoll::roots
