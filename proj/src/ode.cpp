#include "relaycoll/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace relaycoll {

namespace {

// Dormand-Prince coefficients
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

double error_norm(const Vec& err, const Vec& y0, const Vec& y1, const OdeOptions& o) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = o.atol + o.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    acc += (err[i] / sc) * (err[i] / sc);
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

}  // namespace

Vec integrate_dopri5(const OdeRhs& rhs, double t0, const Vec& y0, double t1,
                     const OdeOptions& opts, std::vector<OdeStep>* steps) {
  Vec y = y0;
  if (steps) steps->push_back({t0, y});
  if (t1 == t0) return y;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);

  Vec k1 = rhs(t0, y);
  double h = opts.h_init;
  if (h <= 0.0) {
    const double d0 = y.norm() / std::sqrt(double(y.size()));
    const double d1 = k1.norm() / std::sqrt(double(y.size()));
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, span);
  }

  double t = t0;
  long n = 0;
  while (dir * (t1 - t) > 0.0) {
    if (++n > opts.max_steps) {
      throw IntegrationFailure("maximum number of integration steps exceeded");
    }
    const bool last = h >= std::abs(t1 - t);
    const double hs = last ? (t1 - t) : dir * h;

    const Vec k2 = rhs(t + c2 * hs, y + hs * (a21 * k1));
    const Vec k3 = rhs(t + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
    const Vec k4 = rhs(t + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec k5 = rhs(t + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec k6 =
        rhs(t + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vec y_new = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vec k7 = rhs(t + hs, y_new);
    const Vec err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = error_norm(err, y, y_new, opts);

    if (en <= 1.0) {
      t = last ? t1 : t + hs;
      y = y_new;
      k1 = k7;
      if (steps) steps->push_back({t, y});
      const double fac = en == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(en, -0.2));
      h = std::abs(hs) * std::max(0.2, fac);
    } else {
      const double fac = std::isfinite(en) ? std::max(0.1, 0.9 * std::pow(en, -0.2)) : 0.1;
      h = std::abs(hs) * fac;
      if (h < opts.h_min) {
        std::ostringstream msg;
        msg << "step size underflow at t=" << t;
        throw IntegrationFailure(msg.str());
      }
    }
  }
  return y;
}

}  // namespace relaycoll
