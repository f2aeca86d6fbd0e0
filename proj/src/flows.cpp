#include "relaycoll/flows.hpp"

#include <cmath>

namespace relaycoll {

Mat FlowBackend::field_jacobian(const Vec& y, int u) const {
  const int n = dim();
  Mat J(n, n);
  for (int j = 0; j < n; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(y[j]));
    Vec yp = y, ym = y;
    yp[j] += h;
    ym[j] -= h;
    J.col(j) = (field(yp, u) - field(ym, u)) / (2.0 * h);
  }
  return J;
}

Mat2 flow_matrix(double zeta, double t) {
  const double e = std::exp(-zeta * t);
  const double c = std::cos(t), s = std::sin(t);
  Mat2 m;
  m << -zeta, -1.0, 1.0 + zeta * zeta, zeta;
  return e * c * Mat2::Identity() - e * s * m;
}

Vec2 flow_offset(double zeta, double t) {
  const double e = std::exp(-zeta * t);
  const double c = std::cos(t), s = std::sin(t);
  // e^{-zeta t} e^{zeta t} is written as 1 to avoid cancellation
  return Vec2(-zeta * s * e - c * e + 1.0, e * (1.0 + zeta * zeta) * s);
}

Mat2 AffineOscillatorFlow::matrix(double t) const { return flow_matrix(zeta_, t); }
Vec2 AffineOscillatorFlow::offset(double t) const { return flow_offset(zeta_, t); }

Mat2 AffineOscillatorFlow::generator() const {
  Mat2 g;
  g << 0.0, 1.0, -(1.0 + zeta_ * zeta_), -2.0 * zeta_;
  return g;
}

Vec2 AffineOscillatorFlow::field2(const Vec2& y, int u) const {
  const double w = 1.0 + zeta_ * zeta_;
  return Vec2(y[1], -2.0 * zeta_ * y[1] - w * y[0] + w * double(u));
}

Vec AffineOscillatorFlow::field(const Vec& y, int u) const { return field2(y.head<2>(), u); }

Vec AffineOscillatorFlow::apply(const Vec& y, int u, double t) const {
  return apply2(y.head<2>(), u, t);
}

Mat AffineOscillatorFlow::state_jacobian(const Vec&, int, double t) const { return matrix(t); }

Mat AffineOscillatorFlow::field_jacobian(const Vec&, int) const { return generator(); }

NumericFlow::NumericFlow(int dim, Field f, std::optional<FieldJacobian> jac, OdeOptions opts)
    : dim_(dim), f_(std::move(f)), jac_(std::move(jac)), opts_(opts) {
  if (dim_ <= 0) throw InvalidArgument("flow dimension must be positive");
}

Vec NumericFlow::apply(const Vec& y, int u, double t) const {
  if (t == 0.0) return y;
  return integrate_dopri5([&](double, const Vec& z) { return f_(z, u); }, 0.0, y, t, opts_);
}

Mat NumericFlow::field_jacobian(const Vec& y, int u) const {
  if (jac_) return (*jac_)(y, u);
  return FlowBackend::field_jacobian(y, u);
}

Mat NumericFlow::state_jacobian(const Vec& y, int u, double t) const {
  const int n = dim_;
  Vec z(n + n * n);
  z.head(n) = y;
  Eigen::Map<Mat>(z.data() + n, n, n) = Mat::Identity(n, n);
  auto rhs = [&](double, const Vec& w) {
    Vec d(w.size());
    const Vec x = w.head(n);
    d.head(n) = f_(x, u);
    const Mat J = field_jacobian(x, u);
    Eigen::Map<Mat>(d.data() + n, n, n) = J * Eigen::Map<const Mat>(w.data() + n, n, n);
    return d;
  };
  const Vec out = integrate_dopri5(rhs, 0.0, z, t, opts_);
  return Eigen::Map<const Mat>(out.data() + n, n, n);
}

}  // namespace relaycoll
