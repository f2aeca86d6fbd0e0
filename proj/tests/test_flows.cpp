#include <doctest.h>

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <random>

#include "relaycoll/flows.hpp"

using namespace relaycoll;

namespace {

constexpr double kZeta = -0.1;

// scaling-and-squaring with a Taylor core
Mat2 expm(const Mat2& M) {
  int s = std::max(0, static_cast<int>(std::ceil(std::log2(M.lpNorm<Eigen::Infinity>() + 1.0))) + 4);
  const Mat2 X = M / std::ldexp(1.0, s);
  Mat2 term = Mat2::Identity(), E = Mat2::Identity();
  for (int k = 1; k < 25; ++k) {
    term = term * X / double(k);
    E += term;
  }
  for (int i = 0; i < s; ++i) E = E * E;
  return E;
}

// independent adaptive RK oracle
Vec2 odeint_flow(const Vec2& y0, int u, double t) {
  using State = std::array<double, 2>;
  using namespace boost::numeric::odeint;
  const double w = 1.0 + kZeta * kZeta;
  State y{y0[0], y0[1]};
  auto rhs = [&](const State& x, State& dx, double) {
    dx[0] = x[1];
    dx[1] = -2.0 * kZeta * x[1] - w * x[0] + w * u;
  };
  if (t != 0.0) {
    integrate_adaptive(make_controlled(1e-13, 1e-13, runge_kutta_dopri5<State>()), rhs, y, 0.0,
                       t, t > 0 ? 1e-3 : -1e-3);
  }
  return Vec2(y[0], y[1]);
}

}  // namespace

TEST_CASE("flow matrix at t = 0 and t = pi") {
  CHECK((flow_matrix(kZeta, 0.0) - Mat2::Identity()).norm() < 1e-15);
  const Mat2 Api = flow_matrix(kZeta, M_PI);
  CHECK((Api + std::exp(0.1 * M_PI) * Mat2::Identity()).norm() < 1e-14);
}

TEST_CASE("flow matrix equals the matrix exponential of the generator") {
  AffineOscillatorFlow flow(kZeta);
  for (double t : {1.0, -0.7, 2.5, 4.2}) {
    CHECK((flow_matrix(kZeta, t) - expm(flow.generator() * t)).norm() < 1e-10);
  }
}

TEST_CASE("offset vector identities") {
  CHECK(flow_offset(kZeta, 0.0).norm() < 1e-15);
  for (double t = -6.0; t <= 6.0; t += 0.37) {
    const Vec2 e1(1.0, 0.0);
    CHECK((flow_matrix(kZeta, t) * e1 + flow_offset(kZeta, t) - e1).norm() < 1e-12);
  }
  CHECK((flow_offset(kZeta, 4.2) - odeint_flow(Vec2::Zero(), 1, 4.2)).norm() < 1e-9);
}

TEST_CASE("affine semigroup and negative times") {
  for (double s : {-5.0, -1.3, 0.4, 2.9, 6.1}) {
    for (double t : {-6.0, -0.2, 1.7, 5.5}) {
      const Mat2 As = flow_matrix(kZeta, s), At = flow_matrix(kZeta, t);
      CHECK((As * At - flow_matrix(kZeta, s + t)).norm() < 1e-10);
      CHECK((As * flow_offset(kZeta, t) + flow_offset(kZeta, s) - flow_offset(kZeta, s + t)).norm() <
            1e-10);
    }
  }
  CHECK((flow_matrix(kZeta, -1.1) * flow_matrix(kZeta, 1.1) - Mat2::Identity()).norm() < 1e-14);
}

TEST_CASE("equilibria, reflection symmetry and composition") {
  AffineOscillatorFlow flow(kZeta);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  for (double t : {-3.0, 0.5, 4.0}) {
    CHECK((flow.apply2(Vec2(1, 0), 1, t) - Vec2(1, 0)).norm() < 1e-12);
    CHECK((flow.apply2(Vec2(-1, 0), -1, t) - Vec2(-1, 0)).norm() < 1e-12);
  }
  for (int k = 0; k < 20; ++k) {
    const Vec2 y(U(rng), U(rng));
    const double s = U(rng), t = U(rng);
    CHECK((flow.apply2(y, -1, t) + flow.apply2(-y, 1, t)).norm() < 1e-14);
    CHECK((flow.apply2(flow.apply2(y, 1, s), 1, t) - flow.apply2(y, 1, s + t)).norm() < 1e-10);
  }
}

TEST_CASE("state Jacobian and Liouville determinant") {
  AffineOscillatorFlow flow(kZeta);
  const Vec y = Vec2(0.3, -0.8);
  for (double t : {0.0, 0.9, 4.2}) {
    const Mat J = flow.state_jacobian(y, 1, t);
    Mat fd(2, 2);
    for (int j = 0; j < 2; ++j) {
      Vec yp = y, ym = y;
      yp[j] += 1e-6;
      ym[j] -= 1e-6;
      fd.col(j) = (flow.apply(yp, 1, t) - flow.apply(ym, 1, t)) / 2e-6;
    }
    CHECK((fd - J).norm() <= 1e-6 * std::max(1.0, J.norm()));
    CHECK(std::abs(J.determinant() - std::exp(-2.0 * kZeta * t)) < 1e-10);
  }
  CHECK((flow.state_jacobian(y, -1, 0.0) - Mat::Identity(2, 2)).norm() < 1e-15);
}

TEST_CASE("closed form against an adaptive RK oracle") {
  AffineOscillatorFlow flow(kZeta);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  std::uniform_real_distribution<double> T(-2.0 * M_PI, 2.0 * M_PI);
  double worst = 0.0;
  for (int k = 0; k < 25; ++k) {
    Vec2 y(U(rng), U(rng));
    if (y.norm() > 3.0) y *= 3.0 / y.norm();
    const double t = T(rng);
    const int u = k % 2 ? 1 : -1;
    worst = std::max(worst, (flow.apply2(y, u, t) - odeint_flow(y, u, t)).norm());
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("numeric backend reproduces the closed form") {
  AffineOscillatorFlow exact(kZeta);
  NumericFlow numeric(2, [&](const Vec& y, int u) { return exact.field(y, u); });
  const Vec y = Vec2(0.4, 0.2);
  for (double t : {-2.0, 1.0, 4.2}) {
    CHECK((numeric.apply(y, 1, t) - exact.apply(y, 1, t)).norm() < 1e-8);
    CHECK((numeric.state_jacobian(y, -1, t) - exact.state_jacobian(y, -1, t)).norm() < 1e-7);
  }
  CHECK((numeric.field_jacobian(y, 1) - exact.generator()).norm() < 1e-8);
}
