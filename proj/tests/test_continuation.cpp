#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "relaycoll/continuation.hpp"
#include "relaycoll/oscillator.hpp"
#include "relaycoll/roots.hpp"

using namespace relaycoll;
using namespace relaycoll::continuation;

namespace {

constexpr double kZeta = -0.1;
constexpr double kEps = 0.1;

ResidualProblem linear_problem(const Mat& M, const Vec& b) {
  ResidualProblem p;
  p.n_unknowns = int(M.cols());
  p.n_equations = int(M.rows());
  p.residual = [M, b](const Vec& z) { return Vec(M * z - b); };
  p.jacobian = [M](const Vec&) { return M; };
  return p;
}

const NSCPoint& nsc() {
  static const NSCPoint p = solve_nsc(kZeta, kEps, 4.13, -0.488);
  return p;
}

// NSC by scanning det DF_- - 1 along the epsilon slice of the collision surface
std::pair<double, double> nsc_by_scan() {
  auto alpha_at = [](double tau) {
    return oscillator::solve_alpha_on_slice(kZeta, tau, kEps, -0.45);
  };
  auto g = [&](double tau) {
    return oscillator::stability_at_collision(kZeta, tau, alpha_at(tau)).ns_minus;
  };
  double a = 4.0, ga = g(a);
  for (double b = 4.01; b <= 4.4; b += 0.01) {
    const double gb = g(b);
    if (ga * gb <= 0.0) {
      const auto r = roots::refine_bracket(g, a, b, ga, gb, 1e-14);
      return {r.x, alpha_at(r.x)};
    }
    a = b;
    ga = gb;
  }
  FAIL("no sign change on the slice");
  return {0, 0};
}

}  // namespace

TEST_CASE("newton on linear, singular and rootless problems") {
  Mat M(3, 3);
  M << 4, 1, 0, 1, 3, 1, 0, 1, 2;
  const Vec b = Vec::LinSpaced(3, 1, 3);
  const NewtonResult r = newton(linear_problem(M, b), Vec::Zero(3));
  CHECK(r.iterations == 1);
  CHECK((M * r.z - b).cwiseAbs().maxCoeff() <= 1e-10);

  Mat S = M;
  S.row(2) = S.row(0) + S.row(1);
  CHECK_THROWS_AS(newton(linear_problem(S, b), Vec::Zero(3)), SingularJacobian);

  ResidualProblem none;
  none.n_unknowns = none.n_equations = 1;
  none.residual = [](const Vec& z) { return Vec::Constant(1, z[0] * z[0] + 1.0); };
  CHECK_THROWS_AS(newton(none, Vec::Constant(1, 0.3)), NoConvergence);
}

TEST_CASE("slot freezing round trip") {
  const Vec z = Vec::LinSpaced(5, 0, 4);
  CHECK(insert_slot(remove_slot(z, 2), 2, 2.0) == z);
  Mat M = Mat::Identity(2, 3);
  const ResidualProblem p = fix_slot(linear_problem(M, Vec::Zero(2)), 1, 5.0);
  CHECK(p.n_unknowns == 2);
  CHECK(p.eval(Vec::Zero(2))[1] == doctest::Approx(5.0));
}

TEST_CASE("fixed point of F_- from the collision point") {
  const double tau = 4.2, alpha = -0.45;
  const double eps_c = oscillator::collision_epsilon(kZeta, tau, alpha);
  const Vec2 ys = oscillator::collision_point(kZeta, tau);
  const MapParams on{kZeta, tau, alpha, eps_c};
  CHECK(fixed_point_residual(ys, 0.0, on).cwiseAbs().maxCoeff() < 1e-12);

  // epsilon nudged above the surface
  const MapParams p{kZeta, tau, alpha, eps_c + 1e-3};
  Vec z(3);
  z << ys, 0.0;
  const NewtonResult r = newton(fixed_point_problem(p, {}), z);
  CHECK(fixed_point_residual(r.z.head<2>(), r.z[2], p).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(r.z[2] > 0.0);

  // residual grows linearly away from the solution
  const Vec2 dir(0.6, 0.8);
  const double s1 = fixed_point_residual(r.z.head<2>() + 1e-4 * dir, r.z[2], p).norm() / 1e-4;
  const double s2 = fixed_point_residual(r.z.head<2>() + 1e-5 * dir, r.z[2], p).norm() / 1e-5;
  CHECK(s1 > 0.1);
  CHECK(std::abs(s1 / s2 - 1.0) < 1e-3);
}

TEST_CASE("stable fixed point in the region between the NS and collision curves") {
  const MapParams p{kZeta, 4.2, -0.40, kEps};
  Vec z(3);
  z << oscillator::collision_point(kZeta, 4.2), 0.0;
  const NewtonResult r = newton(fixed_point_problem(p, {}), z);
  CHECK(r.z[2] < 0.0);  // strictly inside D_-
  Eigen::EigenSolver<Mat2> es(df_minus(r.z.head<2>(), r.z[2], p));
  CHECK(std::abs(es.eigenvalues()[0]) < 1.0);
  CHECK(std::abs(es.eigenvalues()[1]) < 1.0);
  CHECK(std::abs(es.eigenvalues()[0].imag()) > 0.0);
}

TEST_CASE("NS residual at NSC, fold points and the trace guard") {
  const NSCPoint& q = nsc();
  const NSResidual at = ns_residual(q.y0, q.t0, {kZeta, q.tau, q.alpha, kEps});
  CHECK(at.value.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(at.admissible);
  CHECK(std::abs(q.t0) < 1e-12);

  const auto map = oscillator::bifurcation_map(kZeta, oscillator::linspace(3.2, 6.2, 80),
                                               oscillator::linspace(-1.5, 1.5, 80));
  int tested = 0;
  for (const auto& c : map.curves) {
    if (c.kind != oscillator::CurveKind::FoldMinus) continue;
    for (std::size_t i = 0; i < c.points.size(); i += 5) {
      const auto& fp = c.points[i];
      const NSResidual f = ns_residual(oscillator::collision_point(kZeta, fp.tau), 0.0,
                                       {kZeta, fp.tau, fp.alpha, fp.epsilon});
      CHECK(std::abs(f.value[3]) > 1e-3);
      ++tested;
    }
  }
  CHECK(tested > 0);

  // det = 1 with a real pair: flagged
  const double tau = 5.3;
  auto g = [&](double a) { return oscillator::stability_at_collision(kZeta, tau, a).ns_minus; };
  const auto r = roots::refine_bracket(g, -0.12, -0.09, g(-0.12), g(-0.09), 1e-13);
  const double eps = oscillator::collision_epsilon(kZeta, tau, r.x);
  const NSResidual guard =
      ns_residual(oscillator::collision_point(kZeta, tau), 0.0, {kZeta, tau, r.x, eps});
  CHECK(std::abs(guard.value[3]) < 1e-9);
  CHECK(std::abs(guard.trace) > 2.0);
  CHECK_FALSE(guard.admissible);
}

TEST_CASE("fixed-point branch in tau crosses the collision surface at t0 = 0") {
  const double alpha = -0.45;
  const MapParams p{kZeta, 0.0, alpha, kEps};
  const ResidualProblem prob = fixed_point_problem(p, {Param::Tau});
  MapParams start = p;
  start.tau = 4.3;
  Vec z0(4);
  z0 << newton(fixed_point_problem(start, {}), (Vec(3) << oscillator::collision_point(kZeta, 4.3), 0.0).finished()).z, 4.3;

  ContinueOptions co;
  co.step = {0.01, 1e-6, 0.05, 60, 8, 1e-11, 3};
  co.direction_slot = 3;
  co.direction = 1;
  const Branch b = continue_branch(prob, z0, co);
  REQUIRE(b.points.size() > 3);
  std::optional<Vec> before;
  for (std::size_t i = 1; i < b.points.size(); ++i) {
    if (b.points[i - 1].z[2] * b.points[i].z[2] <= 0.0) {
      before = b.points[i].z;
      break;
    }
  }
  REQUIRE(before);

  ResidualProblem hit;
  hit.n_unknowns = hit.n_equations = 4;
  hit.residual = [&](const Vec& z) {
    Vec r(4);
    r.head<3>() = prob.eval(z);
    r[3] = z[2];
    return r;
  };
  const double tau_branch = newton(hit, *before, {1e-13, 30}).z[3];

  auto g = [&](double tau) { return oscillator::collision_epsilon_signed(kZeta, tau, alpha) - kEps; };
  const auto r = roots::refine_bracket(g, 4.3, 4.6, g(4.3), g(4.6), 1e-15);
  CHECK(std::abs(tau_branch - r.x) < 1e-8);

  // arclength spacing
  for (std::size_t i = 1; i < b.points.size(); ++i) {
    const double d = (b.points[i].z - b.points[i - 1].z).norm();
    CHECK(std::abs(d / b.points[i].step - 1.0) < 0.3);
    CHECK(b.points[i].residual_norm < 1e-9);
  }
}

TEST_CASE("NS curve passes through the scanned NSC point") {
  const auto [tau_scan, alpha_scan] = nsc_by_scan();
  const NSAtTau start = ns_alpha_at(kZeta, kEps, 4.3, -0.35, nsc().y0, 0.0);
  const ResidualProblem prob = ns_problem({kZeta, 0, 0, kEps}, {Param::Tau, Param::Alpha});
  Vec z0(5);
  z0 << start.y0, start.t0, 4.3, start.alpha;
  ContinueOptions co;
  co.step = {0.01, 1e-6, 0.04, 80, 8, 1e-11, 3};
  co.direction_slot = 3;
  co.direction = -1;
  co.bounds = {{3, 3.9, 4.5}};
  const Branch b = continue_branch(prob, z0, co);
  std::optional<Vec> near;
  for (std::size_t i = 1; i < b.points.size() && !near; ++i) {
    if (b.points[i - 1].z[2] * b.points[i].z[2] <= 0.0) near = b.points[i].z;
  }
  REQUIRE(near);
  const NSCPoint q = solve_nsc(kZeta, kEps, (*near)[3], (*near)[4]);
  CHECK(std::abs(q.tau - tau_scan) < 1e-6);
  CHECK(std::abs(q.alpha - alpha_scan) < 1e-6);
  CHECK(std::abs(q.tau - 4.130426191652889) < 1e-8);
}

TEST_CASE("step halving terminates at the floor") {
  const MapParams p{kZeta, 0.0, -0.45, kEps};
  Vec z0(4);
  z0 << newton(fixed_point_problem({kZeta, 4.3, -0.45, kEps}, {}),
               (Vec(3) << oscillator::collision_point(kZeta, 4.3), 0.0).finished()).z, 4.3;
  ContinueOptions co;
  co.step = {0.01, 1e-4, 0.05, 50, 0, 1e-14, 3};
  std::vector<double> steps;
  co.on_point = [&](const BranchPoint& bp) {
    steps.push_back(bp.step);
    return true;
  };
  const Branch b = continue_branch(fixed_point_problem(p, {Param::Tau}), z0, co);
  CHECK(b.reason == Termination::StepTooSmall);
  CHECK(b.points.size() == 1);
  CHECK_THROWS_AS(continue_branch(linear_problem(Mat::Identity(1, 2), Vec::Constant(1, 1.0)),
                                  Vec::Constant(2, NAN), co),
                  InitialPointFailed);
}

TEST_CASE("Fourier series interpolation and derivatives") {
  const int N = 8;
  const auto nodes = collocation_nodes(N);
  Vec v(2 * N + 1);
  auto fn = [](double x) { return 0.3 + std::cos(x) - 0.2 * std::sin(3 * x) + 0.05 * std::cos(7 * x); };
  for (int j = 0; j < v.size(); ++j) v[j] = fn(nodes[j]);
  const FourierSeries s = FourierSeries::fit(v);
  for (double x : {0.1, 1.7, 4.0}) {
    CHECK(s(x) == doctest::Approx(fn(x)).epsilon(1e-13));
    const double h = 1e-5;
    CHECK(s.derivative(x) == doctest::Approx((fn(x + h) - fn(x - h)) / (2 * h)).epsilon(1e-8));
    CHECK(s.second_derivative(x) ==
          doctest::Approx((fn(x + h) - 2 * fn(x) + fn(x - h)) / (h * h)).epsilon(1e-4));
  }
  const FourierSeries big = s.resized(20);
  CHECK(big(2.2) == doctest::Approx(s(2.2)).epsilon(1e-14));
  CHECK_THROWS_AS(FourierSeries::fit(Vec::Zero(4)), InvalidArgument);
}

TEST_CASE("error estimate on a circle and on white noise") {
  FourierCurve c(32);
  c.r.c[0] = 0.2;
  c.y0 = oscillator::collision_point(kZeta, 4.2);
  CHECK(c.r.tail_energy_fraction() < 1e-14);
  CHECK(c.p.tail_energy_fraction() < 1e-14);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  FourierSeries w(32);
  for (int i = 0; i < w.c.size(); ++i) w.c[i] = nd(rng);
  const double frac = w.tail_energy_fraction();
  CHECK(frac == doctest::Approx(0.25).epsilon(0.35));
  FourierCurve noisy(32);
  noisy.r = w;
  noisy.r.c[0] = 1.0;
  const ErrorEstimate e = fourier_error_estimate(noisy, {kZeta, 4.2, -0.45, kEps});
  CHECK(e.value > 1e-2);
  CHECK(e.tail_energy == doctest::Approx(frac));
}

TEST_CASE("degenerate curve reduces to the fixed-point residual") {
  const MapParams p{kZeta, 4.2, -0.40, kEps};
  FourierCurve c(4);
  c.y0 = Vec2(0.9, 1.5);
  c.t0 = -0.05;
  c.t.c[0] = c.t0;
  c.omega = 0.7;
  const Vec r = invariant_curve_residual(c, p, false);
  const Vec fp = fixed_point_residual(c.y0, c.t0, p);
  for (int j = 0; j < 9; ++j) CHECK((r.segment<3>(3 * j) - fp).norm() < 1e-15);
  CHECK((r.tail<3>() - fp).norm() == 0.0);
  CHECK_THROWS_AS(invariant_curve_residual(c, p), ParametrizationBreakdown);

  c.r.c[0] = 0.1;
  c.p.c[1] = 2.0;  // eta' = 1 - 2 sin(phi) changes sign
  CHECK_THROWS_AS(c.check_parametrization(), ParametrizationBreakdown);
}

TEST_CASE("collision closure on an analytic crossing-time profile") {
  FourierCurve c(4);
  const double phi0 = 1.2, a = 0.3;
  c.t.c[1] = a * std::cos(phi0);
  c.t.c[4 + 1] = a * std::sin(phi0);
  c.t.c[0] = -0.5;
  CHECK(collision_closure(c, phi0)[1] == doctest::Approx(0.0).scale(1.0));
  CHECK(collision_closure(c, phi0)[0] == doctest::Approx(-0.2));
  c.t.c[0] = -a;
  CHECK(collision_closure(c, phi0).norm() < 1e-15);
  CHECK(std::abs(collision_closure(c, phi0 + 0.1)[1]) > 1e-3);
  CHECK_THROWS_AS(collision_closure(c, phi0 + M_PI), NotAMaximum);
}

TEST_CASE("pack and unpack round trip") {
  FamilyPoint fp;
  fp.curve = FourierCurve(5);
  Vec z = Vec::LinSpaced(FourierCurve::packed_size(5) + 3, 0.1, 3.0);
  fp = FamilyPoint::unpack(5, z);
  CHECK(fp.pack() == z);
  CHECK(fp.curve.p.c[0] == 0.0);
  CHECK(fp.tau == z[family_tau_slot(5)]);
  CHECK(fp.alpha == z[family_alpha_slot(5)]);
}

TEST_CASE("seeded colliding curve just past NSC") {
  const FamilyPoint s = seed_family(nsc(), 32, 1e-3, kZeta, kEps);
  const MapParams p{kZeta, s.tau, s.alpha, kEps};
  CHECK(invariant_curve_residual(s.curve, p).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(s.curve.r.c[0] > 5e-4);
  CHECK(s.curve.r.c[0] < 5e-3);
  double tmax = -1.0;
  for (int k = 0; k < 1024; ++k) tmax = std::max(tmax, s.curve.t(2 * M_PI * k / 1024));
  CHECK(tmax <= 1e-8);
  CHECK(tmax > -1e-6);
  CHECK(s.curve.t.second_derivative(s.phi_star) < 0.0);
  CHECK(invariance_error(s, kZeta, kEps) < 1e-6);
}

TEST_CASE("colliding family near NSC: tangency and breakup") {
  const FamilyPoint s = seed_family(nsc(), 32, 1e-3, kZeta, kEps);
  FamilyOptions o;
  o.error_limit = 3e-5;  // stops early, well before the real break-up
  const FamilyBranch fb = continue_colliding_family(s, nsc(), kZeta, kEps, o);
  CHECK(fb.branch.reason == Termination::BreakupDetected);
  REQUIRE(fb.terminal);
  CHECK(fb.terminal->error.value > 3e-5);
  REQUIRE(fb.records.size() >= 6);

  std::vector<double> lx, ly;
  for (const auto& r : fb.records) {
    CHECK(r.t_max <= 1e-8);
    CHECK(r.point.tau > nsc().tau);
    if (r.invariance) CHECK(*r.invariance < 1e-6);
    const double d = r.point.tau - nsc().tau;
    if (d <= 0.02) {
      lx.push_back(std::log(d));
      ly.push_back(std::log(std::abs(r.point.alpha - r.alpha_ns)));
    }
  }
  for (std::size_t i = 0; i < fb.branch.points.size(); ++i) {
    CHECK(fb.branch.points[i].residual_norm < 1e-9);
  }
  REQUIRE(lx.size() >= 4);
  const double n = double(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx(2.0).epsilon(0.1));
  // radius grows with tau
  CHECK(fb.records.back().mean_radius > fb.records.front().mean_radius);
}
