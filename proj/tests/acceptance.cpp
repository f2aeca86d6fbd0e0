// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <boost/numeric/odeint.hpp>

#include <Eigen/Dense>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "relaycoll/attractor.hpp"
#include "relaycoll/continuation.hpp"
#include "relaycoll/oscillator.hpp"
#include "relaycoll/reduced_map.hpp"
#include "relaycoll/relay.hpp"

using namespace relaycoll;
namespace osc = relaycoll::oscillator;
namespace cont = relaycoll::continuation;
namespace att = relaycoll::attractor;

namespace {

constexpr double kZeta = -0.1;
constexpr double kEps = 0.1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string sci(double x) { return fmt("%.3e", x); }

// ---------------------------------------------------------------------------

Vec2 rk_oracle(const Vec2& y0, int u, double t) {
  using State = std::array<double, 2>;
  using namespace boost::numeric::odeint;
  const double w = 1.0 + kZeta * kZeta;
  State y{y0[0], y0[1]};
  auto rhs = [&](const State& x, State& dx, double) {
    dx[0] = x[1];
    dx[1] = -2.0 * kZeta * x[1] - w * x[0] + w * u;
  };
  if (t != 0.0) {
    integrate_adaptive(make_controlled(1e-13, 1e-13, runge_kutta_dopri5<State>()), rhs, y, 0.0, t,
                       t > 0 ? 1e-3 : -1e-3);
  }
  return Vec2(y[0], y[1]);
}

Outcome flows() {
  AffineOscillatorFlow flow(kZeta);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vec2 y(U(rng), U(rng));
    const int u = k % 2 ? 1 : -1;
    for (int j = -8; j <= 8; ++j) {
      const double t = 2.0 * M_PI * j / 8.0;
      worst = std::max(worst, (flow.apply2(y, u, t) - rk_oracle(y, u, t)).norm());
    }
  }
  return {worst < 1e-8, "sup error " + sci(worst) + " over 100 states x 17 times in [-2pi, 2pi]"};
}

Outcome collision_identity() {
  AffineOscillatorFlow flow(kZeta);
  std::vector<double> taus, alphas;
  for (int i = 0; i < 50; ++i) {
    taus.push_back(M_PI + M_PI * (i + 0.5) / 50.0);
    alphas.push_back(-1.2 + 2.4 * (i + 0.5) / 50.0);
  }
  const auto grid = osc::surface_grid(kZeta, taus, alphas);
  int valid = 0;
  double worst_orbit = 0.0, worst_fixed = 0.0;
  for (const auto& s : grid) {
    if (!s.valid) continue;
    ++valid;
    const Vec2 ys = osc::collision_point(kZeta, s.tau);
    worst_orbit = std::max(worst_orbit, (ys + flow.apply2(ys, 1, s.tau)).norm());
    const auto ctx = osc::make_context({kZeta, s.tau, s.epsilon, s.alpha});
    worst_fixed = std::max(worst_fixed, (ctx.map_F(ys) - ys).norm());
  }
  return {valid > 0 && worst_orbit < 1e-10 && worst_fixed < 1e-10,
          std::to_string(valid) + " valid points; |y* + Y+^tau y*| " + sci(worst_orbit) +
              ", |F(y*) - y*| " + sci(worst_fixed)};
}

Vec random_offset(std::mt19937_64& rng, double radius) {
  std::normal_distribution<double> N;
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Vec d(2);
  d << N(rng), N(rng);
  return d * radius * std::sqrt(U(rng)) / d.norm();
}

CollisionContext slice_context(double tau) {
  const double alpha = osc::solve_alpha_on_slice(kZeta, tau, kEps, -0.47);
  return osc::make_context({kZeta, tau, kEps, alpha});
}

Outcome reduction_oracle() {
  const auto ctx = slice_context(4.2);
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vec y = ctx.y_ref() + random_offset(rng, 1e-2);
    const auto pts = simulate_switch_points(ctx, y, 6);
    Vec z = y;
    double sign = 1.0;
    for (int j = 0; j < 6; ++j) {
      z = ctx.map_F(z);
      sign = -sign;
      worst = std::max(worst, (pts[j] - sign * z).norm());
    }
  }
  return {worst < 1e-6, "max |switch point - (-1)^k F^k(y)| " + sci(worst) + " over 100 points, k <= 6"};
}

Mat fd_jacobian(const CollisionContext& ctx, const Vec& y, MapBranch b, double h = 1e-6) {
  Mat J(2, 2);
  for (int j = 0; j < 2; ++j) {
    Vec yp = y, ym = y;
    yp[j] += h;
    ym[j] -= h;
    J.col(j) = (ctx.map_F_branch(yp, b) - ctx.map_F_branch(ym, b)) / (2.0 * h);
  }
  return J;
}

Outcome linearization() {
  const auto ctx = slice_context(4.2);
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (MapBranch b : {MapBranch::Plus, MapBranch::Minus}) {
    for (int k = 0; k < 20; ++k) {
      const Vec y = ctx.y_ref() + random_offset(rng, 0.02);
      const Mat J = ctx.jacobian_F_branch(y, b).J;
      worst = std::max(worst, (J - fd_jacobian(ctx, y, b)).norm() / J.norm());
    }
  }
  double coincide = 0.0;
  for (double tau : {3.6, 4.0, 4.5, 5.0, 5.8}) {
    const double eps = osc::collision_epsilon(kZeta, tau, 0.0);
    const auto c0 = osc::make_context({kZeta, tau, eps, 0.0});
    coincide = std::max(coincide, (c0.linearization_at_reference(MapBranch::Plus) -
                                   c0.linearization_at_reference(MapBranch::Minus))
                                      .norm());
  }
  return {worst < 1e-5 && coincide < 1e-10,
          "relative DF error " + sci(worst) + " (40 points); |DF+ - DF-| at alpha = 0 " + sci(coincide)};
}

HybridState random_state(std::mt19937_64& rng, const RelaySystem& sys) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_int_distribution<int> nsw(0, 3);
  const int k = nsw(rng);
  std::vector<double> times;
  for (int i = 0; i < k; ++i) times.push_back(-sys.tau * (0.5 + 0.5 * U(rng)));
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::vector<int> labels;
  for (std::size_t i = 0; i <= times.size(); ++i) labels.push_back(U(rng) > 0 ? 1 : -1);
  const Vec2 anchor(U(rng), U(rng));
  return {HistorySegment::from_breakpoints(sys.flow, sys.tau, anchor, times, labels),
          U(rng) > 0 ? 1 : -1};
}

Outcome switch_bound() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int worst_observed = 0, violations = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  for (int run = 0; run < 50; ++run) {
    const osc::Params p{kZeta, 1.0 + 5.0 * U(rng), 0.02 + 0.3 * U(rng), -1.5 + 3.0 * U(rng)};
    const RelaySystem sys = osc::relay_system(p);
    EvolveOptions eo;
    eo.degenerate = DegeneratePolicy::Record;
    const double tE = sys.tau + 40.0;
    const auto res = evolve(sys, random_state(rng, sys), tE, eo);
    const auto rep = switch_bound_report(res.trajectory, sys.tau, tE);
    worst_observed = std::max(worst_observed, rep.observed_switches);
    min_slack = std::min(min_slack, rep.bound - rep.observed_switches);
    if (rep.observed_switches > rep.bound) ++violations;
  }
  return {violations == 0, std::to_string(violations) + " violations in 50 runs; most switches " +
                               std::to_string(worst_observed) + ", smallest slack " + fmt("%.2f", min_slack)};
}

Outcome polygon() {
  const auto ctx = osc::make_context({kZeta, 4.25, kEps, -0.44});
  const auto it = att::iterate_attractor(ctx, ctx.y_ref() + Vec2(0.01, 0.01));
  const auto poly = att::polygon_arcs(it.samples, ctx);
  const auto cm = att::extract_circle_map(it.samples);
  const bool ok = it.visited_plus && it.visited_minus && poly.arc_count > 0 && poly.arc_count < 100 &&
                  cm.monotone;
  return {ok, std::string("visits D+ ") + (it.visited_plus ? "yes" : "no") + ", D- " +
                  (it.visited_minus ? "yes" : "no") + "; " + std::to_string(poly.arc_count) +
                  " arcs; circle map " + (cm.monotone ? "strictly monotone" : "not monotone") +
                  ", rotation number " + fmt("%.4f", cm.rotation_number)};
}

Outcome sweep() {
  const double tau = 4.2;
  const auto nsc = cont::solve_nsc(kZeta, kEps, 4.13, -0.488);
  const auto lm = att::sweep_landmarks(kZeta, tau, kEps, nsc, true);
  auto family = [&](double a) { return osc::make_context({kZeta, tau, kEps, a}); };

  // one settling run at the first parameter, so that the first envelope
  // starts, like all later ones, from the last iterate of a previous run
  const double a0 = -0.52, step = 5e-4;
  std::vector<double> alphas;
  for (int k = 0; a0 + k * step <= *lm.icc; ++k) alphas.push_back(a0 + k * step);
  const auto settle = att::iterate_attractor(family(a0), osc::collision_point(kZeta, tau) + Vec2(0.01, 0.01));
  const auto recs = att::sweep(family, alphas, settle.samples.back());

  double before = 0.0;
  int n_before = 0;
  std::vector<double> xs, ws;
  const double half = lm.spc + 0.5 * (*lm.icc - lm.spc);
  for (const auto& r : recs) {
    const double w = r.envelope.max[0] - r.envelope.min[0];
    if (r.parameter < lm.spc) {
      before = std::max(before, w);
      ++n_before;
    } else if (r.parameter <= half) {
      xs.push_back(r.parameter);
      ws.push_back(w);
    }
  }
  const int n = int(xs.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = xs[i];
    b[i] = ws[i];
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  const double ss_res = (A * c - b).squaredNorm();
  const double ss_tot = (b.array() - b.mean()).square().sum();
  const double r2 = n > 2 ? 1.0 - ss_res / ss_tot : 0.0;
  return {n_before > 0 && before < 1e-6 && n > 2 && r2 > 0.99 && c[1] > 0.0,
          "SPC " + fmt("%.6f", lm.spc) + ", ICC " + fmt("%.6f", *lm.icc) + "; max width before SPC " +
              sci(before) + " (" + std::to_string(n_before) + " values); R^2 " + fmt("%.5f", r2) +
              " over " + std::to_string(n) + " values, slope " + fmt("%.3f", c[1])};
}

// ---------------------------------------------------------------------------

struct FamilyRun {
  cont::NSCPoint nsc;
  cont::FamilyBranch branch;
};

FamilyRun family_run() {
  FamilyRun run;
  run.nsc = cont::solve_nsc(kZeta, kEps, 4.13, -0.488);
  const auto seed = cont::seed_family(run.nsc, 32, 1e-3, kZeta, kEps);
  run.branch = cont::continue_colliding_family(seed, run.nsc, kZeta, kEps);
  return run;
}

double line_fit(const std::vector<double>& x, const std::vector<double>& y, double* intercept = nullptr) {
  const int n = int(x.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = x[i];
    b[i] = y[i];
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  if (intercept) *intercept = c[0];
  return c[1];
}

double mode_doubling_change(const cont::FamilyPoint& fp) {
  cont::FamilyPoint fine = fp;
  fine.curve = fp.curve.resized(64);
  const int slot = cont::family_tau_slot(64);
  const auto fixed = cont::fix_slot(cont::family_problem(64, kZeta, kEps), slot, fp.tau);
  const auto r = cont::newton(fixed, cont::remove_slot(fine.pack(), slot), {1e-12, 30});
  fine = cont::FamilyPoint::unpack(64, cont::insert_slot(r.z, slot, fp.tau));
  double d = 0.0;
  for (int k = 0; k < 512; ++k) {
    const double phi = 2.0 * M_PI * k / 512.0;
    d = std::max(d, (fine.curve.point(phi) - fp.curve.point(phi)).norm());
  }
  return d;
}

Outcome family_criteria(const FamilyRun& run) {
  const auto& recs = run.branch.records;
  const double tau_nsc = run.nsc.tau;
  std::vector<std::string> parts;
  bool ok = true;

  // NS curve through NSC: every record carries alpha on the NS curve at its tau
  const bool ns_ok = !recs.empty() && std::abs(recs.front().alpha_ns - recs.front().point.alpha) < 1e-4;
  ok = ok && ns_ok;

  std::vector<double> lx, ly;
  for (const auto& r : recs) {
    const double d = r.point.tau - tau_nsc;
    if (d > 0.0 && d <= 0.02) {
      lx.push_back(std::log(d));
      ly.push_back(std::log(std::abs(r.point.alpha - r.alpha_ns)));
    }
  }
  const double slope = lx.size() >= 3 ? line_fit(lx, ly) : 0.0;
  const bool tangency = lx.size() >= 3 && std::abs(slope - 2.0) <= 0.2;
  ok = ok && tangency;
  parts.push_back("tangency exponent " + fmt("%.3f", slope) + " (" + std::to_string(lx.size()) + " points)");

  const double t_lo = recs.front().point.tau, t_hi = recs.back().point.tau;
  const double m_lo = t_lo + 0.25 * (t_hi - t_lo), m_hi = t_lo + 0.75 * (t_hi - t_lo);
  std::vector<double> tx, rr;
  for (const auto& r : recs) {
    if (r.point.tau >= m_lo && r.point.tau <= m_hi) {
      tx.push_back(r.point.tau);
      rr.push_back(r.mean_radius);
    }
  }
  double c0 = 0.0;
  const double c1 = line_fit(tx, rr, &c0);
  double dev = 0.0;
  for (std::size_t i = 0; i < tx.size(); ++i) dev = std::max(dev, std::abs(rr[i] - c0 - c1 * tx[i]) / rr[i]);
  const bool affine = tx.size() >= 3 && dev < 0.05;
  ok = ok && affine;
  parts.push_back("mid-branch radius deviation " + fmt("%.2f", 100.0 * dev) + "% (" +
                  std::to_string(tx.size()) + " points, tau " + fmt("%.3f", m_lo) + ".." + fmt("%.3f", m_hi) + ")");

  double worst_change = 0.0, ok_until = tau_nsc;
  bool below = true;
  for (std::size_t i = 0; i < recs.size(); i += 5) {
    const double d = mode_doubling_change(recs[i].point);
    worst_change = std::max(worst_change, d);
    if (d < 1e-8 && below) ok_until = recs[i].point.tau;
    below = below && d < 1e-8;
  }
  ok = ok && worst_change < 1e-8;
  parts.push_back("32->64 change max " + sci(worst_change) + " (below 1e-8 up to tau " + fmt("%.4f", ok_until) + ")");

  const bool breakup = run.branch.branch.reason == cont::Termination::BreakupDetected && run.branch.terminal &&
                       run.branch.terminal->error.value > 1e-2;
  ok = ok && breakup;
  parts.push_back(std::string("termination ") + cont::to_string(run.branch.branch.reason) +
                  (run.branch.terminal ? " at tau " + fmt("%.4f", run.branch.terminal->point.tau) +
                                             ", estimate " + sci(run.branch.terminal->error.value)
                                       : std::string()));

  std::string detail = std::to_string(recs.size()) + " family points; ";
  for (std::size_t i = 0; i < parts.size(); ++i) detail += (i ? "; " : "") + parts[i];
  if (!ns_ok) detail += "; family does not start on the NS curve";
  return {ok, detail};
}

Outcome invariance(const FamilyRun& run) {
  double worst = 0.0, worst_tau = 0.0, holds_until = run.nsc.tau;
  int checked = 0;
  bool below = true;
  for (const auto& r : run.branch.records) {
    if (!r.invariance) continue;
    ++checked;
    if (*r.invariance > worst) {
      worst = *r.invariance;
      worst_tau = r.point.tau;
    }
    if (*r.invariance < 1e-6 && below) holds_until = r.point.tau;
    below = below && *r.invariance < 1e-6;
  }
  std::string detail = std::to_string(checked) + " curves checked; worst error " + sci(worst) + " at tau " +
                       fmt("%.4f", worst_tau) + "; below 1e-6 up to tau " + fmt("%.4f", holds_until);
  return {checked > 0 && worst < 1e-6, detail};
}

template <class F>
bool report(int id, const char* name, double limit_s, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = o.pass && s < limit_s;
  std::printf("%s %d %s: %s; %.1f s (limit %.0f s)\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
              s, limit_s);
  std::fflush(stdout);
  return pass;
}

}  // namespace

int main() {
  bool all = true;
  all &= report(1, "flow correctness", 5, flows);
  all &= report(2, "collision identity", 30, collision_identity);
  all &= report(3, "reduction oracle", 60, reduction_oracle);
  all &= report(4, "linearization", 5, linearization);
  all &= report(5, "switch-count bound", 60, switch_bound);
  all &= report(6, "invariant polygon at alpha = -0.44, tau = 4.25", 10, polygon);
  all &= report(7, "alpha sweep at tau = 4.2", 120, sweep);

  FamilyRun run;
  double family_seconds = 0.0;
  all &= report(8, "NS curve and colliding family", 600, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    run = family_run();
    family_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return family_criteria(run);
  });
  all &= report(9, "invariance of family curves", 600 - family_seconds, [&] { return invariance(run); });
  return all ? 0 : 1;
}
