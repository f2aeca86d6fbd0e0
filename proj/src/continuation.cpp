#include "relaycoll/continuation.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "relaycoll/flows.hpp"
#include "relaycoll/oscillator.hpp"
#include "relaycoll/reduced_map.hpp"

namespace relaycoll::continuation {

// ---------------------------------------------------------------------------
// Generic solvers

Vec ResidualProblem::eval(const Vec& z) const {
  if (z.size() != n_unknowns) throw InvalidArgument("unknown vector has the wrong length");
  Vec r = residual(z);
  if (r.size() != n_equations) throw InvalidArgument("residual has the wrong length");
  return r;
}

Mat ResidualProblem::jacobian_at(const Vec& z, const Vec* r0) const {
  if (jacobian) return jacobian(z);
  const Vec f0 = r0 ? *r0 : eval(z);
  Mat J(n_equations, n_unknowns);
  Vec zz = z;
  for (int i = 0; i < n_unknowns; ++i) {
    zz[i] = z[i] + fd_step;
    J.col(i) = (eval(zz) - f0) / fd_step;
    zz[i] = z[i];
  }
  return J;
}

Vec insert_slot(const Vec& reduced, int slot, double value) {
  Vec full(reduced.size() + 1);
  full.head(slot) = reduced.head(slot);
  full[slot] = value;
  full.tail(reduced.size() - slot) = reduced.tail(reduced.size() - slot);
  return full;
}

Vec remove_slot(const Vec& full, int slot) {
  Vec reduced(full.size() - 1);
  reduced.head(slot) = full.head(slot);
  reduced.tail(full.size() - slot - 1) = full.tail(full.size() - slot - 1);
  return reduced;
}

ResidualProblem fix_slot(const ResidualProblem& p, int slot, double value) {
  if (slot < 0 || slot >= p.n_unknowns) throw InvalidArgument("slot out of range");
  ResidualProblem q;
  q.n_unknowns = p.n_unknowns - 1;
  q.n_equations = p.n_equations;
  q.fd_step = p.fd_step;
  q.residual = [p, slot, value](const Vec& z) { return p.eval(insert_slot(z, slot, value)); };
  if (p.jacobian) {
    q.jacobian = [p, slot, value](const Vec& z) {
      const Mat J = p.jacobian(insert_slot(z, slot, value));
      Mat R(J.rows(), J.cols() - 1);
      R.leftCols(slot) = J.leftCols(slot);
      R.rightCols(J.cols() - slot - 1) = J.rightCols(J.cols() - slot - 1);
      return R;
    };
  }
  for (int s : p.parameter_slots) {
    if (s != slot) q.parameter_slots.push_back(s > slot ? s - 1 : s);
  }
  return q;
}

namespace {

double max_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

Vec solve_linear(const Mat& J, const Vec& rhs, double rank_tol) {
  Eigen::ColPivHouseholderQR<Mat> qr(J);
  qr.setThreshold(rank_tol);
  if (qr.rank() < std::min(J.rows(), J.cols())) {
    std::ostringstream msg;
    msg << "Jacobian has rank " << qr.rank() << " of " << std::min(J.rows(), J.cols());
    throw SingularJacobian(msg.str());
  }
  return qr.solve(rhs);
}

}  // namespace

NewtonResult newton(const ResidualProblem& p, Vec z, const NewtonOptions& opts) {
  if (p.n_equations < p.n_unknowns) {
    throw InvalidArgument("newton needs at least as many equations as unknowns");
  }
  NewtonResult out;
  for (int it = 0;; ++it) {
    const Vec r = p.eval(z);
    const double nr = max_norm(r);
    if (!std::isfinite(nr)) throw NoConvergence("residual is not finite");
    if (nr <= opts.tol) {
      out.z = std::move(z);
      out.residual_norm = nr;
      out.iterations = it;
      return out;
    }
    if (it >= opts.max_iter) {
      std::ostringstream msg;
      msg << "no convergence after " << it << " iterations (residual " << nr << ")";
      throw NoConvergence(msg.str());
    }
    z -= solve_linear(p.jacobian_at(z, &r), r, opts.rank_tol);
  }
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::MaxPoints: return "max-points";
    case Termination::ParameterBound: return "parameter-bound";
    case Termination::StepTooSmall: return "step-too-small";
    case Termination::BreakupDetected: return "breakup-detected";
    case Termination::Stopped: return "stopped";
  }
  return "unknown";
}

namespace {

Vec null_vector(const Mat& J) {
  const Mat Jt = J.transpose();
  Eigen::HouseholderQR<Mat> qr(Jt);
  const Mat Q = qr.householderQ();
  return Q.col(J.cols() - 1);
}

Vec tangent_from(const Mat& J, const Vec& previous) {
  const int n = int(J.cols());
  Mat A(n, n);
  A.topRows(n - 1) = J;
  A.row(n - 1) = previous.transpose();
  Vec rhs = Vec::Zero(n);
  rhs[n - 1] = 1.0;
  Vec t = A.colPivHouseholderQr().solve(rhs);
  if (!t.allFinite() || t.norm() == 0.0) t = null_vector(J);
  t.normalize();
  if (t.dot(previous) < 0.0) t = -t;
  return t;
}

struct Corrected {
  Vec z;
  double residual = 0.0;
  int iterations = 0;
};

// Newton on [R(z); t . (z - z_prev) - h] from the predictor z_prev + h t.
std::optional<Corrected> correct(const ResidualProblem& p, const Vec& z_prev, const Vec& t,
                                 double h, const StepPolicy& sp) {
  Vec z = z_prev + h * t;
  const int n = p.n_unknowns;
  try {
    for (int it = 0; it <= sp.newton_max_iter; ++it) {
      const Vec r = p.eval(z);
      const double arc = t.dot(z - z_prev) - h;
      const double nr = std::max(max_norm(r), std::abs(arc));
      if (!std::isfinite(nr)) return std::nullopt;
      if (nr <= sp.newton_tol) return Corrected{z, max_norm(r), it};
      if (it == sp.newton_max_iter) return std::nullopt;
      Mat A(n, n);
      A.topRows(n - 1) = p.jacobian_at(z, &r);
      A.row(n - 1) = t.transpose();
      Vec G(n);
      G.head(n - 1) = r;
      G[n - 1] = arc;
      const Vec dz = solve_linear(A, G, 1e-13);
      if (!dz.allFinite()) return std::nullopt;
      z -= dz;
    }
  } catch (const Error&) {
    return std::nullopt;
  }
  return std::nullopt;
}

bool within_bounds(const Vec& z, const std::vector<std::tuple<int, double, double>>& bounds) {
  for (const auto& [slot, lo, hi] : bounds) {
    if (z[slot] < lo || z[slot] > hi) return false;
  }
  return true;
}

}  // namespace

Branch continue_branch(const ResidualProblem& p, const Vec& z0, const ContinueOptions& opts) {
  if (p.n_equations != p.n_unknowns - 1) {
    throw InvalidArgument("continuation needs one more unknown than equations");
  }
  const StepPolicy& sp = opts.step;
  if (!(sp.h_initial > 0.0) || !(sp.h_min > 0.0) || sp.h_max < sp.h_initial) {
    throw InvalidArgument("invalid step policy");
  }

  // correct the initial point along the normal to the solution set
  Vec z = z0;
  BranchPoint first;
  try {
    int it = 0;
    for (;; ++it) {
      const Vec r = p.eval(z);
      const double nr = max_norm(r);
      if (nr <= sp.newton_tol) {
        first.residual_norm = nr;
        break;
      }
      if (it >= 30 || !std::isfinite(nr)) throw NoConvergence("initial correction failed");
      const Mat J = p.jacobian_at(z, &r);
      z -= J.completeOrthogonalDecomposition().solve(r);
    }
    first.newton_iterations = it;
  } catch (const Error& e) {
    throw InitialPointFailed(e.what());
  }
  first.z = z;
  first.step = 0.0;
  if (opts.error_estimate) first.error_estimate = opts.error_estimate(z);

  Branch branch;
  branch.points.push_back(first);
  if (opts.on_point && !opts.on_point(first)) {
    branch.reason = Termination::Stopped;
    return branch;
  }

  Vec t = null_vector(p.jacobian_at(z));
  if (opts.direction_slot >= 0 && t[opts.direction_slot] * opts.direction < 0.0) t = -t;

  double h = sp.h_initial;
  while (true) {
    if (int(branch.points.size()) >= sp.max_points) {
      branch.reason = Termination::MaxPoints;
      branch.message = "reached the maximum number of points";
      return branch;
    }
    const auto c = correct(p, z, t, h, sp);
    if (!c) {
      h *= 0.5;
      if (h < sp.h_min) {
        branch.reason = Termination::StepTooSmall;
        std::ostringstream msg;
        msg << "step fell below " << sp.h_min;
        branch.message = msg.str();
        return branch;
      }
      continue;
    }
    BranchPoint bp;
    bp.z = c->z;
    bp.step = h;
    bp.residual_norm = c->residual;
    bp.newton_iterations = c->iterations;
    if (opts.error_estimate) bp.error_estimate = opts.error_estimate(bp.z);

    if (!within_bounds(bp.z, opts.bounds)) {
      branch.reason = Termination::ParameterBound;
      branch.message = "left the parameter bounds";
      branch.terminal = bp;
      return branch;
    }
    if (opts.error_estimate && !(bp.error_estimate <= opts.error_limit)) {
      branch.reason = Termination::BreakupDetected;
      std::ostringstream msg;
      msg << "error estimate " << bp.error_estimate << " exceeds " << opts.error_limit;
      branch.message = msg.str();
      branch.terminal = bp;
      return branch;
    }

    Vec t_new;
    try {
      t_new = tangent_from(p.jacobian_at(bp.z), t);
    } catch (const Error&) {
      t_new = t;
    }
    z = bp.z;
    t = t_new;
    branch.points.push_back(bp);
    if (opts.on_point && !opts.on_point(bp)) {
      branch.reason = Termination::Stopped;
      branch.message = "stopped by callback";
      return branch;
    }
    if (c->iterations <= sp.easy_iterations) h = std::min(2.0 * h, sp.h_max);
  }
}

// ---------------------------------------------------------------------------
// Fixed points and NS points

namespace {

Vec2 hvec(double alpha) { return Vec2(std::cos(alpha), std::sin(alpha)); }

Vec2 flow2(double zeta, const Vec2& y, int u, double t) {
  return flow_matrix(zeta, t) * y + double(u) * flow_offset(zeta, t);
}

Vec2 field2(double zeta, const Vec2& y, int u) {
  return AffineOscillatorFlow(zeta).field2(y, u);
}

double& param_ref(MapParams& p, Param which) {
  switch (which) {
    case Param::Tau: return p.tau;
    case Param::Alpha: return p.alpha;
    case Param::Epsilon: return p.epsilon;
  }
  return p.tau;
}

MapParams with_free(MapParams base, const std::vector<Param>& free, const Vec& z, int offset) {
  for (std::size_t i = 0; i < free.size(); ++i) param_ref(base, free[i]) = z[offset + int(i)];
  return base;
}

// crossing time of the F_- branch, Newton from 0
double minus_crossing_time(double zeta, const Vec2& y, double alpha, double eps) {
  const Vec2 hp = hvec(alpha);
  double t = 0.0;
  for (int i = 0; i < 60; ++i) {
    const Vec2 z = flow2(zeta, y, -1, t);
    const double r = hp.dot(z) - eps;
    if (std::abs(r) < 1e-15) break;
    const double d = hp.dot(field2(zeta, z, -1));
    if (d == 0.0) throw DegenerateDerivative("zero normal speed in the crossing-time solve");
    t -= r / d;
  }
  return t;
}

}  // namespace

Vec fixed_point_residual(const Vec2& y0, double t0, const MapParams& p) {
  Vec r(3);
  r.head<2>() = y0 + flow2(p.zeta, y0, 1, p.tau + t0);
  r[2] = p.epsilon - hvec(p.alpha).dot(flow2(p.zeta, y0, -1, t0));
  return r;
}

Mat2 df_minus(const Vec2& y0, double t0, const MapParams& p) {
  const Vec2 hp = hvec(p.alpha);
  const Vec2 z = flow2(p.zeta, y0, -1, t0);
  const Vec2 w = flow2(p.zeta, y0, 1, p.tau + t0);
  const double speed = hp.dot(field2(p.zeta, z, -1));
  if (speed == 0.0) throw DegenerateDerivative("zero normal speed at the fixed point");
  const Vec2 grad_t = -(flow_matrix(p.zeta, t0).transpose() * hp) / speed;
  return -(flow_matrix(p.zeta, p.tau + t0) + field2(p.zeta, w, 1) * grad_t.transpose());
}

NSResidual ns_residual(const Vec2& y0, double t0, const MapParams& p) {
  NSResidual out;
  out.value.resize(4);
  out.value.head<3>() = fixed_point_residual(y0, t0, p);
  const Mat2 J = df_minus(y0, t0, p);
  out.value[3] = J.determinant() - 1.0;
  out.trace = J.trace();
  out.admissible = std::abs(out.trace) < 2.0;
  return out;
}

ResidualProblem fixed_point_problem(const MapParams& p, const std::vector<Param>& free) {
  ResidualProblem prob;
  prob.n_unknowns = 3 + int(free.size());
  prob.n_equations = 3;
  for (std::size_t i = 0; i < free.size(); ++i) prob.parameter_slots.push_back(3 + int(i));
  prob.residual = [p, free](const Vec& z) {
    return fixed_point_residual(z.head<2>(), z[2], with_free(p, free, z, 3));
  };
  return prob;
}

ResidualProblem ns_problem(const MapParams& p, const std::vector<Param>& free) {
  ResidualProblem prob;
  prob.n_unknowns = 3 + int(free.size());
  prob.n_equations = 4;
  for (std::size_t i = 0; i < free.size(); ++i) prob.parameter_slots.push_back(3 + int(i));
  prob.residual = [p, free](const Vec& z) {
    return ns_residual(z.head<2>(), z[2], with_free(p, free, z, 3)).value;
  };
  return prob;
}

NSCPoint solve_nsc(double zeta, double epsilon, double tau_guess, double alpha_guess) {
  MapParams base{zeta, tau_guess, alpha_guess, epsilon};
  const ResidualProblem ns = ns_problem(base, {Param::Tau, Param::Alpha});
  ResidualProblem prob;
  prob.n_unknowns = 5;
  prob.n_equations = 5;
  prob.residual = [ns](const Vec& z) {
    Vec r(5);
    r.head<4>() = ns.eval(z);
    r[4] = z[2];
    return r;
  };
  Vec z(5);
  z.head<2>() = oscillator::collision_point(zeta, tau_guess);
  z[2] = 0.0;
  z[3] = tau_guess;
  z[4] = alpha_guess;
  const NewtonResult res = newton(prob, z, {1e-13, 40});
  NSCPoint out;
  out.y0 = res.z.head<2>();
  out.t0 = res.z[2];
  out.tau = res.z[3];
  out.alpha = res.z[4];
  out.residual_norm = res.residual_norm;
  return out;
}

NSAtTau ns_alpha_at(double zeta, double epsilon, double tau, double alpha_guess, const Vec2& y0,
                    double t0) {
  const ResidualProblem prob = ns_problem({zeta, tau, alpha_guess, epsilon}, {Param::Alpha});
  Vec z(4);
  z << y0, t0, alpha_guess;
  const NewtonResult res = newton(prob, z, {1e-13, 40});
  return {res.z[3], res.z.head<2>(), res.z[2]};
}

// ---------------------------------------------------------------------------
// Fourier series

namespace {

// cos(k phi), sin(k phi) for k = 1..N by rotation
void harmonics(double phi, int N, std::vector<double>& c, std::vector<double>& s) {
  c.resize(N + 1);
  s.resize(N + 1);
  c[0] = 1.0;
  s[0] = 0.0;
  if (N == 0) return;
  const double c1 = std::cos(phi), s1 = std::sin(phi);
  for (int k = 1; k <= N; ++k) {
    // re-anchor periodically to keep the recurrence accurate
    if (k % 16 == 0) {
      c[k] = std::cos(k * phi);
      s[k] = std::sin(k * phi);
    } else {
      c[k] = c[k - 1] * c1 - s[k - 1] * s1;
      s[k] = s[k - 1] * c1 + c[k - 1] * s1;
    }
  }
}

thread_local std::vector<double> hc, hs;

}  // namespace

double FourierSeries::operator()(double phi) const {
  harmonics(phi, N, hc, hs);
  double v = c[0];
  for (int k = 1; k <= N; ++k) v += c[k] * hc[k] + c[N + k] * hs[k];
  return v;
}

double FourierSeries::derivative(double phi) const {
  harmonics(phi, N, hc, hs);
  double v = 0.0;
  for (int k = 1; k <= N; ++k) v += k * (-c[k] * hs[k] + c[N + k] * hc[k]);
  return v;
}

double FourierSeries::second_derivative(double phi) const {
  harmonics(phi, N, hc, hs);
  double v = 0.0;
  for (int k = 1; k <= N; ++k) v -= double(k) * k * (c[k] * hc[k] + c[N + k] * hs[k]);
  return v;
}

std::vector<double> collocation_nodes(int N) {
  const int M = 2 * N + 1;
  std::vector<double> nodes(M);
  for (int j = 0; j < M; ++j) nodes[j] = 2.0 * M_PI * j / M;
  return nodes;
}

FourierSeries FourierSeries::fit(const Vec& values) {
  const int M = int(values.size());
  if (M < 1 || M % 2 == 0) throw InvalidArgument("fit needs an odd number of node values");
  FourierSeries s((M - 1) / 2);
  const auto nodes = collocation_nodes(s.N);
  s.c[0] = values.mean();
  for (int j = 0; j < M; ++j) {
    harmonics(nodes[j], s.N, hc, hs);
    for (int k = 1; k <= s.N; ++k) {
      s.c[k] += 2.0 / M * values[j] * hc[k];
      s.c[s.N + k] += 2.0 / M * values[j] * hs[k];
    }
  }
  return s;
}

FourierSeries FourierSeries::resized(int modes) const {
  FourierSeries s(modes);
  const int K = std::min(N, modes);
  s.c[0] = c[0];
  for (int k = 1; k <= K; ++k) {
    s.c[k] = c[k];
    s.c[modes + k] = c[N + k];
  }
  return s;
}

double FourierSeries::tail_energy_fraction() const {
  double total = 0.0, tail = 0.0;
  for (int k = 1; k <= N; ++k) {
    const double e = c[k] * c[k] + c[N + k] * c[N + k];
    total += e;
    if (4 * k > 3 * N) tail += e;
  }
  return total > 0.0 ? tail / total : 0.0;
}

// ---------------------------------------------------------------------------
// Curves

FourierCurve::FourierCurve(int modes) : N(modes), r(modes), p(modes), t(modes) {}

Vec FourierCurve::pack() const {
  const int M = 2 * N + 1;
  Vec z(packed_size(N));
  z.segment(0, M) = r.c;
  z.segment(M, M - 1) = p.c.tail(M - 1);
  z[2 * M - 1] = omega;
  z.segment(2 * M, M) = t.c;
  z.segment(3 * M, 2) = y0;
  z[3 * M + 2] = t0;
  return z;
}

FourierCurve FourierCurve::unpack(int N, const Vec& z) {
  if (z.size() < packed_size(N)) throw InvalidArgument("packed curve is too short");
  const int M = 2 * N + 1;
  FourierCurve c(N);
  c.r.c = z.segment(0, M);
  c.p.c[0] = 0.0;
  c.p.c.tail(M - 1) = z.segment(M, M - 1);
  c.omega = z[2 * M - 1];
  c.t.c = z.segment(2 * M, M);
  c.y0 = z.segment(3 * M, 2);
  c.t0 = z[3 * M + 2];
  return c;
}

Vec2 FourierCurve::point(double phi) const {
  return y0 + r(phi) * Vec2(std::cos(phi), std::sin(phi));
}

FourierCurve FourierCurve::resized(int modes) const {
  FourierCurve c(modes);
  c.r = r.resized(modes);
  c.p = p.resized(modes);
  c.t = t.resized(modes);
  c.omega = omega;
  c.y0 = y0;
  c.t0 = t0;
  return c;
}

void FourierCurve::check_parametrization() const {
  for (double phi : collocation_nodes(N)) {
    if (!(r(phi) > 0.0)) {
      std::ostringstream msg;
      msg << "radius " << r(phi) << " at phi = " << phi;
      throw ParametrizationBreakdown(msg.str());
    }
    if (!(eta_derivative(phi) > 0.0)) {
      std::ostringstream msg;
      msg << "rotation map is not monotone at phi = " << phi;
      throw ParametrizationBreakdown(msg.str());
    }
  }
}

namespace {

// the three collocation equations at angle phi
Eigen::Vector3d node_equations(const FourierCurve& c, const MapParams& p, double phi) {
  const Vec2 y = c.point(phi);
  const double tt = c.t(phi);
  const Vec2 ye = c.point(c.eta(phi));
  Eigen::Vector3d e;
  e.head<2>() = ye + flow2(p.zeta, y, 1, p.tau + tt);
  e[2] = p.epsilon - hvec(p.alpha).dot(flow2(p.zeta, y, -1, tt));
  return e;
}

}  // namespace

Vec invariant_curve_residual(const FourierCurve& c, const MapParams& p, bool check) {
  if (check) c.check_parametrization();
  const auto nodes = collocation_nodes(c.N);
  const int M = int(nodes.size());
  Vec res(3 * M + 3);
  for (int j = 0; j < M; ++j) res.segment<3>(3 * j) = node_equations(c, p, nodes[j]);
  res.tail<3>() = fixed_point_residual(c.y0, c.t0, p);
  return res;
}

Vec2 collision_closure(const FourierCurve& c, double phi_star, bool check) {
  if (check && !(c.t.second_derivative(phi_star) < 0.0)) {
    std::ostringstream msg;
    msg << "t''(phi*) = " << c.t.second_derivative(phi_star) << " at phi* = " << phi_star;
    throw NotAMaximum(msg.str());
  }
  return Vec2(c.t(phi_star), c.t.derivative(phi_star));
}

ErrorEstimate fourier_error_estimate(const FourierCurve& c, const MapParams& p) {
  ErrorEstimate e;
  e.tail_energy = std::max({c.r.tail_energy_fraction(), c.p.tail_energy_fraction(),
                            c.t.tail_energy_fraction()});
  e.tail_norm = std::sqrt(e.tail_energy);
  const auto nodes = collocation_nodes(c.N);
  const double half = M_PI / double(nodes.size());
  for (double phi : nodes) {
    e.off_node_residual =
        std::max(e.off_node_residual, node_equations(c, p, phi + half).cwiseAbs().maxCoeff());
  }
  e.value = std::max(e.tail_norm, e.off_node_residual);
  if (!std::isfinite(e.value)) e.value = std::numeric_limits<double>::infinity();
  return e;
}

// ---------------------------------------------------------------------------
// Family

int family_tau_slot(int N) { return FourierCurve::packed_size(N) + 1; }
int family_alpha_slot(int N) { return FourierCurve::packed_size(N) + 2; }

Vec FamilyPoint::pack() const {
  const int n = FourierCurve::packed_size(curve.N);
  Vec z(n + 3);
  z.head(n) = curve.pack();
  z[n] = phi_star;
  z[n + 1] = tau;
  z[n + 2] = alpha;
  return z;
}

FamilyPoint FamilyPoint::unpack(int N, const Vec& z) {
  const int n = FourierCurve::packed_size(N);
  if (z.size() != n + 3) throw InvalidArgument("packed family point has the wrong length");
  FamilyPoint fp;
  fp.curve = FourierCurve::unpack(N, z);
  fp.phi_star = z[n];
  fp.tau = z[n + 1];
  fp.alpha = z[n + 2];
  return fp;
}

ResidualProblem family_problem(int N, double zeta, double epsilon) {
  const int n = FourierCurve::packed_size(N);
  ResidualProblem prob;
  prob.n_unknowns = n + 3;
  prob.n_equations = n + 2;
  prob.parameter_slots = {n + 1, n + 2};
  prob.residual = [N, n, zeta, epsilon](const Vec& z) {
    const FamilyPoint fp = FamilyPoint::unpack(N, z);
    const MapParams p{zeta, fp.tau, fp.alpha, epsilon};
    Vec r(n + 2);
    r.head(n) = invariant_curve_residual(fp.curve, p);
    r.tail<2>() = collision_closure(fp.curve, fp.phi_star, false);
    return r;
  };
  return prob;
}

namespace {

double wrap_pi(double x) { return x - 2.0 * M_PI * std::floor((x + M_PI) / (2.0 * M_PI)); }

}  // namespace

FamilyPoint seed_family(const NSCPoint& nsc, int N, double dtau, double zeta, double epsilon) {
  if (N < 2) throw InvalidArgument("at least two Fourier modes are required");
  const double tau = nsc.tau + dtau;
  const NSAtTau ns = ns_alpha_at(zeta, epsilon, tau, nsc.alpha, nsc.y0, nsc.t0);
  const MapParams p{zeta, tau, ns.alpha, epsilon};
  const Vec2 y0 = ns.y0;

  Eigen::EigenSolver<Mat2> es(df_minus(y0, ns.t0, p));
  int i = es.eigenvalues()[0].imag() >= es.eigenvalues()[1].imag() ? 0 : 1;
  const std::complex<double> mu = es.eigenvalues()[i];
  const Eigen::Vector2cd q = es.eigenvectors().col(i);
  const double theta = std::arg(mu);
  const Vec2 qr = q.real(), qi = q.imag();
  auto ellipse = [&](double psi) { return Vec2(qr * std::cos(psi) - qi * std::sin(psi)); };

  // scale so that the ellipse touches the switching line
  const Vec2 hp = hvec(ns.alpha);
  const double gap = hp.dot(y0) - epsilon;
  const int K = 4000;
  double reach = 0.0;
  std::vector<double> psis(K + 1), angles(K + 1), radii(K + 1);
  for (int k = 0; k <= K; ++k) {
    psis[k] = 2.0 * M_PI * k / K;
    const Vec2 d = ellipse(psis[k]);
    reach = std::max(reach, -hp.dot(d));
    angles[k] = std::atan2(d[1], d[0]);
    radii[k] = d.norm();
    if (k > 0) angles[k] = angles[k - 1] + wrap_pi(angles[k] - angles[k - 1]);
  }
  if (!(reach > 0.0) || !(gap > 0.0)) {
    throw InitialPointFailed("the fixed point does not lie strictly inside D_-");
  }
  const double R = gap / reach;
  const bool increasing = angles[K] > angles[0];

  auto psi_of_angle = [&](double phi) {
    // polar angle is monotone in psi on an ellipse about its centre
    double target = increasing ? angles[0] + std::fmod(std::fmod(phi - angles[0], 2 * M_PI) + 2 * M_PI, 2 * M_PI)
                               : angles[0] - std::fmod(std::fmod(angles[0] - phi, 2 * M_PI) + 2 * M_PI, 2 * M_PI);
    int lo = 0, hi = K;
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      const bool before = increasing ? angles[mid] <= target : angles[mid] >= target;
      (before ? lo : hi) = mid;
    }
    const double w = (target - angles[lo]) / (angles[hi] - angles[lo]);
    return std::pair<double, double>(psis[lo] + w * (psis[hi] - psis[lo]),
                                     R * (radii[lo] + w * (radii[hi] - radii[lo])));
  };

  const auto nodes = collocation_nodes(N);
  const int M = int(nodes.size());
  Vec rv(M), ev(M), tv(M);
  for (int j = 0; j < M; ++j) {
    const auto [psi, rad] = psi_of_angle(nodes[j]);
    rv[j] = rad;
    const Vec2 d = ellipse(psi + theta);
    ev[j] = std::atan2(d[1], d[0]);
    if (j > 0) ev[j] = ev[j - 1] + wrap_pi(ev[j] - ev[j - 1]);
    const Vec2 y = y0 + rad * Vec2(std::cos(nodes[j]), std::sin(nodes[j]));
    tv[j] = minus_crossing_time(zeta, y, ns.alpha, epsilon);
  }
  Vec dd(M);
  for (int j = 0; j < M; ++j) dd[j] = ev[j] - nodes[j];
  const double omega = wrap_pi(dd.mean());
  Vec pv(M);
  for (int j = 0; j < M; ++j) pv[j] = wrap_pi(dd[j] - omega);

  FamilyPoint fp;
  fp.curve = FourierCurve(N);
  fp.curve.r = FourierSeries::fit(rv);
  const FourierSeries pc = FourierSeries::fit(pv);
  fp.curve.p = pc;
  fp.curve.p.c[0] = 0.0;
  fp.curve.omega = omega + pc.c[0];
  fp.curve.t = FourierSeries::fit(tv);
  fp.curve.y0 = y0;
  fp.curve.t0 = ns.t0;
  int jmax = 0;
  tv.maxCoeff(&jmax);
  fp.phi_star = nodes[jmax];
  fp.tau = tau;
  fp.alpha = ns.alpha;

  const ResidualProblem fixed_tau = fix_slot(family_problem(N, zeta, epsilon), family_tau_slot(N), tau);
  NewtonResult res;
  try {
    res = newton(fixed_tau, remove_slot(fp.pack(), family_tau_slot(N)), {1e-11, 30});
  } catch (const Error& e) {
    throw InitialPointFailed(std::string("seed correction failed: ") + e.what());
  }
  fp = FamilyPoint::unpack(N, insert_slot(res.z, family_tau_slot(N), tau));
  collision_closure(fp.curve, fp.phi_star, true);
  return fp;
}

double invariance_error(const FamilyPoint& fp, double zeta, double epsilon, int samples) {
  oscillator::Params op{zeta, fp.tau, epsilon, fp.alpha};
  CollisionContext::Options copts;
  copts.radius = 10.0;
  copts.delta = 0.5 * fp.tau;
  copts.require_transversality = false;
  const CollisionContext ctx = oscillator::make_context(op, copts);
  const FourierCurve& c = fp.curve;
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double phi = 2.0 * M_PI * (k + 0.5) / samples;
    const Vec image = ctx.map_F_branch(c.point(phi), MapBranch::Minus);
    const Vec2 d = Vec2(image[0], image[1]) - c.y0;
    const double psi = std::atan2(d[1], d[0]);
    worst = std::max(worst, std::abs(d.norm() - c.r(psi)));
  }
  return worst;
}

namespace {

double dense_t_max(const FourierCurve& c, int n = 1024) {
  double m = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) m = std::max(m, c.t(2.0 * M_PI * k / n));
  return m;
}

}  // namespace

FamilyBranch continue_colliding_family(const FamilyPoint& seed, const NSCPoint& nsc, double zeta,
                                       double epsilon, const FamilyOptions& opts) {
  const int N = seed.curve.N;
  const ResidualProblem prob = family_problem(N, zeta, epsilon);
  FamilyBranch out;

  ContinueOptions co;
  co.step = opts.step;
  co.direction_slot = family_tau_slot(N);
  co.direction = seed.tau >= nsc.tau ? 1 : -1;
  co.bounds = {{family_tau_slot(N), -std::numeric_limits<double>::infinity(), opts.tau_max}};
  co.error_limit = opts.error_limit;
  co.error_estimate = [N, zeta, epsilon](const Vec& z) {
    const FamilyPoint fp = FamilyPoint::unpack(N, z);
    return fourier_error_estimate(fp.curve, {zeta, fp.tau, fp.alpha, epsilon}).value;
  };

  double alpha_ns = nsc.alpha;
  Vec2 ns_y0 = nsc.y0;
  double ns_t0 = nsc.t0;
  auto make_record = [&](const Vec& z, bool with_invariance) {
    FamilyRecord rec;
    rec.point = FamilyPoint::unpack(N, z);
    const FourierCurve& c = rec.point.curve;
    rec.mean_radius = c.r.c[0];
    rec.error = fourier_error_estimate(c, {zeta, rec.point.tau, rec.point.alpha, epsilon});
    rec.t_max = dense_t_max(c);
    if (with_invariance) {
      rec.invariance = invariance_error(rec.point, zeta, epsilon, opts.invariance_samples);
    }
    const NSAtTau ns = ns_alpha_at(zeta, epsilon, rec.point.tau, alpha_ns, ns_y0, ns_t0);
    alpha_ns = ns.alpha;
    ns_y0 = ns.y0;
    ns_t0 = ns.t0;
    rec.alpha_ns = ns.alpha;
    return rec;
  };

  co.on_point = [&](const BranchPoint& bp) {
    const bool inv = opts.invariance_every > 0 &&
                     int(out.records.size()) % opts.invariance_every == 0;
    out.records.push_back(make_record(bp.z, inv));
    return true;
  };

  out.branch = continue_branch(prob, seed.pack(), co);
  if (out.branch.terminal) {
    try {
      out.terminal = make_record(out.branch.terminal->z, true);
    } catch (const Error&) {
    }
  }
  return out;
}

FamilyPoint family_at_tau(const FamilyPoint& seed, double zeta, double epsilon, double tau,
                          const FamilyOptions& opts) {
  const int N = seed.curve.N;
  const int slot = family_tau_slot(N);
  Vec nearest = seed.pack();
  if (seed.tau < tau) {
    ContinueOptions co;
    co.step = opts.step;
    co.direction_slot = slot;
    co.direction = 1;
    co.on_point = [&](const BranchPoint& bp) {
      if (std::abs(bp.z[slot] - tau) < std::abs(nearest[slot] - tau)) nearest = bp.z;
      return bp.z[slot] < tau;
    };
    const Branch b = continue_branch(family_problem(N, zeta, epsilon), seed.pack(), co);
    if (b.reason != Termination::Stopped) {
      throw NoConvergence(std::string("family ended before tau: ") + b.message);
    }
  }
  const ResidualProblem fixed = fix_slot(family_problem(N, zeta, epsilon), slot, tau);
  const NewtonResult r = newton(fixed, remove_slot(nearest, slot), {1e-11, 30});
  return FamilyPoint::unpack(N, insert_slot(r.z, slot, tau));
}

}  // namespace relaycoll::continuation
