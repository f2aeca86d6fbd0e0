#include "relaycoll/relay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "relaycoll/roots.hpp"

namespace relaycoll {

// ---------------------------------------------------------------------------
// SwitchingFunction / RelaySystem

SwitchingFunction SwitchingFunction::linear(Vec normal) {
  SwitchingFunction h;
  h.value = [normal](const Vec& y) { return normal.dot(y); };
  h.gradient = [normal](const Vec&) { return normal; };
  return h;
}

Vec SwitchingFunction::gradient_checked(const Vec& y) const {
  Vec g = gradient(y);
  if (g.norm() == 0.0) throw InvalidArgument("gradient of the switching function vanishes");
  return g;
}

void RelaySystem::validate() const {
  if (!flow) throw InvalidArgument("relay system has no flow backend");
  if (!(tau > 0.0)) throw InvalidArgument("delay tau must be positive");
  if (!(epsilon > 0.0)) throw InvalidArgument("hysteresis half-width epsilon must be positive");
  if (!h.value || !h.gradient) throw InvalidArgument("switching function is incomplete");
  if (lipschitz_f && *lipschitz_f < 0.0) throw InvalidArgument("L_max must be nonnegative");
  if (lipschitz_h && *lipschitz_h < 0.0) throw InvalidArgument("H_max must be nonnegative");
}

// ---------------------------------------------------------------------------
// Path pieces

double piece_t0(const PathPiece& p) {
  return std::visit([](const auto& q) { return q.t0; }, p);
}
double piece_t1(const PathPiece& p) {
  return std::visit([](const auto& q) { return q.t1; }, p);
}

FlowPiece make_flow_piece(const FlowBackend& flow, double t0, double t1, int u, double t_ref,
                          const Vec& y_ref) {
  FlowPiece p{t0, t1, u, t_ref, y_ref, {}, {}};
  if (!flow.closed_form()) {
    const Vec y0 = flow.apply(y_ref, u, t0 - t_ref);
    std::vector<OdeStep> steps;
    const auto* numeric = dynamic_cast<const NumericFlow*>(&flow);
    const OdeOptions opts = numeric ? numeric->options() : OdeOptions{};
    integrate_dopri5([&](double, const Vec& z) { return flow.field(z, u); }, t0, y0, t1, opts,
                     &steps);
    for (auto& s : steps) {
      p.checkpoint_times.push_back(s.t);
      p.checkpoint_values.push_back(std::move(s.y));
    }
  }
  return p;
}

namespace {

Vec eval_flow_piece(const FlowBackend& flow, const FlowPiece& p, double t) {
  if (p.checkpoint_times.empty()) return flow.apply(p.y_ref, p.u, t - p.t_ref);
  auto it = std::upper_bound(p.checkpoint_times.begin(), p.checkpoint_times.end(), t);
  std::size_t k = it == p.checkpoint_times.begin()
                      ? 0
                      : static_cast<std::size_t>(it - p.checkpoint_times.begin()) - 1;
  if (k + 1 < p.checkpoint_times.size() &&
      std::abs(p.checkpoint_times[k + 1] - t) < std::abs(p.checkpoint_times[k] - t)) {
    ++k;
  }
  const double dt = t - p.checkpoint_times[k];
  if (dt == 0.0) return p.checkpoint_values[k];
  return flow.apply(p.checkpoint_values[k], p.u, dt);
}

struct SampleIndex {
  std::size_t k;
  double s;   // local coordinate in [0, 1]
  double dt;  // grid spacing
};

SampleIndex sample_index(const SampledPiece& p, double t) {
  const std::size_t n = p.values.size();
  const double dt = (p.t1 - p.t0) / double(n - 1);
  double x = (t - p.t0) / dt;
  std::size_t k = x <= 0.0 ? 0 : std::min(static_cast<std::size_t>(x), n - 2);
  return {k, x - double(k), dt};
}

Vec sample_slope(const SampledPiece& p, std::size_t k, double dt) {
  const std::size_t n = p.values.size();
  if (n == 2) return (p.values[1] - p.values[0]) / dt;
  if (k == 0) return (p.values[1] - p.values[0]) / dt;
  if (k == n - 1) return (p.values[n - 1] - p.values[n - 2]) / dt;
  return (p.values[k + 1] - p.values[k - 1]) / (2.0 * dt);
}

Vec eval_sampled(const SampledPiece& p, double t) {
  const auto [k, s, dt] = sample_index(p, t);
  const Vec& a = p.values[k];
  const Vec& b = p.values[k + 1];
  if (p.order == 1) return (1.0 - s) * a + s * b;
  const Vec ma = sample_slope(p, k, dt) * dt;
  const Vec mb = sample_slope(p, k + 1, dt) * dt;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * a + (s3 - 2 * s2 + s) * ma + (-2 * s3 + 3 * s2) * b +
         (s3 - s2) * mb;
}

Vec deriv_sampled(const SampledPiece& p, double t) {
  const auto [k, s, dt] = sample_index(p, t);
  const Vec& a = p.values[k];
  const Vec& b = p.values[k + 1];
  if (p.order == 1) return (b - a) / dt;
  const Vec ma = sample_slope(p, k, dt) * dt;
  const Vec mb = sample_slope(p, k + 1, dt) * dt;
  const double s2 = s * s;
  return ((6 * s2 - 6 * s) * a + (3 * s2 - 4 * s + 1) * ma + (-6 * s2 + 6 * s) * b +
          (3 * s2 - 2 * s) * mb) /
         dt;
}

Vec eval_piece(const FlowBackend* flow, const PathPiece& piece, double t) {
  if (const auto* fp = std::get_if<FlowPiece>(&piece)) return eval_flow_piece(*flow, *fp, t);
  return eval_sampled(std::get<SampledPiece>(piece), t);
}

Vec deriv_piece(const FlowBackend* flow, const PathPiece& piece, double t) {
  if (const auto* fp = std::get_if<FlowPiece>(&piece)) {
    return flow->field(eval_flow_piece(*flow, *fp, t), fp->u);
  }
  return deriv_sampled(std::get<SampledPiece>(piece), t);
}

constexpr double kTimeSlack = 1e-9;

}  // namespace

// ---------------------------------------------------------------------------
// HeadPath

double HeadPath::t_begin() const {
  if (pieces_.empty()) throw InvalidArgument("empty path");
  return piece_t0(pieces_.front());
}

double HeadPath::t_end() const {
  if (pieces_.empty()) throw InvalidArgument("empty path");
  return piece_t1(pieces_.back());
}

std::size_t HeadPath::locate(double t, bool right) const {
  if (pieces_.empty()) throw InvalidArgument("empty path");
  const double a = t_begin(), b = t_end();
  if (t < a - kTimeSlack || t > b + kTimeSlack) {
    std::ostringstream msg;
    msg << "time " << t << " outside path domain [" << a << ", " << b << "]";
    throw InvalidArgument(msg.str());
  }
  if (right) {
    // last piece with t0 <= t
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                               [](double x, const PathPiece& p) { return x < piece_t0(p); });
    if (it == pieces_.begin()) return 0;
    return static_cast<std::size_t>(it - pieces_.begin()) - 1;
  }
  // first piece with t1 >= t
  auto it = std::lower_bound(pieces_.begin(), pieces_.end(), t,
                             [](const PathPiece& p, double x) { return piece_t1(p) < x; });
  if (it == pieces_.end()) return pieces_.size() - 1;
  return static_cast<std::size_t>(it - pieces_.begin());
}

Vec HeadPath::value(double t) const {
  return eval_piece(flow_.get(), pieces_[locate(t, true)], t);
}

Vec HeadPath::derivative(double t, bool right) const {
  return deriv_piece(flow_.get(), pieces_[locate(t, right)], t);
}

int HeadPath::label(double t) const {
  const auto& p = pieces_[locate(t, true)];
  if (const auto* fp = std::get_if<FlowPiece>(&p)) return fp->u;
  return 0;
}

std::vector<double> HeadPath::breakpoints() const {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) out.push_back(piece_t1(pieces_[i]));
  return out;
}

void HeadPath::append(PathPiece piece) {
  if (!pieces_.empty() && std::abs(piece_t0(piece) - t_end()) > kTimeSlack) {
    throw InvalidArgument("appended piece does not start at the path end");
  }
  if (!(piece_t1(piece) > piece_t0(piece))) {
    throw InvalidArgument("path piece must have positive length");
  }
  if (std::holds_alternative<FlowPiece>(piece) && !flow_) {
    throw InvalidArgument("flow pieces need a flow backend");
  }
  pieces_.push_back(std::move(piece));
}

void HeadPath::extend(double t1, int u) {
  const double t0 = t_end();
  if (!(t1 > t0)) return;
  const Vec y0 = value(t0);
  pieces_.push_back(make_flow_piece(*flow_, t0, t1, u, t0, y0));
}

HeadPath HeadPath::restricted(double a, double b) const {
  HeadPath out(flow_);
  for (const auto& p : pieces_) {
    const double p0 = piece_t0(p), p1 = piece_t1(p);
    const double lo = std::max(a, p0), hi = std::min(b, p1);
    if (hi - lo <= 0.0) continue;
    PathPiece q = p;
    std::visit(
        [&](auto& r) {
          r.t0 = lo;
          r.t1 = hi;
        },
        q);
    if (auto* sp = std::get_if<SampledPiece>(&q)) {
      // resample on the clipped domain; the grid must stay uniform
      const std::size_t n = std::max<std::size_t>(
          2, static_cast<std::size_t>(std::ceil((hi - lo) / (p1 - p0) *
                                                double(std::get<SampledPiece>(p).values.size()))) +
                 1);
      std::vector<Vec> vals;
      for (std::size_t k = 0; k < n; ++k) {
        vals.push_back(eval_sampled(std::get<SampledPiece>(p), lo + (hi - lo) * double(k) / double(n - 1)));
      }
      sp->values = std::move(vals);
    }
    out.pieces_.push_back(std::move(q));
  }
  return out;
}

HeadPath HeadPath::shifted(double dt) const {
  HeadPath out(flow_);
  out.pieces_ = pieces_;
  for (auto& p : out.pieces_) {
    std::visit(
        [&](auto& r) {
          r.t0 += dt;
          r.t1 += dt;
        },
        p);
    if (auto* fp = std::get_if<FlowPiece>(&p)) {
      fp->t_ref += dt;
      for (auto& c : fp->checkpoint_times) c += dt;
    }
  }
  return out;
}

double HeadPath::max_breakpoint_jump() const {
  double jump = 0.0;
  for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
    const double t = piece_t1(pieces_[i]);
    const Vec left = eval_piece(flow_.get(), pieces_[i], t);
    const Vec right = eval_piece(flow_.get(), pieces_[i + 1], t);
    jump = std::max(jump, (left - right).norm());
  }
  return jump;
}

// ---------------------------------------------------------------------------
// HistorySegment

HistorySegment HistorySegment::from_breakpoints(std::shared_ptr<const FlowBackend> flow,
                                                double horizon, const Vec& anchor,
                                                const std::vector<double>& switch_times,
                                                const std::vector<int>& labels) {
  if (!(horizon > 0.0)) throw InvalidArgument("history horizon must be positive");
  if (labels.size() != switch_times.size() + 1) {
    throw InvalidArgument("need one flow label per sub-interval");
  }
  double prev = -horizon;
  for (double s : switch_times) {
    if (!(s > prev) || s > 0.0) {
      throw InvalidArgument("breakpoint times must increase strictly inside (-horizon, 0]");
    }
    prev = s;
  }
  for (int u : labels) {
    if (u != 1 && u != -1) throw InvalidArgument("flow labels must be +1 or -1");
  }
  HeadPath path(flow);
  std::vector<double> knots{-horizon};
  knots.insert(knots.end(), switch_times.begin(), switch_times.end());
  if (knots.back() < 0.0) knots.push_back(0.0);
  Vec y = anchor;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    path.append(make_flow_piece(*flow, knots[i], knots[i + 1], labels[i], knots[i], y));
    y = path.value(knots[i + 1]);
  }
  return HistorySegment(std::move(path));
}

HistorySegment HistorySegment::from_samples(std::shared_ptr<const FlowBackend> flow,
                                            double horizon, std::vector<Vec> values,
                                            int order) {
  if (!(horizon > 0.0)) throw InvalidArgument("history horizon must be positive");
  if (values.size() < 2) throw InvalidArgument("need at least two history samples");
  if (order != 1 && order != 3) throw InvalidArgument("interpolation order must be 1 or 3");
  HeadPath path(std::move(flow));
  path.append(SampledPiece{-horizon, 0.0, std::move(values), order});
  return HistorySegment(std::move(path));
}

HistorySegment HistorySegment::constant(std::shared_ptr<const FlowBackend> flow, double horizon,
                                        const Vec& y) {
  return from_samples(std::move(flow), horizon, {y, y}, 1);
}

HistorySegment HistorySegment::from_path(HeadPath path) {
  if (path.empty()) throw InvalidArgument("empty history path");
  if (std::abs(path.t_end()) > kTimeSlack || !(path.t_begin() < 0.0)) {
    throw InvalidArgument("history path must cover [-horizon, 0]");
  }
  return HistorySegment(std::move(path));
}

// ---------------------------------------------------------------------------
// Crossing scan

namespace {

struct Hit {
  double s = 0.0;
  double slope = 0.0;
  bool degenerate = false;
  bool touch = false;
};

using SideDerivative = std::function<double(double, bool)>;

/// First s in (a, b] with G(s) >= 0, given G(a) < 0. Local maxima of G that
/// come within touch_tol of zero count as (degenerate) touches.
std::optional<Hit> first_hit(const std::function<double(double)>& G, const SideDerivative& dG,
                             double a, double b, const std::vector<double>& breaks,
                             const EvolveOptions& opts) {
  if (!(b > a)) return std::nullopt;
  std::vector<double> nodes{a};
  for (double x : breaks) {
    if (x > a && x < b) nodes.push_back(x);
  }
  nodes.push_back(b);
  std::vector<double> grid{a};
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double len = nodes[i + 1] - nodes[i];
    const int m = std::max(1, static_cast<int>(std::ceil(len / opts.scan_step)));
    for (int k = 1; k < m; ++k) grid.push_back(nodes[i] + len * k / m);
    grid.push_back(nodes[i + 1]);
  }

  auto finish = [&](double s, bool at_node_end) {
    Hit h;
    h.s = s;
    h.slope = dG(s, !at_node_end);
    h.degenerate = std::abs(h.slope) < opts.tangency_tol;
    return h;
  };

  double Gl = G(a);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double l = grid[i], r = grid[i + 1];
    if (!(r > l)) continue;
    const double Gr = G(r);
    if (Gr >= 0.0) {
      if (Gr == 0.0) return finish(r, true);
      if (Gl >= 0.0) return finish(l, false);
      const auto res = roots::refine_bracket(G, l, r, Gl, Gr, opts.root_tol);
      return finish(res.x, res.x >= r);
    }
    const double dl = dG(l, true), dr = dG(r, false);
    if (dl > 0.0 && dr < 0.0) {
      // interior maximum: locate it on dG
      double lo = l, hi = r;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double m = 0.5 * (lo + hi);
        if (dG(m, true) > 0.0) {
          lo = m;
        } else {
          hi = m;
        }
      }
      const double sm = 0.5 * (lo + hi);
      const double Gm = G(sm);
      if (Gm >= 0.0) {
        if (Gm == 0.0) return Hit{sm, dG(sm, true), true, true};
        const auto res = roots::refine_bracket(G, l, sm, Gl, Gm, opts.root_tol);
        return finish(res.x, false);
      }
      if (Gm >= -opts.touch_tol) return Hit{sm, dG(sm, true), true, true};
    }
    Gl = Gr;
  }
  return std::nullopt;
}

CrossingEvent make_event(const Hit& hit, int state) {
  CrossingEvent ev;
  ev.time = hit.s;
  ev.line = state;
  ev.direction = hit.touch ? 0 : state;
  ev.degenerate = hit.degenerate;
  return ev;
}

void check_degenerate(const Hit& hit, const EvolveOptions& opts) {
  if (hit.degenerate && opts.degenerate == DegeneratePolicy::Throw) {
    std::ostringstream msg;
    msg << "signal tangent to the switching line at s=" << std::setprecision(15) << hit.s
        << " (d/dt h = " << hit.slope << ")";
    throw DegenerateCrossing(msg.str());
  }
}

int initial_state(double s0, int u0, double eps) {
  if (s0 >= eps) return -1;
  if (s0 <= -eps) return 1;
  return u0;
}

std::vector<double> breaks_in(const HeadPath& path, double a, double b) {
  std::vector<double> out;
  for (const auto& p : path.pieces()) {
    const double t1 = piece_t1(p);
    if (t1 > a && t1 < b) out.push_back(t1);
  }
  return out;
}

}  // namespace

int HysteronOutput::value_at(double s) const {
  int u = initial;
  for (const auto& ev : switches) {
    if (ev.time <= s) {
      u = -ev.line;
    } else {
      break;
    }
  }
  return u;
}

HysteronOutput hysteron(const std::function<double(double)>& signal, double a, double b,
                        int u0, double epsilon, const EvolveOptions& opts,
                        const std::function<double(double)>& derivative,
                        const std::vector<double>& breaks) {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (u0 != 1 && u0 != -1) throw InvalidArgument("relay state must be +1 or -1");
  HysteronOutput out;
  out.a = a;
  out.b = b;
  int state = initial_state(signal(a), u0, epsilon);
  out.initial = state;

  SideDerivative dsig;
  if (derivative) {
    dsig = [&](double s, bool) { return derivative(s); };
  } else {
    dsig = [&](double s, bool right) {
      const double h = 1e-7 * std::max(1.0, std::abs(s));
      return right ? (signal(s + h) - signal(s)) / h : (signal(s) - signal(s - h)) / h;
    };
  }
  double cursor = a;
  while (cursor < b) {
    auto G = [&](double s) { return double(state) * signal(s) - epsilon; };
    auto dG = [&](double s, bool right) { return double(state) * dsig(s, right); };
    const auto hit = first_hit(G, dG, cursor, b, breaks, opts);
    if (!hit) break;
    check_degenerate(*hit, opts);
    out.switches.push_back(make_event(*hit, state));
    state = -state;
    cursor = hit->s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evolution

int Trajectory::u_at(double t) const {
  int u = u_initial;
  for (const auto& [time, value] : u_path) {
    if (time <= t) {
      u = value;
    } else {
      break;
    }
  }
  return u;
}

EvolveResult evolve(const RelaySystem& sys, const HybridState& state, double T,
                    const EvolveOptions& opts) {
  sys.validate();
  if (!(T > 0.0)) throw InvalidArgument("evolution time must be positive");
  if (state.u != 1 && state.u != -1) throw InvalidArgument("relay state must be +1 or -1");
  const double tau = sys.tau, eps = sys.epsilon;
  if (state.history.horizon() < tau - kTimeSlack) {
    throw InvalidArgument("history horizon shorter than the delay");
  }
  const double horizon = state.history.horizon();

  HeadPath work(sys.flow);
  for (const auto& p : state.history.path().pieces()) work.append(p);

  auto signal = [&](double s) { return sys.h(work.value(s)); };
  auto dsignal = [&](double s, bool right) {
    const Vec y = work.value(s);
    return sys.h.gradient_checked(y).dot(work.derivative(s, right));
  };

  Trajectory traj;
  traj.system = sys;
  traj.u_initial = state.u;

  int u = initial_state(signal(-tau), state.u, eps);
  if (u != state.u) {
    traj.switches.push_back({0.0, state.u, u, std::nullopt, work.value(0.0)});
  }
  traj.u_path.emplace_back(0.0, u);

  double t = 0.0;
  double cursor = -tau;
  int relay_state = u;  // hysteron state at signal time `cursor`
  while (t < T) {
    auto G = [&](double s) { return double(u) * signal(s) - eps; };
    auto dG = [&](double s, bool right) { return double(u) * dsignal(s, right); };
    const auto hit = first_hit(G, dG, cursor, t, breaks_in(work, cursor, t), opts);
    if (hit) {
      check_degenerate(*hit, opts);
      traj.crossings.push_back(make_event(*hit, u));
      const double ts = std::max(hit->s + tau, t);
      if (ts <= T) {
        work.extend(ts, u);
        t = ts;
        traj.switches.push_back({t, u, -u, hit->s, work.value(t)});
        u = -u;
        traj.u_path.emplace_back(t, u);
        cursor = hit->s;
        relay_state = u;
        continue;
      }
      work.extend(T, u);
      t = T;
      cursor = hit->s;
      relay_state = -u;
      break;
    }
    const double t_next = std::min(t + tau, T);
    work.extend(t_next, u);
    cursor = t;
    t = t_next;
    relay_state = u;
  }

  // crossings whose switches fall after T
  while (cursor < T) {
    const int st = relay_state;
    auto G = [&](double s) { return double(st) * signal(s) - eps; };
    auto dG = [&](double s, bool right) { return double(st) * dsignal(s, right); };
    const auto hit = first_hit(G, dG, cursor, T, breaks_in(work, cursor, T), opts);
    if (!hit) break;
    check_degenerate(*hit, opts);
    traj.crossings.push_back(make_event(*hit, st));
    relay_state = -st;
    cursor = hit->s;
  }

  traj.path = work;
  traj.t_final = T;

  EvolveResult result{HybridState{HistorySegment::from_path(
                                      work.restricted(T - horizon, T).shifted(-T)),
                                  u},
                      std::move(traj)};
  return result;
}

std::vector<CrossingEvent> crossing_times(const Trajectory& traj, const EvolveOptions& opts) {
  const auto& sys = traj.system;
  const auto& path = traj.path;
  auto signal = [&](double s) { return sys.h(path.value(s)); };
  // central derivative is enough here; breaks keep corners out of the stencil
  const auto bp = path.breakpoints();
  auto deriv = [&](double s) {
    const Vec y = path.value(s);
    return sys.h.gradient_checked(y).dot(path.derivative(s, true));
  };
  auto out = hysteron(signal, -sys.tau, traj.t_final, traj.u_initial, sys.epsilon, opts, deriv,
                      bp);
  return out.switches;
}

std::vector<TransversalityCheck> check_weak_transversality(const Trajectory& traj,
                                                           double window, int samples) {
  if (!(window > 0.0)) throw InvalidArgument("window must be positive");
  const auto& cr = traj.crossings;
  std::vector<TransversalityCheck> out;
  for (std::size_t k = 0; k < cr.size(); ++k) {
    const double tc = cr[k].time;
    if (tc - window < traj.path.t_begin() || tc + window > traj.path.t_end()) {
      throw WindowTooLarge("window around crossing leaves the trajectory");
    }
    if ((k + 1 < cr.size() && cr[k + 1].time - tc < 2.0 * window) ||
        (k > 0 && tc - cr[k - 1].time < 2.0 * window)) {
      throw WindowTooLarge("window overlaps an adjacent crossing");
    }
    double margin = std::numeric_limits<double>::infinity();
    double prev = std::abs(traj.system.h(traj.path.value(tc - window)));
    for (int i = 1; i <= samples; ++i) {
      const double s = tc - window + 2.0 * window * i / samples;
      const double cur = std::abs(traj.system.h(traj.path.value(s)));
      margin = std::min(margin, cur - prev);
      prev = cur;
    }
    out.push_back({tc, margin > 0.0, margin});
  }
  return out;
}

StrictTransversality strict_transversality_q(const RelaySystem& sys, const Vec& y,
                                             double zero_tol) {
  const Vec g = sys.h.gradient_checked(y);
  StrictTransversality st;
  st.normal_speed_minus = g.dot(sys.flow->field(y, -1));
  st.normal_speed_plus = g.dot(sys.flow->field(y, 1));
  st.q = st.normal_speed_minus * st.normal_speed_plus;
  if (std::abs(st.q) <= zero_tol) {
    st.type = CornerType::Degenerate;
  } else {
    st.type = st.q > 0.0 ? CornerType::StrictlyTransversal : CornerType::OneSided;
  }
  return st;
}

SwitchBoundReport switch_bound_report(const Trajectory& traj, double t0, double tE,
                                      int samples_per_unit) {
  const auto& sys = traj.system;
  if (!sys.lipschitz_f || !sys.lipschitz_h) {
    throw InvalidArgument("switch bound needs L_max and H_max on the relay system");
  }
  if (t0 < sys.tau - kTimeSlack) throw InvalidArgument("switch bound requires t0 >= tau");
  if (!(tE > t0) || tE > traj.t_final + kTimeSlack) {
    throw InvalidArgument("bound interval must lie inside the trajectory");
  }
  SwitchBoundReport rep;
  const int n = std::max(2, static_cast<int>((tE - t0) * samples_per_unit));
  for (int i = 0; i <= n; ++i) {
    rep.y_max = std::max(rep.y_max, traj.path.value(t0 + (tE - t0) * i / n).norm());
  }
  std::vector<double> times;
  for (const auto& sw : traj.switches) {
    if (sw.time >= t0 && sw.time <= tE) {
      times.push_back(sw.time);
      rep.y_max = std::max(rep.y_max, sw.point.norm());
    }
  }
  rep.observed_switches = static_cast<int>(times.size());
  const double L = *sys.lipschitz_f, H = *sys.lipschitz_h;
  rep.bound = 1.0 + (tE - t0) * L * H * rep.y_max / (2.0 * sys.epsilon);
  rep.gap_bound = 2.0 * sys.epsilon / (H * L * rep.y_max);
  rep.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < times.size(); ++i) {
    rep.min_gap = std::min(rep.min_gap, times[i] - times[i - 1]);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Export

void write_trajectory_csv(const Trajectory& traj, const std::string& path, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("sampling step must be positive");
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  const int n = traj.system.dim();
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",y_" << i;
  out << ",u\n";
  std::vector<double> times;
  const auto steps = static_cast<long>(std::floor(traj.t_final / dt + 1e-9));
  for (long k = 0; k <= steps; ++k) times.push_back(double(k) * dt);
  if (times.back() < traj.t_final) times.push_back(traj.t_final);
  for (const auto& sw : traj.switches) times.push_back(sw.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  out << std::setprecision(17);
  for (double t : times) {
    const Vec y = traj.path.value(t);
    out << t;
    for (int i = 0; i < n; ++i) out << ',' << y[i];
    out << ',' << traj.u_at(t) << '\n';
  }
}

void write_events_json(const Trajectory& traj, const std::string& path) {
  nlohmann::ordered_json j;
  j["crossings"] = nlohmann::ordered_json::array();
  for (const auto& c : traj.crossings) {
    j["crossings"].push_back(
        {{"time", c.time}, {"line", c.line}, {"direction", c.direction}, {"degenerate", c.degenerate}});
  }
  j["switches"] = nlohmann::ordered_json::array();
  for (const auto& s : traj.switches) {
    j["switches"].push_back({{"time", s.time},
                             {"line", s.crossing_time ? s.from : 0},
                             {"direction", s.to},
                             {"x", std::vector<double>(s.point.data(), s.point.data() + s.point.size())}});
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

TrajectoryTable read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  const auto ncols = std::count(line.begin(), line.end(), ',') + 1;
  if (ncols < 3 || line.rfind("t,", 0) != 0) throw FormatError(path + ": bad header");
  TrajectoryTable tab;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError(path + ":" + std::to_string(lineno) + ": not a number: " + cell);
      }
    }
    if (static_cast<long>(vals.size()) != ncols) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": wrong column count");
    }
    tab.t.push_back(vals.front());
    tab.y.push_back(Eigen::Map<Vec>(vals.data() + 1, ncols - 2));
    tab.u.push_back(static_cast<int>(vals.back()));
  }
  return tab;
}

EventSidecar read_events_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  EventSidecar out;
  for (const auto& c : j.at("crossings")) {
    out.crossings.push_back({c.at("time").get<double>(), c.at("line").get<int>(),
                             c.at("direction").get<int>()});
  }
  for (const auto& s : j.at("switches")) {
    out.switches.push_back({s.at("time").get<double>(), s.at("line").get<int>(),
                            s.at("direction").get<int>()});
  }
  return out;
}

}  // namespace relaycoll
