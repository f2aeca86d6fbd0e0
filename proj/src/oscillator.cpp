#include "relaycoll/oscillator.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "relaycoll/roots.hpp"

namespace relaycoll::oscillator {

void Params::validate() const {
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!(alpha >= -M_PI / 2 && alpha <= M_PI / 2)) {
    throw InvalidArgument("alpha must lie in [-pi/2, pi/2]");
  }
}

SwitchingFunction switching_function(double alpha) {
  return SwitchingFunction::linear(Vec2(std::cos(alpha), std::sin(alpha)));
}

RelaySystem relay_system(const Params& p) {
  p.validate();
  auto flow = std::make_shared<AffineOscillatorFlow>(p.zeta);
  RelaySystem sys;
  sys.flow = flow;
  sys.h = switching_function(p.alpha);
  sys.tau = p.tau;
  sys.epsilon = p.epsilon;
  sys.lipschitz_f = flow->generator().operatorNorm();
  sys.lipschitz_h = 1.0;
  return sys;
}

double collision_condition_number(double zeta, double tau) {
  const Mat2 M = Mat2::Identity() + flow_matrix(zeta, tau);
  Eigen::JacobiSVD<Mat2> svd(M);
  const auto& s = svd.singularValues();
  // measured against the unit scale of the identity term, so that a matrix
  // shrinking to zero counts as singular
  return s[1] == 0.0 ? std::numeric_limits<double>::infinity() : std::max(1.0, s[0]) / s[1];
}

Vec2 collision_point(double zeta, double tau, double max_condition) {
  const double cond = collision_condition_number(zeta, tau);
  if (!(cond <= max_condition)) {
    std::ostringstream msg;
    msg << "I + A(tau) is singular at tau = " << tau << " (condition number " << cond << ")";
    throw SingularSurface(msg.str());
  }
  const Mat2 M = Mat2::Identity() + flow_matrix(zeta, tau);
  return -M.partialPivLu().solve(flow_offset(zeta, tau));
}

double collision_epsilon_signed(double zeta, double tau, double alpha) {
  if (std::abs(tau - M_PI) <= 1e-12) {
    throw SingularSurface("the sign rule of the collision surface jumps at tau = pi");
  }
  const Vec2 y = collision_point(zeta, tau);
  const double hv = std::cos(alpha) * y[0] + std::sin(alpha) * y[1];
  return tau > M_PI ? hv : -hv;
}

double collision_epsilon(double zeta, double tau, double alpha) {
  const double eps = collision_epsilon_signed(zeta, tau, alpha);
  if (!(eps > 0.0)) {
    std::ostringstream msg;
    msg << "(tau, alpha) = (" << tau << ", " << alpha << ") gives epsilon = " << eps;
    throw NegativeEpsilon(msg.str());
  }
  return eps;
}

double solve_alpha_on_slice(double zeta, double tau, double epsilon, double guess, double lo,
                            double hi) {
  // s |y| cos(alpha - beta) = epsilon with s = +-1
  const Vec2 y = collision_point(zeta, tau);
  const double r = y.norm();
  if (!(epsilon < r)) throw NoRootInBracket("epsilon exceeds |y*| on this tau slice");
  double beta = std::atan2(y[1], y[0]);
  if (tau < M_PI) beta += M_PI;
  const double w = std::acos(epsilon / r);
  double best = std::numeric_limits<double>::quiet_NaN();
  for (double base : {beta - w, beta + w}) {
    for (int k = -2; k <= 2; ++k) {
      const double a = base + 2.0 * M_PI * k;
      if (a < lo || a > hi) continue;
      if (std::isnan(best) || std::abs(a - guess) < std::abs(best - guess)) best = a;
    }
  }
  if (std::isnan(best)) throw NoRootInBracket("no alpha on the slice inside the range");
  return best;
}

CollisionOrbit collision_orbit(double zeta, double tau, double alpha) {
  CollisionOrbit orb;
  orb.y_star = collision_point(zeta, tau);
  orb.params = {zeta, tau, collision_epsilon(zeta, tau, alpha), alpha};
  AffineOscillatorFlow flow(zeta);
  const Vec2 h0(std::cos(alpha), std::sin(alpha));
  orb.g_minus = h0.dot(flow.field2(orb.y_star, -1));
  orb.g_plus = h0.dot(flow.field2(orb.y_star, 1));
  orb.q = orb.g_minus * orb.g_plus;
  orb.period = 2.0 * tau;
  orb.experimental = tau < M_PI;
  return orb;
}

CollisionContext make_context(const Params& p, CollisionContext::Options opts) {
  p.validate();
  auto flow = std::make_shared<AffineOscillatorFlow>(p.zeta);
  return CollisionContext(flow, switching_function(p.alpha), p.tau, p.epsilon,
                          collision_point(p.zeta, p.tau), opts);
}

Stability stability_at_collision(double zeta, double tau, double alpha) {
  const Vec2 y = collision_point(zeta, tau);
  AffineOscillatorFlow flow(zeta);
  const Vec2 f1 = flow.field2(y, -1), f2 = flow.field2(y, 1);
  const Vec2 h0(std::cos(alpha), std::sin(alpha));
  const Mat2 A = flow.matrix(tau);
  Stability s;
  s.DF_plus = -A * (Mat2::Identity() - f2 * h0.transpose() / h0.dot(f2));
  s.DF_minus = -A * (Mat2::Identity() - f2 * h0.transpose() / h0.dot(f1));
  s.lambda_plus = s.DF_plus.trace();
  Eigen::EigenSolver<Mat2> es(s.DF_minus);
  s.lambda_minus[0] = es.eigenvalues()[0];
  s.lambda_minus[1] = es.eigenvalues()[1];
  if (s.lambda_minus[0].imag() < s.lambda_minus[1].imag()) {
    std::swap(s.lambda_minus[0], s.lambda_minus[1]);
  }
  s.stable_plus = std::abs(s.lambda_plus) < 1.0;
  s.stable_minus = std::abs(s.lambda_minus[0]) < 1.0 && std::abs(s.lambda_minus[1]) < 1.0;
  s.fold_plus = s.lambda_plus - 1.0;
  s.flip_plus = s.lambda_plus + 1.0;
  s.fold_minus = (s.DF_minus - Mat2::Identity()).determinant();
  s.flip_minus = (s.DF_minus + Mat2::Identity()).determinant();
  s.ns_minus = s.DF_minus.determinant() - 1.0;
  s.trace_minus = s.DF_minus.trace();
  s.ns_admissible = std::abs(s.trace_minus) < 2.0;
  return s;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out;
  if (n <= 0) return out;
  if (n == 1) return {a};
  for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * i / (n - 1));
  return out;
}

std::vector<SurfaceSample> surface_grid(double zeta, const std::vector<double>& taus,
                                        const std::vector<double>& alphas) {
  std::vector<SurfaceSample> out;
  out.reserve(taus.size() * alphas.size());
  for (double tau : taus) {
    for (double alpha : alphas) {
      SurfaceSample s;
      s.tau = tau;
      s.alpha = alpha;
      try {
        s.epsilon = collision_epsilon_signed(zeta, tau, alpha);
        const Vec2 y = collision_point(zeta, tau);
        AffineOscillatorFlow flow(zeta);
        const Vec2 h0(std::cos(alpha), std::sin(alpha));
        s.q = h0.dot(flow.field2(y, -1)) * h0.dot(flow.field2(y, 1));
        s.valid = std::isfinite(s.epsilon) && s.epsilon > 0.0 && s.q > 0.0;
      } catch (const SingularSurface&) {
        s.valid = false;
        s.epsilon = std::numeric_limits<double>::quiet_NaN();
      }
      out.push_back(s);
    }
  }
  return out;
}

const char* to_string(CurveKind k) {
  switch (k) {
    case CurveKind::FoldPlus: return "fold+";
    case CurveKind::FlipPlus: return "flip+";
    case CurveKind::FoldMinus: return "fold-";
    case CurveKind::FlipMinus: return "flip-";
    case CurveKind::NSMinus: return "NS-";
  }
  return "?";
}

double test_function(const Stability& s, CurveKind k) {
  switch (k) {
    case CurveKind::FoldPlus: return s.fold_plus;
    case CurveKind::FlipPlus: return s.flip_plus;
    case CurveKind::FoldMinus: return s.fold_minus;
    case CurveKind::FlipMinus: return s.flip_minus;
    case CurveKind::NSMinus: return s.ns_minus;
  }
  return 0.0;
}

namespace {

struct Node {
  bool valid = false;
  Stability st;
};

bool point_valid(double zeta, double tau, double alpha) {
  try {
    const auto orb = collision_orbit(zeta, tau, alpha);
    return orb.q > 0.0;
  } catch (const Error&) {
    return false;
  }
}

CurvePoint make_point(double zeta, double tau, double alpha, CurveKind kind) {
  const auto st = stability_at_collision(zeta, tau, alpha);
  CurvePoint p;
  p.tau = tau;
  p.alpha = alpha;
  p.epsilon = collision_epsilon_signed(zeta, tau, alpha);
  p.residual = test_function(st, kind);
  p.trace = (kind == CurveKind::FoldPlus || kind == CurveKind::FlipPlus) ? st.lambda_plus
                                                                        : st.trace_minus;
  return p;
}

// 2D Newton in (tau, alpha) with forward-difference Jacobian
template <class G>
std::optional<Vec2> newton2(G g, Vec2 x, double tol = 1e-12, int max_iter = 40) {
  for (int it = 0; it < max_iter; ++it) {
    const Vec2 r = g(x);
    if (!r.allFinite()) return std::nullopt;
    if (r.norm() < tol) return x;
    Mat2 J;
    for (int j = 0; j < 2; ++j) {
      Vec2 xp = x;
      const double h = 1e-7 * std::max(1.0, std::abs(x[j]));
      xp[j] += h;
      J.col(j) = (g(xp) - r) / h;
    }
    const Vec2 dx = J.fullPivLu().solve(-r);
    if (!dx.allFinite()) return std::nullopt;
    x += dx;
    if (dx.norm() > 1.0) return std::nullopt;
  }
  return std::nullopt;
}

using EdgeKey = std::array<int, 3>;  // {orientation 0 = along tau, 1 = along alpha, i, j}

}  // namespace

BifurcationMap bifurcation_map(double zeta, const std::vector<double>& taus,
                               const std::vector<double>& alphas) {
  BifurcationMap map;
  map.zeta = zeta;
  map.taus = taus;
  map.alphas = alphas;
  const int nt = static_cast<int>(taus.size()), na = static_cast<int>(alphas.size());
  if (nt < 2 || na < 2) return map;

  std::vector<Node> nodes(static_cast<std::size_t>(nt) * na);
  auto at = [&](int i, int j) -> Node& { return nodes[static_cast<std::size_t>(i) * na + j]; };
  for (int i = 0; i < nt; ++i) {
    for (int j = 0; j < na; ++j) {
      Node& n = at(i, j);
      n.valid = point_valid(zeta, taus[i], alphas[j]);
      if (n.valid) n.st = stability_at_collision(zeta, taus[i], alphas[j]);
    }
  }

  const CurveKind kinds[] = {CurveKind::FoldPlus, CurveKind::FlipPlus, CurveKind::FoldMinus,
                             CurveKind::FlipMinus, CurveKind::NSMinus};
  for (CurveKind kind : kinds) {
    std::map<EdgeKey, CurvePoint> hits;
    auto try_edge = [&](int o, int i, int j) {
      const int i2 = o == 0 ? i + 1 : i, j2 = o == 0 ? j : j + 1;
      const Node& a = at(i, j);
      const Node& b = at(i2, j2);
      if (!a.valid || !b.valid) return;
      const double va = test_function(a.st, kind), vb = test_function(b.st, kind);
      if (!((va < 0.0) != (vb < 0.0))) return;
      auto param = [&](double s) {
        return Vec2(taus[i] + s * (taus[i2] - taus[i]), alphas[j] + s * (alphas[j2] - alphas[j]));
      };
      auto fn = [&](double s) {
        const Vec2 p = param(s);
        return test_function(stability_at_collision(zeta, p[0], p[1]), kind);
      };
      const auto r = roots::refine_bracket(fn, 0.0, 1.0, va, vb, 1e-13);
      const Vec2 p = param(r.x);
      if (!point_valid(zeta, p[0], p[1])) return;
      CurvePoint cp = make_point(zeta, p[0], p[1], kind);
      // sign changes through a pole of the test function (g -> 0) are not roots
      if (!(std::abs(cp.residual) < 1e-8)) return;
      if (kind == CurveKind::NSMinus && !(std::abs(cp.trace) < 2.0)) return;
      hits.emplace(EdgeKey{o, i, j}, cp);
    };
    for (int i = 0; i < nt; ++i) {
      for (int j = 0; j < na; ++j) {
        if (i + 1 < nt) try_edge(0, i, j);
        if (j + 1 < na) try_edge(1, i, j);
      }
    }
    // marching squares: connect crossing edges inside each cell
    std::map<EdgeKey, std::vector<EdgeKey>> adj;
    for (int i = 0; i + 1 < nt; ++i) {
      for (int j = 0; j + 1 < na; ++j) {
        const EdgeKey cell_edges[4] = {{0, i, j}, {1, i + 1, j}, {0, i, j + 1}, {1, i, j}};
        std::vector<EdgeKey> present;
        for (const auto& e : cell_edges) {
          if (hits.count(e)) present.push_back(e);
        }
        for (std::size_t k = 0; k + 1 < present.size(); k += 2) {
          adj[present[k]].push_back(present[k + 1]);
          adj[present[k + 1]].push_back(present[k]);
        }
      }
    }
    std::map<EdgeKey, bool> used;
    auto walk = [&](EdgeKey start) {
      LabeledCurve curve{kind, {}};
      EdgeKey cur = start;
      std::optional<EdgeKey> prev;
      while (true) {
        used[cur] = true;
        curve.points.push_back(hits.at(cur));
        std::optional<EdgeKey> next;
        for (const auto& nb : adj[cur]) {
          if (!used[nb] && (!prev || nb != *prev)) {
            next = nb;
            break;
          }
        }
        if (!next) break;
        prev = cur;
        cur = *next;
      }
      map.curves.push_back(std::move(curve));
    };
    for (const auto& [key, pt] : hits) {
      if (!used[key] && adj[key].size() <= 1) walk(key);
    }
    for (const auto& [key, pt] : hits) {
      if (!used[key]) walk(key);
    }
  }

  // strong resonances along NS curves: det = 1 and trace = 2 cos(2 pi / q)
  const std::pair<const char*, double> resonances[] = {
      {"R2", M_PI}, {"R3", 2.0 * M_PI / 3.0}, {"R4", M_PI / 2.0}};
  for (const auto& curve : map.curves) {
    if (curve.kind != CurveKind::NSMinus) continue;
    for (const auto& [label, angle] : resonances) {
      const double target = 2.0 * std::cos(angle);
      std::vector<Vec2> seeds;
      for (std::size_t k = 0; k + 1 < curve.points.size(); ++k) {
        const double a = curve.points[k].trace - target, b = curve.points[k + 1].trace - target;
        if ((a < 0.0) != (b < 0.0)) seeds.emplace_back(curve.points[k].tau, curve.points[k].alpha);
      }
      if (angle == M_PI) {
        for (const auto* p : {&curve.points.front(), &curve.points.back()}) {
          if (p->trace < -1.9) seeds.emplace_back(p->tau, p->alpha);
        }
      }
      for (const auto& seed : seeds) {
        auto g = [&](const Vec2& x) {
          if (!point_valid(zeta, x[0], x[1])) {
            return Vec2(std::numeric_limits<double>::quiet_NaN(), 0.0);
          }
          const auto st = stability_at_collision(zeta, x[0], x[1]);
          return Vec2(st.ns_minus, st.trace_minus - target);
        };
        const auto sol = newton2(g, seed);
        if (!sol) continue;
        const auto st = stability_at_collision(zeta, (*sol)[0], (*sol)[1]);
        const double arg = std::abs(std::arg(st.lambda_minus[0]));
        if (std::abs(arg - angle) > 1e-3) continue;
        bool dup = false;
        for (const auto& sp : map.special) {
          if (sp.label == label && std::hypot(sp.tau - (*sol)[0], sp.alpha - (*sol)[1]) < 1e-8) dup = true;
        }
        if (!dup) {
          map.special.push_back({label, (*sol)[0], (*sol)[1],
                                 collision_epsilon_signed(zeta, (*sol)[0], (*sol)[1]),
                                 g(*sol).norm()});
        }
      }
    }
  }

  // PD-SN: fold- and flip- vanish together (eigenvalues +1 and -1)
  auto segments = [&](CurveKind k) {
    std::vector<std::pair<Vec2, Vec2>> segs;
    for (const auto& c : map.curves) {
      if (c.kind != k) continue;
      for (std::size_t i = 0; i + 1 < c.points.size(); ++i) {
        segs.emplace_back(Vec2(c.points[i].tau, c.points[i].alpha),
                          Vec2(c.points[i + 1].tau, c.points[i + 1].alpha));
      }
    }
    return segs;
  };
  const auto folds = segments(CurveKind::FoldMinus);
  const auto flips = segments(CurveKind::FlipMinus);
  for (const auto& [p1, p2] : folds) {
    for (const auto& [q1, q2] : flips) {
      Mat2 M;
      M.col(0) = p2 - p1;
      M.col(1) = q1 - q2;
      if (std::abs(M.determinant()) < 1e-300) continue;
      const Vec2 st = M.fullPivLu().solve(q1 - p1);
      if (st[0] < -0.5 || st[0] > 1.5 || st[1] < -0.5 || st[1] > 1.5) continue;
      const Vec2 seed = p1 + st[0] * (p2 - p1);
      auto g = [&](const Vec2& x) {
        if (!point_valid(zeta, x[0], x[1])) {
          return Vec2(std::numeric_limits<double>::quiet_NaN(), 0.0);
        }
        const auto s = stability_at_collision(zeta, x[0], x[1]);
        return Vec2(s.fold_minus, s.flip_minus);
      };
      const auto sol = newton2(g, seed);
      if (!sol) continue;
      bool dup = false;
      for (const auto& sp : map.special) {
        if (sp.label == "PD-SN" && std::hypot(sp.tau - (*sol)[0], sp.alpha - (*sol)[1]) < 1e-8) dup = true;
      }
      if (!dup) {
        map.special.push_back({"PD-SN", (*sol)[0], (*sol)[1],
                               collision_epsilon_signed(zeta, (*sol)[0], (*sol)[1]), g(*sol).norm()});
      }
    }
  }
  return map;
}

}  // namespace relaycoll::oscillator
