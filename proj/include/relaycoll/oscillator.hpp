#pragma once

#include <complex>
#include <string>
#include <vector>

#include "relaycoll/flows.hpp"
#include "relaycoll/reduced_map.hpp"
#include "relaycoll/relay.hpp"
#include "relaycoll/types.hpp"

namespace relaycoll::oscillator {

/// Rescaled oscillator x'' + 2 zeta x' + (1 + zeta^2) x = (1 + zeta^2) u with
/// relay feedback on h(y) = x cos(alpha) + x' sin(alpha).
struct Params {
  double zeta = -0.1;
  double tau = 0.0;
  double epsilon = 0.0;
  double alpha = 0.0;

  void validate() const;
  /// Collision surface is singular at tau = pi.
  bool near_singular(double tol = 1e-6) const { return std::abs(tau - M_PI) < tol; }
};

SwitchingFunction switching_function(double alpha);
RelaySystem relay_system(const Params& p);

/// Symmetric switch point y = -[I + A(tau)]^{-1} v(tau). Throws SingularSurface
/// when cond(I + A(tau)) exceeds `max_condition`. The condition number is
/// max(1, |I + A|) |(I + A)^{-1}|.
Vec2 collision_point(double zeta, double tau, double max_condition = 1e12);
double collision_condition_number(double zeta, double tau);

/// +h(y*) for tau > pi and -h(y*) for tau < pi, without a sign check.
double collision_epsilon_signed(double zeta, double tau, double alpha);
/// As above; throws NegativeEpsilon when the point is off the physical sheet.
double collision_epsilon(double zeta, double tau, double alpha);

/// alpha in [lo, hi] with collision_epsilon(zeta, tau, alpha) = epsilon,
/// closest to `guess`. Throws NoRootInBracket.
double solve_alpha_on_slice(double zeta, double tau, double epsilon, double guess,
                            double lo = -M_PI / 2, double hi = M_PI / 2);

struct CollisionOrbit {
  Vec2 y_star;
  Params params;
  double q = 0.0;
  double g_plus = 0.0;   // h0' f2
  double g_minus = 0.0;  // h0' f1
  double period = 0.0;
  bool experimental = false;  // tau < pi
};

CollisionOrbit collision_orbit(double zeta, double tau, double alpha);

/// Reduced-map context at (tau, epsilon, alpha) centred on the collision
/// point of (zeta, tau).
CollisionContext make_context(const Params& p, CollisionContext::Options opts = {});

struct Stability {
  Mat2 DF_plus, DF_minus;
  double lambda_plus = 0.0;  // the nonzero eigenvalue of DF_+
  std::complex<double> lambda_minus[2];
  bool stable_plus = false, stable_minus = false;
  // test functions
  double fold_plus = 0.0, flip_plus = 0.0;    // lambda_+ -+ 1
  double fold_minus = 0.0, flip_minus = 0.0;  // det(DF_- -+ I)
  double ns_minus = 0.0;                      // det DF_- - 1
  double trace_minus = 0.0;
  bool ns_admissible = false;  // |trace DF_-| < 2
};

/// Linearizations of F_+ and F_- at the collision point of a surface point.
Stability stability_at_collision(double zeta, double tau, double alpha);

// ---------------------------------------------------------------------------
// Collision surface and bifurcation map

struct SurfaceSample {
  double tau = 0.0, alpha = 0.0, epsilon = 0.0, q = 0.0;
  bool valid = false;  // finite, epsilon > 0, q > 0
};

std::vector<SurfaceSample> surface_grid(double zeta, const std::vector<double>& taus,
                                        const std::vector<double>& alphas);

enum class CurveKind { FoldPlus, FlipPlus, FoldMinus, FlipMinus, NSMinus };
const char* to_string(CurveKind k);

struct CurvePoint {
  double tau = 0.0, alpha = 0.0, epsilon = 0.0;
  double residual = 0.0;  // test function at the point
  double trace = 0.0;     // trace of DF_- (DF_+ eigenvalue for the + curves)
};

struct LabeledCurve {
  CurveKind kind;
  std::vector<CurvePoint> points;  // one polyline
};

struct SpecialPoint {
  std::string label;  // "R2", "R3", "R4", "PD-SN"
  double tau = 0.0, alpha = 0.0, epsilon = 0.0;
  double residual = 0.0;
};

struct BifurcationMap {
  double zeta = 0.0;
  std::vector<double> taus, alphas;
  std::vector<LabeledCurve> curves;
  std::vector<SpecialPoint> special;
};

double test_function(const Stability& s, CurveKind k);

/// Grid-scan sign changes of the test functions along grid edges, refined by
/// bisection and chained into polylines; strong resonances on NS and PD-SN
/// points are refined by 2D Newton.
BifurcationMap bifurcation_map(double zeta, const std::vector<double>& taus,
                               const std::vector<double>& alphas);

std::vector<double> linspace(double a, double b, int n);

}  // namespace relaycoll::oscillator
