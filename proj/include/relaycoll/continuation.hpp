#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "relaycoll/types.hpp"

namespace relaycoll::continuation {

// ---------------------------------------------------------------------------
// Generic solvers

struct ResidualProblem {
  int n_unknowns = 0;
  int n_equations = 0;
  std::function<Vec(const Vec&)> residual;
  /// Optional analytic Jacobian; forward differences otherwise.
  std::function<Mat(const Vec&)> jacobian;
  /// Indices of unknowns that are continuation parameters (informational).
  std::vector<int> parameter_slots;
  double fd_step = 1e-7;

  Vec eval(const Vec& z) const;
  Mat jacobian_at(const Vec& z, const Vec* r0 = nullptr) const;
};

/// The same problem with unknown `slot` frozen at `value`.
ResidualProblem fix_slot(const ResidualProblem& p, int slot, double value);
Vec insert_slot(const Vec& reduced, int slot, double value);
Vec remove_slot(const Vec& full, int slot);

struct NewtonOptions {
  double tol = 1e-10;  // max-norm of the residual
  int max_iter = 30;
  double rank_tol = 1e-13;  // relative pivot threshold for SingularJacobian
};

struct NewtonResult {
  Vec z;
  double residual_norm = 0.0;
  int iterations = 0;
};

/// Full-step Newton with a rank-revealing QR solve (least squares for
/// overdetermined systems). Throws NoConvergence or SingularJacobian.
NewtonResult newton(const ResidualProblem& p, Vec z0, const NewtonOptions& opts = {});

struct StepPolicy {
  double h_initial = 1e-2;
  double h_min = 1e-6;
  double h_max = 1e-1;
  int max_points = 500;
  int newton_max_iter = 8;
  double newton_tol = 1e-10;
  int easy_iterations = 3;  // converged in <= this many: double the step
};

enum class Termination { MaxPoints, ParameterBound, StepTooSmall, BreakupDetected, Stopped };
const char* to_string(Termination t);

struct BranchPoint {
  Vec z;
  double step = 0.0;
  double residual_norm = 0.0;
  double error_estimate = 0.0;
  int newton_iterations = 0;
};

struct Branch {
  std::vector<BranchPoint> points;
  Termination reason = Termination::MaxPoints;
  std::string message;
  /// Converged point that triggered termination (error estimate or bound).
  std::optional<BranchPoint> terminal;
};

struct ContinueOptions {
  StepPolicy step;
  /// Unknown index whose initial tangent component must have the sign of `direction`.
  int direction_slot = -1;
  int direction = 1;
  /// Box bounds on unknowns: (slot, lo, hi).
  std::vector<std::tuple<int, double, double>> bounds;
  /// Error estimate per converged point; exceeding `error_limit` stops the branch.
  std::function<double(const Vec&)> error_estimate;
  double error_limit = 1e-2;
  /// Called for every accepted point; return false to stop.
  std::function<bool(const BranchPoint&)> on_point;
};

/// Pseudo-arclength continuation of the 1-dimensional solution set of a
/// problem with n_equations = n_unknowns - 1. Throws InitialPointFailed when
/// z0 cannot be corrected onto the branch.
Branch continue_branch(const ResidualProblem& p, const Vec& z0, const ContinueOptions& opts);

// ---------------------------------------------------------------------------
// Fixed points and Neimark-Sacker points of F_- for the oscillator

struct MapParams {
  double zeta = -0.1;
  double tau = 0.0;
  double alpha = 0.0;
  double epsilon = 0.1;
};

enum class Param { Tau, Alpha, Epsilon };

/// (y0 + Y_+^{tau + t0} y0, epsilon - h(Y_-^{t0} y0)).
Vec fixed_point_residual(const Vec2& y0, double t0, const MapParams& p);
/// DF_- at y0 with the crossing time t0 taken as given.
Mat2 df_minus(const Vec2& y0, double t0, const MapParams& p);

struct NSResidual {
  Vec value;  // fixed-point residual (3) and det DF_- - 1
  double trace = 0.0;
  bool admissible = false;  // |trace| < 2
};
NSResidual ns_residual(const Vec2& y0, double t0, const MapParams& p);

/// Unknowns (y0, t0, free parameters in order); 3 equations.
ResidualProblem fixed_point_problem(const MapParams& p, const std::vector<Param>& free);
/// Unknowns (y0, t0, free parameters in order); 4 equations.
ResidualProblem ns_problem(const MapParams& p, const std::vector<Param>& free);

struct NSCPoint {
  double tau = 0.0, alpha = 0.0;
  Vec2 y0;
  double t0 = 0.0;
  double residual_norm = 0.0;
};

/// Neimark-Sacker-collision point: NS of F_- with t0 = 0 at fixed epsilon.
NSCPoint solve_nsc(double zeta, double epsilon, double tau_guess, double alpha_guess);

/// alpha on the NS curve at fixed tau (warm start from y0, t0, alpha).
struct NSAtTau {
  double alpha;
  Vec2 y0;
  double t0;
};
NSAtTau ns_alpha_at(double zeta, double epsilon, double tau, double alpha_guess, const Vec2& y0,
                    double t0);

// ---------------------------------------------------------------------------
// Fourier representation of invariant curves

/// Real trigonometric polynomial c0 + sum_k a_k cos(k phi) + b_k sin(k phi);
/// coefficients stored as [c0, a_1..a_N, b_1..b_N].
struct FourierSeries {
  int N = 0;
  Vec c;

  FourierSeries() = default;
  explicit FourierSeries(int modes) : N(modes), c(Vec::Zero(2 * modes + 1)) {}

  double operator()(double phi) const;
  double derivative(double phi) const;
  double second_derivative(double phi) const;
  /// Interpolant through values at the 2N+1 nodes 2 pi j / (2N+1).
  static FourierSeries fit(const Vec& node_values);
  FourierSeries resized(int modes) const;
  /// Energy of modes k > 3N/4 over the energy of all modes k >= 1.
  double tail_energy_fraction() const;
};

std::vector<double> collocation_nodes(int N);

/// y(phi) = y0 + r(phi)(cos phi, sin phi), eta(phi) = phi + omega + p(phi) with
/// p of zero mean, and crossing times t(phi).
struct FourierCurve {
  int N = 0;
  FourierSeries r, p, t;
  double omega = 0.0;
  Vec2 y0 = Vec2::Zero();
  double t0 = 0.0;

  explicit FourierCurve(int modes = 32);
  static int packed_size(int N) { return 6 * N + 6; }
  Vec pack() const;
  static FourierCurve unpack(int N, const Vec& z);

  double eta(double phi) const { return phi + omega + p(phi); }
  double eta_derivative(double phi) const { return 1.0 + p.derivative(phi); }
  Vec2 point(double phi) const;
  FourierCurve resized(int modes) const;
  /// Throws ParametrizationBreakdown when r <= 0 or eta' <= 0 at a node.
  void check_parametrization() const;
};

/// Collocation residual at the 2N+1 nodes (3 per node: invariance in R^2 and
/// the crossing-time equation), followed by the fixed-point residual of
/// (y0, t0). Length 6N + 6.
Vec invariant_curve_residual(const FourierCurve& curve, const MapParams& p,
                             bool check_parametrization = true);

/// (t(phi*), t'(phi*)). Throws NotAMaximum when t''(phi*) >= 0 and `check`.
Vec2 collision_closure(const FourierCurve& curve, double phi_star, bool check = true);

struct ErrorEstimate {
  double tail_norm = 0.0;    // sqrt of the largest tail energy fraction of r, p, t
  double tail_energy = 0.0;  // largest tail energy fraction
  double off_node_residual = 0.0;
  double value = 0.0;        // max(tail_norm, off_node_residual)
};
ErrorEstimate fourier_error_estimate(const FourierCurve& curve, const MapParams& p);

// ---------------------------------------------------------------------------
// Family of invariant curves touching the switching line

struct FamilyPoint {
  FourierCurve curve;
  double phi_star = 0.0;
  double tau = 0.0, alpha = 0.0;

  Vec pack() const;
  static FamilyPoint unpack(int N, const Vec& z);
};

/// Unknowns (curve, phi*, tau, alpha): 6N + 9; equations 6N + 8.
ResidualProblem family_problem(int N, double zeta, double epsilon);
int family_tau_slot(int N);
int family_alpha_slot(int N);

/// Seed at tau_NSC + dtau: alpha from the NS curve, an ellipse from the
/// complex eigenvector of DF_- scaled to touch the line, and crossing times
/// from the map; then Newton on the family system with tau frozen.
FamilyPoint seed_family(const NSCPoint& nsc, int N, double dtau, double zeta, double epsilon);

/// Distance of F_-(samples) from the curve, measured radially about y0.
double invariance_error(const FamilyPoint& fp, double zeta, double epsilon, int samples = 64);

struct FamilyRecord {
  FamilyPoint point;
  double mean_radius = 0.0;
  ErrorEstimate error;
  std::optional<double> invariance;  // every `invariance_every` points
  double alpha_ns = 0.0;             // NS curve alpha at the same tau
  double t_max = 0.0;                // max of t over a dense grid
};

struct FamilyOptions {
  StepPolicy step{1e-3, 1e-7, 2e-2, 2000, 8, 1e-10, 3};
  double tau_max = 2.0 * M_PI;
  double error_limit = 1e-2;
  int invariance_every = 5;
  int invariance_samples = 64;
};

struct FamilyBranch {
  std::vector<FamilyRecord> records;
  Branch branch;
  std::optional<FamilyRecord> terminal;  // the point that ended the branch
};

FamilyBranch continue_colliding_family(const FamilyPoint& seed, const NSCPoint& nsc, double zeta,
                                       double epsilon, const FamilyOptions& opts = {});

/// Family member at a given tau, continued from the seed.
FamilyPoint family_at_tau(const FamilyPoint& seed, double zeta, double epsilon, double tau,
                          const FamilyOptions& opts = {});

}  // namespace relaycoll::continuation
