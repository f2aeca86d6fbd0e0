#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "relaycoll/flows.hpp"
#include "relaycoll/types.hpp"

namespace relaycoll {

/// Scalar switching function h with its gradient.
struct SwitchingFunction {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;

  static SwitchingFunction linear(Vec normal);

  double operator()(const Vec& y) const { return value(y); }
  /// Gradient at y; throws InvalidArgument if it vanishes.
  Vec gradient_checked(const Vec& y) const;
};

/// y' = f(y, u) with u switched by a delayed relay with hysteresis:
/// u(t) = -1 once h(y(t - tau)) >= epsilon, +1 once h(y(t - tau)) <= -epsilon,
/// and u holds its value while the delayed signal is inside (-epsilon, epsilon).
struct RelaySystem {
  std::shared_ptr<const FlowBackend> flow;
  SwitchingFunction h;
  double tau = 0.0;
  double epsilon = 0.0;
  std::optional<double> lipschitz_f;  // L_max
  std::optional<double> lipschitz_h;  // H_max

  int dim() const { return flow->dim(); }
  /// Throws InvalidArgument when tau <= 0, epsilon <= 0 or the flow is missing.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Headpoint paths

/// Segment following the flow Y_u: y(t) = Y_u^{t - t_ref} y_ref on [t0, t1].
/// For flows without closed form, `checkpoints` hold integrated states so
/// evaluation only integrates from the nearest checkpoint.
struct FlowPiece {
  double t0 = 0.0, t1 = 0.0;
  int u = 1;
  double t_ref = 0.0;
  Vec y_ref;
  std::vector<double> checkpoint_times;
  std::vector<Vec> checkpoint_values;
};

/// Uniformly sampled segment with linear (order 1) or cubic Hermite
/// (order 3, finite-difference slopes) interpolation.
struct SampledPiece {
  double t0 = 0.0, t1 = 0.0;
  std::vector<Vec> values;  // values[k] at t0 + k (t1 - t0) / (size - 1)
  int order = 3;
};

using PathPiece = std::variant<FlowPiece, SampledPiece>;

/// Continuous piecewise path t -> y(t) on [t_begin, t_end].
class HeadPath {
 public:
  HeadPath() = default;
  explicit HeadPath(std::shared_ptr<const FlowBackend> flow) : flow_(std::move(flow)) {}

  bool empty() const { return pieces_.empty(); }
  double t_begin() const;
  double t_end() const;
  const std::vector<PathPiece>& pieces() const { return pieces_; }
  const std::shared_ptr<const FlowBackend>& flow() const { return flow_; }

  Vec value(double t) const;
  /// Time derivative. At a breakpoint, `right` selects the one-sided limit.
  Vec derivative(double t, bool right = true) const;
  /// Flow label at t (0 for sampled segments); right-continuous.
  int label(double t) const;
  /// Interior breakpoints (piece boundaries) in increasing order.
  std::vector<double> breakpoints() const;

  void append(PathPiece piece);
  /// Appends a segment following Y_u from the current end to t1.
  void extend(double t1, int u);

  HeadPath restricted(double a, double b) const;
  HeadPath shifted(double dt) const;

  /// Max over breakpoints of |left limit - right limit|.
  double max_breakpoint_jump() const;

 private:
  std::size_t locate(double t, bool right) const;

  std::shared_ptr<const FlowBackend> flow_;
  std::vector<PathPiece> pieces_;
};

double piece_t0(const PathPiece& p);
double piece_t1(const PathPiece& p);

/// Piece on [t0, t1] following Y_u through y_ref at time t_ref; fills the
/// checkpoints for flows without closed form.
FlowPiece make_flow_piece(const FlowBackend& flow, double t0, double t1, int u, double t_ref,
                          const Vec& y_ref);

/// A continuous function on [-horizon, 0].
class HistorySegment {
 public:
  /// Anchor point at -horizon, switch times in (-horizon, 0] and one flow label
  /// per sub-interval (labels.size() == switch_times.size() + 1).
  static HistorySegment from_breakpoints(std::shared_ptr<const FlowBackend> flow,
                                         double horizon, const Vec& anchor,
                                         const std::vector<double>& switch_times,
                                         const std::vector<int>& labels);
  /// Uniform grid samples on [-horizon, 0] (at least two values).
  static HistorySegment from_samples(std::shared_ptr<const FlowBackend> flow, double horizon,
                                     std::vector<Vec> values, int order = 3);
  static HistorySegment constant(std::shared_ptr<const FlowBackend> flow, double horizon,
                                 const Vec& y);
  /// Wraps an existing path that must cover exactly [-horizon, 0].
  static HistorySegment from_path(HeadPath path);

  double horizon() const { return -path_.t_begin(); }
  Vec operator()(double s) const { return path_.value(s); }
  const HeadPath& path() const { return path_; }

 private:
  explicit HistorySegment(HeadPath p) : path_(std::move(p)) {}
  HeadPath path_;
};

struct HybridState {
  HistorySegment history;
  int u = 1;
};

/// A crossing of one of the lines h = +-epsilon that schedules a switch.
struct CrossingEvent {
  double time = 0.0;
  int line = 1;        // +1 for h = +epsilon, -1 for h = -epsilon
  int direction = 1;   // sign of d/dt h at the crossing, 0 for a touch
  bool degenerate = false;
};

struct SwitchEvent {
  double time = 0.0;
  int from = 1, to = -1;
  /// time - tau, or nullopt when the switch only fixes an inconsistent u0
  std::optional<double> crossing_time;
  Vec point;
};

struct Trajectory {
  RelaySystem system;
  HeadPath path;  // covers [-horizon, t_final]
  double t_final = 0.0;
  int u_initial = 1;
  std::vector<CrossingEvent> crossings;
  std::vector<SwitchEvent> switches;
  /// (time, u) pairs; u takes the value from that time on.
  std::vector<std::pair<double, int>> u_path;

  int u_at(double t) const;
  Vec headpoint(double t) const { return path.value(t); }
};

enum class DegeneratePolicy { Throw, Record };

struct EvolveOptions {
  double scan_step = 0.05;     // sub-step of the crossing scan
  double root_tol = 1e-12;     // |h(y) -+ epsilon| at refined crossings
  double tangency_tol = 1e-8;  // |d/dt h| below this is a degenerate crossing
  double touch_tol = 1e-10;    // a local extremum this close to a line is a touch
  DegeneratePolicy degenerate = DegeneratePolicy::Throw;
};

struct EvolveResult {
  HybridState state;
  Trajectory trajectory;
};

/// Output of the relay with hysteresis driven by a scalar signal.
struct HysteronOutput {
  double a = 0.0, b = 0.0;
  int initial = 1;
  std::vector<CrossingEvent> switches;
  int value_at(double s) const;
};

/// Runs the hysteretic relay on `signal` over [a, b] starting from state u0:
/// -1 where the signal reaches >= epsilon, +1 where it reaches <= -epsilon,
/// held in between, right-continuous. `derivative` is optional (central
/// differences otherwise) and `breaks` lists points where the signal may have
/// a corner.
HysteronOutput hysteron(const std::function<double(double)>& signal, double a, double b,
                        int u0, double epsilon, const EvolveOptions& opts = {},
                        const std::function<double(double)>& derivative = {},
                        const std::vector<double>& breaks = {});

/// Forward evolution E^T of the hybrid state over [0, T].
EvolveResult evolve(const RelaySystem& sys, const HybridState& state, double T,
                    const EvolveOptions& opts = {});

/// Crossing times recomputed from the trajectory's signal h(y(t)) on
/// [-tau, t_final] by the hysteron; includes crossings whose switch lies
/// beyond t_final.
std::vector<CrossingEvent> crossing_times(const Trajectory& traj,
                                          const EvolveOptions& opts = {});

struct TransversalityCheck {
  double time = 0.0;
  bool transversal = false;
  double margin = 0.0;  // smallest forward difference of |h(y)| on the window
};

/// Tests that |h(y(t))| is strictly increasing on [t_k - window, t_k + window]
/// around every crossing time. Throws WindowTooLarge if windows of adjacent
/// crossings overlap or leave the path.
std::vector<TransversalityCheck> check_weak_transversality(const Trajectory& traj,
                                                           double window,
                                                           int samples = 64);

enum class CornerType { StrictlyTransversal, OneSided, Degenerate };

struct StrictTransversality {
  double q = 0.0;
  double normal_speed_minus = 0.0;  // h'(y) f(y, -1)
  double normal_speed_plus = 0.0;   // h'(y) f(y, +1)
  CornerType type = CornerType::Degenerate;
};

StrictTransversality strict_transversality_q(const RelaySystem& sys, const Vec& y,
                                             double zero_tol = 1e-12);

/// Switch-count and switch-gap diagnostics over [t0, tE].
struct SwitchBoundReport {
  int observed_switches = 0;
  double bound = 0.0;  // 1 + (tE - t0) L H y_max / (2 epsilon)
  double y_max = 0.0;
  double min_gap = 0.0;  // smallest distance between consecutive switches
  double gap_bound = 0.0;  // 2 epsilon / (H L y_max)
};

SwitchBoundReport switch_bound_report(const Trajectory& traj, double t0, double tE,
                                      int samples_per_unit = 200);

// ---------------------------------------------------------------------------
// Export

/// CSV with columns t, y_1..y_n, u sampled every `dt` on [0, t_final] plus
/// one row per switch time (u right-continuous).
void write_trajectory_csv(const Trajectory& traj, const std::string& path, double dt);
/// JSON sidecar {"crossings": [...], "switches": [...]} of {time, line, direction}.
void write_events_json(const Trajectory& traj, const std::string& path);

struct TrajectoryTable {
  std::vector<double> t;
  std::vector<Vec> y;
  std::vector<int> u;
};
TrajectoryTable read_trajectory_csv(const std::string& path);

struct EventRecord {
  double time = 0.0;
  int line = 0;
  int direction = 0;
};
struct EventSidecar {
  std::vector<EventRecord> crossings;
  std::vector<EventRecord> switches;
};
EventSidecar read_events_json(const std::string& path);

}  // namespace relaycoll
