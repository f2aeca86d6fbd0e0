#pragma once

#include <memory>
#include <optional>

#include "relaycoll/flows.hpp"
#include "relaycoll/relay.hpp"
#include "relaycoll/types.hpp"

namespace relaycoll {

enum class DomainTag { DPlus, DMinus };
enum class MapBranch { Plus, Minus };

const char* to_string(DomainTag tag);

/// Neighbourhood of a symmetric corner collision and the half-return map
///   F(y) = -Y_+^{tau + t(y)} y,
/// where t(y) solves epsilon = h(Y_-^t y) on D_- = {h >= epsilon} and
/// epsilon = h(Y_+^t y) on D_+ = {h < epsilon}.
///
/// `polarity = -1` describes the reflected copy: flows Y_+ and Y_- swap and
/// the active line becomes h = -epsilon, so that F computed there at -y
/// equals -F(y).
class CollisionContext {
 public:
  struct Options {
    std::optional<double> delta;  // root bracket half-width, default 0.1 tau
    double radius = 0.5;          // neighbourhood guard around y_ref
    double newton_tol = 1e-12;
    int max_newton = 30;
    double degenerate_speed = 1e-10;
    bool require_transversality = true;
  };

  CollisionContext(std::shared_ptr<const FlowBackend> flow, SwitchingFunction h, double tau,
                   double epsilon, Vec y_ref, Options opts);
  CollisionContext(std::shared_ptr<const FlowBackend> flow, SwitchingFunction h, double tau,
                   double epsilon, Vec y_ref)
      : CollisionContext(std::move(flow), std::move(h), tau, epsilon, std::move(y_ref), Options{}) {}

  const std::shared_ptr<const FlowBackend>& flow() const { return flow_; }
  const SwitchingFunction& h() const { return h_; }
  double tau() const { return tau_; }
  double epsilon() const { return epsilon_; }
  double delta() const { return delta_; }
  double radius() const { return opts_.radius; }
  const Vec& y_ref() const { return y_ref_; }
  int polarity() const { return polarity_; }
  int dim() const { return flow_->dim(); }
  const Options& options() const { return opts_; }

  /// Effective switching function polarity * h.
  double hval(const Vec& y) const { return polarity_ * h_(y); }
  Vec hgrad(const Vec& y) const { return double(polarity_) * h_.gradient_checked(y); }
  /// Effective flows: Y_u in this context is Y_{polarity u} of the backend.
  Vec flow_apply(const Vec& y, int u, double t) const;
  Vec field(const Vec& y, int u) const;
  Mat flow_jacobian(const Vec& y, int u, double t) const;

  /// Throws OutsideNeighborhood when |y - y_ref| exceeds the radius.
  void check_neighborhood(const Vec& y) const;

  DomainTag classify(const Vec& y) const;
  /// t(y) on the branch selected by the domain of y.
  double crossing_time(const Vec& y) const;
  /// t_-(y) (Minus, flow Y_-) or t_+(y) (Plus, flow Y_+) on the whole neighbourhood.
  double crossing_time_branch(const Vec& y, MapBranch branch) const;

  Vec map_F(const Vec& y) const;
  Vec map_F_branch(const Vec& y, MapBranch branch) const;

  struct Linearization {
    Mat J;         // dF/dy
    Vec d_tau;     // dF/dtau
    Vec d_epsilon; // dF/depsilon
    double t = 0.0;
  };
  Linearization jacobian_F_branch(const Vec& y, MapBranch branch) const;

  /// Closed form -A(tau)[I - f2 h0'/g] at y_ref with g = h0' f1 (Minus) or
  /// h0' f2 (Plus); requires y_ref on the active line.
  Mat linearization_at_reference(MapBranch branch) const;

  /// Residual h(Y_+^{-tau}(-y)) - epsilon: zero on the delayed switching
  /// manifold that contains the image of F_+.
  double delayed_manifold_residual(const Vec& y) const;

  /// Travel time along Y_+ from y to the section through Y_+^delta y_ref
  /// orthogonal to f(y_ref, +1), restricted to [0, 2 delta].
  double theta(const Vec& y) const;
  /// History on [-horizon, 0]: Y_+ from y after -theta(y), Y_- before.
  /// Default horizon is tau.
  HistorySegment reconstruct_history(const Vec& y, std::optional<double> horizon = {}) const;
  /// Relay system in which reconstruct_history() is a valid initial state
  /// with u = polarity.
  RelaySystem relay_system() const;

  CollisionContext mirrored() const;
  /// Same context with other tau/epsilon/y_ref (used along parameter paths).
  CollisionContext with_parameters(double tau, double epsilon, const Vec& y_ref) const;

 private:
  std::shared_ptr<const FlowBackend> flow_;
  SwitchingFunction h_;
  double tau_, epsilon_, delta_;
  Vec y_ref_;
  Options opts_;
  int polarity_ = 1;
};

/// Full delayed-relay simulation started from reconstruct_history(y) with
/// u = polarity; returns the first `count` switch points. By the reduction,
/// the k-th point equals (-1)^k F^k(y).
std::vector<Vec> simulate_switch_points(const CollisionContext& ctx, const Vec& y, int count,
                                        const EvolveOptions& opts = {});

}  // namespace relaycoll
