#include "relaycoll/reduced_map.hpp"

#include <cmath>
#include <sstream>

#include "relaycoll/roots.hpp"

namespace relaycoll {

const char* to_string(DomainTag tag) { return tag == DomainTag::DMinus ? "D-" : "D+"; }

CollisionContext::CollisionContext(std::shared_ptr<const FlowBackend> flow, SwitchingFunction h,
                                   double tau, double epsilon, Vec y_ref, Options opts)
    : flow_(std::move(flow)),
      h_(std::move(h)),
      tau_(tau),
      epsilon_(epsilon),
      delta_(0.0),
      y_ref_(std::move(y_ref)),
      opts_(opts) {
  if (!flow_) throw InvalidArgument("collision context needs a flow backend");
  if (!(tau_ > 0.0)) throw InvalidArgument("tau must be positive");
  if (!(epsilon_ > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (y_ref_.size() != flow_->dim()) throw InvalidArgument("reference point has wrong dimension");
  if (!(opts_.radius > 0.0)) throw InvalidArgument("neighbourhood radius must be positive");
  delta_ = opts_.delta.value_or(0.1 * tau_);
  if (!(delta_ > 0.0)) throw InvalidArgument("delta must be positive");
  if (opts_.require_transversality) {
    const Vec g = hgrad(y_ref_);
    const double q = g.dot(field(y_ref_, -1)) * g.dot(field(y_ref_, 1));
    if (!(q > 0.0)) {
      std::ostringstream msg;
      msg << "corner collision is not strictly transversal at the reference point (q = " << q
          << ")";
      throw InvalidArgument(msg.str());
    }
  }
}

Vec CollisionContext::flow_apply(const Vec& y, int u, double t) const {
  return flow_->apply(y, polarity_ * u, t);
}

Vec CollisionContext::field(const Vec& y, int u) const { return flow_->field(y, polarity_ * u); }

Mat CollisionContext::flow_jacobian(const Vec& y, int u, double t) const {
  return flow_->state_jacobian(y, polarity_ * u, t);
}

void CollisionContext::check_neighborhood(const Vec& y) const {
  const double d = (y - y_ref_).norm();
  if (!(d <= opts_.radius)) {
    std::ostringstream msg;
    msg << "point at distance " << d << " from the reference exceeds radius " << opts_.radius;
    throw OutsideNeighborhood(msg.str());
  }
}

DomainTag CollisionContext::classify(const Vec& y) const {
  return hval(y) >= epsilon_ ? DomainTag::DMinus : DomainTag::DPlus;
}

double CollisionContext::crossing_time_branch(const Vec& y, MapBranch branch) const {
  check_neighborhood(y);
  const int u = branch == MapBranch::Minus ? -1 : 1;
  auto fn = [&](double t) {
    const Vec z = flow_apply(y, u, t);
    return std::make_pair(hval(z) - epsilon_, hgrad(z).dot(field(z, u)));
  };
  const auto res = roots::solve(fn, 0.0, -delta_, delta_, opts_.newton_tol, opts_.max_newton);
  if (!res) {
    throw NoRootInBracket("no crossing time in (-delta, delta); point left the neighbourhood");
  }
  const double speed = fn(res->x).second;
  if (std::abs(speed) < opts_.degenerate_speed) {
    throw DegenerateDerivative("normal speed vanishes at the crossing time");
  }
  return res->x;
}

double CollisionContext::crossing_time(const Vec& y) const {
  return crossing_time_branch(
      y, classify(y) == DomainTag::DMinus ? MapBranch::Minus : MapBranch::Plus);
}

Vec CollisionContext::map_F_branch(const Vec& y, MapBranch branch) const {
  const double t = crossing_time_branch(y, branch);
  return -flow_apply(y, 1, tau_ + t);
}

Vec CollisionContext::map_F(const Vec& y) const {
  return map_F_branch(y, classify(y) == DomainTag::DMinus ? MapBranch::Minus : MapBranch::Plus);
}

CollisionContext::Linearization CollisionContext::jacobian_F_branch(const Vec& y,
                                                                    MapBranch branch) const {
  const int u = branch == MapBranch::Minus ? -1 : 1;
  const double t = crossing_time_branch(y, branch);
  const Vec z = flow_apply(y, u, t);
  const Vec hz = hgrad(z);
  const double speed = hz.dot(field(z, u));
  const Vec grad_t = -(hz.transpose() * flow_jacobian(y, u, t)).transpose() / speed;
  const Vec w = flow_apply(y, 1, tau_ + t);
  const Vec fw = field(w, 1);
  Linearization lin;
  lin.t = t;
  lin.J = -(flow_jacobian(y, 1, tau_ + t) + fw * grad_t.transpose());
  lin.d_tau = -fw;
  lin.d_epsilon = -fw / speed;
  return lin;
}

Mat CollisionContext::linearization_at_reference(MapBranch branch) const {
  const Vec& y = y_ref_;
  const Vec f1 = field(y, -1), f2 = field(y, 1);
  const Vec h0 = hgrad(y);
  const double g = branch == MapBranch::Minus ? h0.dot(f1) : h0.dot(f2);
  const int n = dim();
  const Mat A = flow_jacobian(y, 1, tau_);
  return -A * (Mat::Identity(n, n) - f2 * h0.transpose() / g);
}

double CollisionContext::delayed_manifold_residual(const Vec& y) const {
  return hval(flow_apply(-y, 1, -tau_)) - epsilon_;
}

double CollisionContext::theta(const Vec& y) const {
  check_neighborhood(y);
  const Vec f2 = field(y_ref_, 1);
  const Vec target = flow_apply(y_ref_, 1, delta_);
  auto fn = [&](double th) {
    const Vec z = flow_apply(y, 1, th);
    return std::make_pair(f2.dot(z - target), f2.dot(field(z, 1)));
  };
  const double scale = f2.squaredNorm();
  const auto res = roots::solve(fn, delta_, -delta_, 3.0 * delta_, opts_.newton_tol * scale,
                                opts_.max_newton);
  const double slack = 1e-12;
  if (!res || res->x < -slack || res->x > 2.0 * delta_ + slack) {
    throw NoRootInBracket("no section crossing time in [0, 2 delta]");
  }
  return std::max(0.0, res->x);
}

HistorySegment CollisionContext::reconstruct_history(const Vec& y,
                                                     std::optional<double> horizon) const {
  const double H = horizon.value_or(tau_);
  const double th = theta(y);
  if (!(H > th)) throw InvalidArgument("history horizon shorter than theta(y)");
  HeadPath path(flow_);
  path.append(make_flow_piece(*flow_, -H, -th, -polarity_, -th, y));
  if (th > 0.0) path.append(make_flow_piece(*flow_, -th, 0.0, polarity_, -th, y));
  return HistorySegment::from_path(std::move(path));
}

RelaySystem CollisionContext::relay_system() const {
  RelaySystem sys;
  sys.flow = flow_;
  sys.h = h_;
  sys.tau = tau_;
  sys.epsilon = epsilon_;
  return sys;
}

CollisionContext CollisionContext::mirrored() const {
  CollisionContext out = *this;
  out.polarity_ = -polarity_;
  out.y_ref_ = -y_ref_;
  return out;
}

CollisionContext CollisionContext::with_parameters(double tau, double epsilon,
                                                   const Vec& y_ref) const {
  CollisionContext out(flow_, h_, tau, epsilon, y_ref, opts_);
  if (polarity_ < 0) {
    out.polarity_ = -1;
  }
  return out;
}

std::vector<Vec> simulate_switch_points(const CollisionContext& ctx, const Vec& y, int count,
                                        const EvolveOptions& opts) {
  if (count <= 0) return {};
  const RelaySystem sys = ctx.relay_system();
  const HybridState state{ctx.reconstruct_history(y), ctx.polarity()};
  // each half-return takes tau + t_k - theta-type corrections of order delta
  const double T = count * (ctx.tau() + 2.0 * ctx.delta()) + ctx.delta();
  const auto res = evolve(sys, state, T, opts);
  std::vector<Vec> out;
  for (const auto& sw : res.trajectory.switches) {
    if (!sw.crossing_time) continue;
    out.push_back(sw.point);
    if (static_cast<int>(out.size()) == count) break;
  }
  if (static_cast<int>(out.size()) < count) {
    throw InvalidArgument("simulation produced fewer switches than requested");
  }
  return out;
}

}  // namespace relaycoll
