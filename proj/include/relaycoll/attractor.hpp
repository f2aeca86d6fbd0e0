#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "relaycoll/continuation.hpp"
#include "relaycoll/reduced_map.hpp"
#include "relaycoll/types.hpp"

namespace relaycoll::attractor {

struct IterateOptions {
  int n_transient = 40;
  int n_total = 400;
};

struct Envelope {
  Vec min, max;
  /// Largest coordinate extent.
  double width() const { return (max - min).maxCoeff(); }
};

struct IterationResult {
  std::vector<Vec> samples;  // iterates n_transient..n_total
  std::vector<DomainTag> tags;
  Envelope envelope;
  bool visited_plus = false, visited_minus = false;

  double diameter() const;
};

/// Iterates F from y0 and records the iterates with index in
/// [n_transient, n_total]. Throws LeftNeighborhood when an iterate leaves
/// the domain of F.
IterationResult iterate_attractor(const CollisionContext& ctx, const Vec& y0,
                                  const IterateOptions& opts = {});

struct SweepRecord {
  double parameter = 0.0;
  Envelope envelope;
  std::vector<Vec> sample;  // last `keep` iterates
  bool visited_plus = false, visited_minus = false;
};

struct SweepOptions {
  IterateOptions iterate;
  bool warm_start = true;
  int keep = 360;
};

/// One attractor per parameter value; with warm start each run begins at the
/// last iterate of the previous one.
std::vector<SweepRecord> sweep(const std::function<CollisionContext(double)>& family,
                               const std::vector<double>& values, const Vec& y0,
                               const SweepOptions& opts = {});

/// Reference parameters along an alpha sweep of the oscillator at fixed tau,
/// continued from the NSC point: SPC on the collision surface, the NS curve
/// and, when `with_icc`, the colliding invariant-curve family.
struct SweepLandmarks {
  double spc = 0.0;
  double ns = 0.0;
  std::optional<double> icc;
};
SweepLandmarks sweep_landmarks(double zeta, double tau, double epsilon,
                               const continuation::NSCPoint& nsc, bool with_icc = true);

struct PolygonDescription {
  std::vector<Vec> points;  // sorted by angle about the centroid
  Vec centroid;
  std::vector<double> angles;  // of `points`, in [0, 2 pi)
  std::vector<std::pair<double, double>> circle_map;  // (phi_k, phi_{k+1}) in orbit order
  bool monotone = false;
  double rotation_number = 0.0;      // mean angular advance / 2 pi
  std::optional<int> locking_period;  // q <= 64 when the angles recur
  std::vector<int> corners;           // indices into `points`
  int arc_count = 0;
  std::vector<int> arc_id;            // per point
  std::vector<DomainTag> tags;        // per point, filled by polygon_arcs
};

/// Angles about the sample mean and the induced circle map. Needs at least
/// 200 samples in orbit order; throws CentroidOnCurve when the mean sits on
/// the samples.
PolygonDescription extract_circle_map(const std::vector<Vec>& samples, int max_period = 64,
                                      double period_tol = 1e-6);

/// Splits the attractor into smooth arcs at corners where the turning angle
/// between consecutive secants exceeds `corner_factor` times the median.
/// Throws InsufficientSamples when fewer than `min_distinct` distinct points.
PolygonDescription polygon_arcs(const std::vector<Vec>& samples, const CollisionContext& ctx,
                                double corner_factor = 10.0, int min_distinct = 16);

}  // namespace relaycoll::attractor
