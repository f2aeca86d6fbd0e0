#include "relaycoll/attractor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "relaycoll/oscillator.hpp"

namespace relaycoll::attractor {

namespace {

double wrap_2pi(double x) {
  const double w = std::fmod(x, 2.0 * M_PI);
  return w < 0.0 ? w + 2.0 * M_PI : w;
}

double wrap_pi(double x) { return x - 2.0 * M_PI * std::floor((x + M_PI) / (2.0 * M_PI)); }

}  // namespace

double IterationResult::diameter() const {
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      d = std::max(d, (samples[i] - samples[j]).norm());
    }
  }
  return d;
}

IterationResult iterate_attractor(const CollisionContext& ctx, const Vec& y0,
                                  const IterateOptions& opts) {
  if (opts.n_transient < 0 || opts.n_total < opts.n_transient) {
    throw InvalidArgument("need 0 <= n_transient <= n_total");
  }
  IterationResult out;
  Vec y = y0;
  for (int k = 0; k <= opts.n_total; ++k) {
    if (k > 0) {
      try {
        y = ctx.map_F(y);
      } catch (const Error& e) {
        std::ostringstream msg;
        msg << "iterate " << k << ": " << e.what();
        throw LeftNeighborhood(msg.str());
      }
    } else {
      try {
        ctx.check_neighborhood(y);
      } catch (const OutsideNeighborhood& e) {
        throw LeftNeighborhood(e.what());
      }
    }
    if (k < opts.n_transient) continue;
    const DomainTag tag = ctx.classify(y);
    (tag == DomainTag::DPlus ? out.visited_plus : out.visited_minus) = true;
    if (out.samples.empty()) {
      out.envelope.min = out.envelope.max = y;
    } else {
      out.envelope.min = out.envelope.min.cwiseMin(y);
      out.envelope.max = out.envelope.max.cwiseMax(y);
    }
    out.samples.push_back(y);
    out.tags.push_back(tag);
  }
  return out;
}

std::vector<SweepRecord> sweep(const std::function<CollisionContext(double)>& family,
                               const std::vector<double>& values, const Vec& y0,
                               const SweepOptions& opts) {
  std::vector<SweepRecord> out;
  Vec start = y0;
  for (double v : values) {
    const CollisionContext ctx = family(v);
    const IterationResult it = iterate_attractor(ctx, opts.warm_start ? start : y0, opts.iterate);
    SweepRecord rec;
    rec.parameter = v;
    rec.envelope = it.envelope;
    rec.visited_plus = it.visited_plus;
    rec.visited_minus = it.visited_minus;
    const std::size_t keep = std::min<std::size_t>(std::max(opts.keep, 0), it.samples.size());
    rec.sample.assign(it.samples.end() - keep, it.samples.end());
    out.push_back(std::move(rec));
    start = it.samples.back();
  }
  return out;
}

SweepLandmarks sweep_landmarks(double zeta, double tau, double epsilon,
                               const continuation::NSCPoint& nsc, bool with_icc) {
  SweepLandmarks lm;
  const auto ns = continuation::ns_alpha_at(zeta, epsilon, tau, nsc.alpha, nsc.y0, nsc.t0);
  lm.ns = ns.alpha;
  lm.spc = oscillator::solve_alpha_on_slice(zeta, tau, epsilon, ns.alpha);
  if (with_icc) {
    const auto seed = continuation::seed_family(nsc, 32, 1e-3, zeta, epsilon);
    lm.icc = continuation::family_at_tau(seed, zeta, epsilon, tau).alpha;
  }
  return lm;
}

// ---------------------------------------------------------------------------
// Circle map and arcs

namespace {

Vec sample_mean(const std::vector<Vec>& samples) {
  Vec c = Vec::Zero(samples.front().size());
  for (const Vec& s : samples) c += s;
  return c / double(samples.size());
}

double extent(const std::vector<Vec>& samples) {
  Vec lo = samples.front(), hi = samples.front();
  for (const Vec& s : samples) {
    lo = lo.cwiseMin(s);
    hi = hi.cwiseMax(s);
  }
  return (hi - lo).norm();
}

std::optional<int> recurrence_period(const std::vector<double>& phi, int max_period, double tol) {
  const int n = int(phi.size());
  for (int q = 1; q <= max_period && 2 * q <= n; ++q) {
    bool ok = true;
    for (int k = 0; k + q < n && ok; ++k) ok = std::abs(wrap_pi(phi[k + q] - phi[k])) <= tol;
    if (ok) return q;
  }
  return std::nullopt;
}

}  // namespace

PolygonDescription extract_circle_map(const std::vector<Vec>& samples, int max_period,
                                      double period_tol) {
  if (samples.size() < 200) {
    std::ostringstream msg;
    msg << "circle-map extraction needs at least 200 samples, got " << samples.size();
    throw InsufficientSamples(msg.str());
  }
  if (samples.front().size() != 2) throw InvalidArgument("circle maps need planar samples");
  PolygonDescription d;
  d.centroid = sample_mean(samples);
  const double scale = extent(samples);
  const int n = int(samples.size());
  std::vector<double> phi(n);
  for (int k = 0; k < n; ++k) {
    const Vec v = samples[k] - d.centroid;
    if (!(v.norm() > 1e-9 * scale)) {
      throw CentroidOnCurve("a sample coincides with the centroid; angles are undefined");
    }
    phi[k] = wrap_2pi(std::atan2(v[1], v[0]));
  }
  double advance = 0.0;
  for (int k = 0; k + 1 < n; ++k) {
    d.circle_map.emplace_back(phi[k], phi[k + 1]);
    advance += wrap_2pi(phi[k + 1] - phi[k]);
  }
  d.rotation_number = advance / (2.0 * M_PI * (n - 1));
  d.locking_period = recurrence_period(phi, max_period, period_tol);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return phi[a] < phi[b]; });
  for (int i : order) {
    d.points.push_back(samples[i]);
    d.angles.push_back(phi[i]);
  }

  // monotone degree-one map: images advance by a positive amount between
  // circularly consecutive arguments and wind exactly once
  std::vector<std::pair<double, double>> pairs = d.circle_map;
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end(),
                          [](const auto& a, const auto& b) {
                            return std::abs(a.first - b.first) < 1e-14 &&
                                   std::abs(a.second - b.second) < 1e-14;
                          }),
              pairs.end());
  const int m = int(pairs.size());
  bool strict = m >= 2;
  double wind = 0.0;
  for (int i = 0; i < m && strict; ++i) {
    if (pairs[(i + 1) % m].first == pairs[i].first) {
      strict = false;
      break;
    }
    const double step = wrap_2pi(pairs[(i + 1) % m].second - pairs[i].second);
    if (!(step > 0.0)) strict = false;
    wind += step;
  }
  d.monotone = strict && std::abs(wind - 2.0 * M_PI) < 1e-9;
  return d;
}

PolygonDescription polygon_arcs(const std::vector<Vec>& samples, const CollisionContext& ctx,
                                double corner_factor, int min_distinct) {
  if (samples.empty()) throw InsufficientSamples("no samples");
  // distinct points in angular order about the sample mean
  const Vec c = sample_mean(samples);
  std::vector<std::pair<double, Vec>> pts;
  for (const Vec& s : samples) {
    const Vec v = s - c;
    pts.emplace_back(wrap_2pi(std::atan2(v[1], v[0])), s);
  }
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  // points closer than this are the same point
  const double same = 1e-9 * (1.0 + c.norm());
  std::vector<Vec> ring;
  std::vector<double> ang;
  for (const auto& [a, p] : pts) {
    if (!ring.empty() && (p - ring.back()).norm() <= same) continue;
    ring.push_back(p);
    ang.push_back(a);
  }
  if (ring.size() > 1 && (ring.front() - ring.back()).norm() <= same) {
    ring.pop_back();
    ang.pop_back();
  }
  if (int(ring.size()) < min_distinct) {
    std::ostringstream msg;
    msg << "only " << ring.size() << " distinct attractor points";
    throw InsufficientSamples(msg.str());
  }

  const int n = int(ring.size());
  std::vector<double> turn(n);
  for (int i = 0; i < n; ++i) {
    const Vec a = ring[i] - ring[(i + n - 1) % n];
    const Vec b = ring[(i + 1) % n] - ring[i];
    turn[i] = std::abs(wrap_pi(std::atan2(b[1], b[0]) - std::atan2(a[1], a[0])));
  }
  std::vector<double> sorted = turn;
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double threshold = corner_factor * sorted[n / 2];

  PolygonDescription d;
  d.centroid = c;
  d.points = ring;
  d.angles = ang;
  // a corner between two samples raises the turning angle at both; runs of
  // flagged indices count once, located at their largest turn
  std::vector<bool> flag(n);
  for (int i = 0; i < n; ++i) flag[i] = turn[i] > threshold;
  if (std::all_of(flag.begin(), flag.end(), [](bool b) { return b; })) {
    throw InsufficientSamples("turning angles are uniform; no smooth arcs resolved");
  }
  int start = 0;
  while (flag[start]) ++start;
  for (int k = 0; k < n; ++k) {
    const int i = (start + k) % n;
    if (!flag[i] || flag[(i + n - 1) % n]) continue;
    int best = i;
    for (int j = i; flag[j]; j = (j + 1) % n) {
      if (turn[j] > turn[best]) best = j;
    }
    d.corners.push_back(best);
  }
  std::sort(d.corners.begin(), d.corners.end());
  d.arc_count = std::max<int>(1, int(d.corners.size()));
  d.arc_id.assign(n, 0);
  if (!d.corners.empty()) {
    int arc = 0;
    const int first = d.corners.front();
    for (int k = 0; k < n; ++k) {
      const int i = (first + k) % n;
      if (k > 0 && std::binary_search(d.corners.begin(), d.corners.end(), i)) ++arc;
      d.arc_id[i] = arc;
    }
  }
  for (const Vec& p : d.points) d.tags.push_back(ctx.classify(p));
  return d;
}

}  // namespace relaycoll::attractor
