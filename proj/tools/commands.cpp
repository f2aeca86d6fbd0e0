#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>

#include "relaycoll/attractor.hpp"
#include "relaycoll/continuation.hpp"
#include "relaycoll/io.hpp"
#include "relaycoll/oscillator.hpp"
#include "relaycoll/relay.hpp"

#ifndef RELAYCOLL_BUILD_ID
#define RELAYCOLL_BUILD_ID "unknown"
#endif

namespace relaycoll::cli {

namespace fs = std::filesystem;
using io::format_double;
using io::Json;
namespace cont = continuation;

const char* build_id() { return RELAYCOLL_BUILD_ID; }

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"simulate", "surface", "bifmap", "unfold",
                                                 "family",   "sweep",   "polygon"};
  return names;
}

Run::Run(std::string command, RunConfig cfg, fs::path out)
    : command_(std::move(command)), cfg_(std::move(cfg)), out_(std::move(out)) {
  std::error_code ec;
  fs::create_directories(out_, ec);
  const fs::path probe = out_ / ".write-probe";
  std::ofstream f(probe);
  if (ec || !f) throw ConfigError("output directory " + out_.string() + " is not writable");
  f.close();
  fs::remove(probe, ec);
}

std::string Run::path(const std::string& file) {
  outputs_.push_back(file);
  return (out_ / file).string();
}

void Run::write_manifest() const {
  Json m;
  m["command"] = command_;
  m["build"] = build_id();
  m["threads"] = cfg_.threads;
  m["seed"] = cfg_.seed;
  m["config"] = dump_config(cfg_);
  m["outputs"] = outputs_;
  m["checks"] = checks_;
  io::write_json((out_ / "manifest.json").string(), m);
}

namespace {

std::string num(double x) { return format_double(x); }

Json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

cont::NSCPoint nsc_from_config(const RunConfig& c) {
  return cont::solve_nsc(c.system.zeta, c.system.epsilon, c.unfold.tau_guess, c.unfold.alpha_guess);
}

Json nsc_json(const cont::NSCPoint& n, double zeta, double epsilon) {
  Json j;
  j["zeta"] = zeta;
  j["epsilon"] = epsilon;
  j["tau"] = n.tau;
  j["alpha"] = n.alpha;
  j["y0"] = vec_json(n.y0);
  j["t0"] = n.t0;
  j["residual_norm"] = n.residual_norm;
  return j;
}

cont::NSCPoint nsc_from_json(const Json& j, const RunConfig& c) {
  try {
    if (std::abs(j.at("zeta").get<double>() - c.system.zeta) > 0.0 ||
        std::abs(j.at("epsilon").get<double>() - c.system.epsilon) > 0.0) {
      throw ConfigError("family.nsc_file was computed for other zeta/epsilon values");
    }
    cont::NSCPoint n;
    n.tau = j.at("tau").get<double>();
    n.alpha = j.at("alpha").get<double>();
    const auto y = j.at("y0").get<std::vector<double>>();
    if (y.size() != 2) throw FormatError("y0 must have two entries");
    n.y0 = Vec2(y[0], y[1]);
    n.t0 = j.at("t0").get<double>();
    n.residual_norm = j.at("residual_norm").get<double>();
    return n;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("nsc file: ") + e.what());
  }
}

CollisionContext context_at(const RunConfig& c, double alpha, double radius) {
  CollisionContext::Options o;
  o.radius = radius;
  return oscillator::make_context({c.system.zeta, c.system.tau, c.system.epsilon, alpha}, o);
}

}  // namespace

// ---------------------------------------------------------------------------

void cmd_simulate(Run& run) {
  const RunConfig& c = run.config();
  const auto& s = c.simulate;
  oscillator::Params p{c.system.zeta, c.system.tau, c.system.epsilon, c.system.alpha};
  const bool colliding = s.history == "collision";
  if (colliding) p.epsilon = oscillator::collision_epsilon(p.zeta, p.tau, p.alpha);
  RelaySystem sys = oscillator::relay_system(p);
  const CollisionContext ctx = oscillator::make_context(p);

  HybridState state{HistorySegment::constant(sys.flow, sys.tau, Vec2::Zero()), s.u0};
  if (s.history == "constant") {
    state.history = HistorySegment::constant(sys.flow, sys.tau, Vec2(s.state[0], s.state[1]));
  } else {
    Vec y = ctx.y_ref();
    if (s.history == "random") {
      std::mt19937_64 rng(c.seed);
      std::uniform_real_distribution<double> U(0.0, 1.0);
      const double r = s.perturbation * std::sqrt(U(rng)), a = 2.0 * M_PI * U(rng);
      y += Vec2(r * std::cos(a), r * std::sin(a));
    }
    state = {ctx.reconstruct_history(y), ctx.polarity()};
  }

  EvolveOptions eo;
  eo.scan_step = s.scan_step;
  eo.degenerate = DegeneratePolicy::Record;
  const EvolveResult res = evolve(sys, state, s.t_final, eo);
  write_trajectory_csv(res.trajectory, run.path("trajectory.csv"), s.dt);
  write_events_json(res.trajectory, run.path("events.json"));
  run.check("epsilon", p.epsilon);
  run.check("switches", res.trajectory.switches.size());

  if (s.t_final > sys.tau) {
    const auto rep = switch_bound_report(res.trajectory, sys.tau, s.t_final);
    run.check("switch_bound", {{"observed", rep.observed_switches}, {"bound", rep.bound}});
    if (rep.observed_switches > rep.bound) {
      run.write_manifest();
      throw ValidationBreach("switch count " + std::to_string(rep.observed_switches) +
                             " exceeds the bound " + num(rep.bound));
    }
  }
  if (colliding && s.t_final > 2.0 * sys.tau) {
    const double period = 2.0 * sys.tau;
    double err = 0.0;
    for (double t = 0.0; t + period <= s.t_final; t += s.dt) {
      err = std::max(err, (res.trajectory.headpoint(t + period) - res.trajectory.headpoint(t)).norm());
    }
    run.check("periodicity_error", err);
    if (err > 1e-6) {
      run.write_manifest();
      throw ValidationBreach("collision orbit not 2 tau periodic: error " + num(err));
    }
  }
  run.write_manifest();
}

void cmd_surface(Run& run) {
  const RunConfig& c = run.config();
  const auto samples =
      oscillator::surface_grid(c.system.zeta, c.surface.tau.values(), c.surface.alpha.values());
  io::Table t({"tau", "alpha", "epsilon", "q"});
  for (const auto& s : samples) {
    if (!s.valid) continue;
    t.add_row({num(s.tau), num(s.alpha), num(s.epsilon), num(s.q)});
  }
  io::write_table(run.path("surface.csv"), t);
  run.check("rows", t.rows.size());
  run.write_manifest();
}

void cmd_bifmap(Run& run) {
  const RunConfig& c = run.config();
  const auto map =
      oscillator::bifurcation_map(c.system.zeta, c.bifmap.tau.values(), c.bifmap.alpha.values());
  io::Table curves({"curve", "segment", "tau", "alpha", "epsilon", "residual", "trace"});
  std::map<std::string, int> segments;
  for (const auto& lc : map.curves) {
    const std::string kind = oscillator::to_string(lc.kind);
    const int seg = segments[kind]++;
    for (const auto& p : lc.points) {
      curves.add_row({kind, std::to_string(seg), num(p.tau), num(p.alpha), num(p.epsilon),
                      num(p.residual), num(p.trace)});
    }
  }
  io::Table special({"label", "tau", "alpha", "epsilon", "residual"});
  for (const auto& s : map.special) {
    special.add_row({s.label, num(s.tau), num(s.alpha), num(s.epsilon), num(s.residual)});
  }
  io::write_table(run.path("curves.csv"), curves);
  io::write_table(run.path("special.csv"), special);
  run.check("curves", map.curves.size());
  run.check("special_points", map.special.size());
  run.write_manifest();
}

void cmd_unfold(Run& run) {
  const RunConfig& c = run.config();
  const double zeta = c.system.zeta, eps = c.system.epsilon;
  const auto& u = c.unfold;
  const cont::NSCPoint nsc = nsc_from_config(c);
  io::write_json(run.path("nsc.json"), nsc_json(nsc, zeta, eps));

  const cont::ResidualProblem prob =
      cont::ns_problem({zeta, 0.0, 0.0, eps}, {cont::Param::Tau, cont::Param::Alpha});
  Vec z0(5);
  z0 << nsc.y0, nsc.t0, nsc.tau, nsc.alpha;
  std::vector<Vec> points;
  for (int dir : {-1, 1}) {
    cont::ContinueOptions co;
    co.step = {u.step, 1e-7, u.step, 100000, 8, 1e-11, 3};
    co.direction_slot = 3;
    co.direction = dir;
    co.bounds = {{3, u.tau_min, u.tau_max}};
    const cont::Branch b = cont::continue_branch(prob, z0, co);
    std::vector<Vec> side;
    for (const auto& bp : b.points) side.push_back(bp.z);
    if (b.terminal && b.terminal->z[3] >= u.tau_min && b.terminal->z[3] <= u.tau_max) {
      side.push_back(b.terminal->z);
    }
    if (dir < 0) {
      points.insert(points.end(), side.rbegin(), side.rend());
    } else {
      points.insert(points.end(), side.begin() + 1, side.end());
    }
  }
  io::Table ns({"tau", "alpha", "t0", "trace", "admissible"});
  for (const Vec& z : points) {
    const auto r = cont::ns_residual(Vec2(z[0], z[1]), z[2], {zeta, z[3], z[4], eps});
    ns.add_row({num(z[3]), num(z[4]), num(z[2]), num(r.trace), r.admissible ? "1" : "0"});
  }
  io::write_table(run.path("ns_curve.csv"), ns);

  io::Table coll({"tau", "alpha"});
  double guess = nsc.alpha;
  for (double tau : oscillator::linspace(u.tau_min, u.tau_max, u.collision_points)) {
    try {
      guess = oscillator::solve_alpha_on_slice(zeta, tau, eps, guess);
      coll.add_row({num(tau), num(guess)});
    } catch (const NoRootInBracket&) {
    }
  }
  io::write_table(run.path("collision_curve.csv"), coll);
  run.check("nsc_residual", nsc.residual_norm);
  run.check("ns_points", ns.rows.size());
  run.check("collision_points", coll.rows.size());
  run.write_manifest();
}

void cmd_family(Run& run) {
  const RunConfig& c = run.config();
  const double zeta = c.system.zeta, eps = c.system.epsilon;
  const auto& f = c.family;
  const cont::NSCPoint nsc =
      f.nsc_file.empty() ? nsc_from_config(c) : nsc_from_json(io::read_json(f.nsc_file), c);
  const cont::FamilyPoint seed = cont::seed_family(nsc, f.modes, f.dtau, zeta, eps);

  cont::FamilyOptions fo;
  fo.step = {f.h_initial, 1e-7, f.h_max, f.max_points, 8, 1e-10, 3};
  fo.tau_max = f.tau_max;
  fo.error_limit = f.error_limit;
  fo.invariance_every = f.invariance_every;
  const cont::FamilyBranch fb = cont::continue_colliding_family(seed, nsc, zeta, eps, fo);

  auto record_json = [](const cont::FamilyRecord& r, std::size_t index) {
    Json j;
    j["index"] = index;
    j["tau"] = r.point.tau;
    j["alpha"] = r.point.alpha;
    j["phi_star"] = r.point.phi_star;
    j["rotation_number"] = r.point.curve.omega / (2.0 * M_PI);
    j["mean_radius"] = r.mean_radius;
    j["error_estimate"] = r.error.value;
    j["tail_norm"] = r.error.tail_norm;
    j["off_node_residual"] = r.error.off_node_residual;
    j["invariance_error"] = r.invariance ? Json(*r.invariance) : Json(nullptr);
    j["alpha_ns"] = r.alpha_ns;
    j["t_max"] = r.t_max;
    j["unknowns"] = vec_json(r.point.pack());
    return j;
  };
  std::vector<Json> lines;
  for (std::size_t i = 0; i < fb.records.size(); ++i) lines.push_back(record_json(fb.records[i], i));
  io::write_jsonl(run.path("family.jsonl"), lines);

  io::Table curves({"index", "phi", "r", "eta", "t", "x", "xdot"});
  const int samples = 4 * (2 * f.modes + 1);
  for (std::size_t i = 0; i < fb.records.size(); ++i) {
    if (f.snapshot_every == 0 || i % f.snapshot_every != 0) continue;
    const auto& cv = fb.records[i].point.curve;
    for (int k = 0; k < samples; ++k) {
      const double phi = 2.0 * M_PI * k / samples;
      const Vec2 y = cv.point(phi);
      curves.add_row({std::to_string(i), num(phi), num(cv.r(phi)), num(cv.eta(phi)),
                      num(cv.t(phi)), num(y[0]), num(y[1])});
    }
  }
  io::write_table(run.path("family_curves.csv"), curves);

  Json summary;
  summary["nsc"] = nsc_json(nsc, zeta, eps);
  summary["modes"] = f.modes;
  summary["points"] = fb.records.size();
  summary["termination"] = cont::to_string(fb.branch.reason);
  summary["message"] = fb.branch.message;
  summary["terminal"] = fb.terminal ? record_json(*fb.terminal, fb.records.size()) : Json(nullptr);
  io::write_json(run.path("family.json"), summary);
  run.check("termination", cont::to_string(fb.branch.reason));
  run.check("points", fb.records.size());
  run.write_manifest();
}

void cmd_sweep(Run& run) {
  const RunConfig& c = run.config();
  const auto& sw = c.sweep;
  attractor::SweepOptions so;
  so.iterate = {sw.n_transient, sw.n_total};
  so.warm_start = sw.warm_start;
  so.keep = sw.n_total - sw.n_transient + 1;
  const Vec2 y0 = oscillator::collision_point(c.system.zeta, c.system.tau) + Vec2(0.01, 0.01);
  const auto recs = attractor::sweep([&](double a) { return context_at(c, a, sw.radius); },
                                     sw.alpha.values(), y0, so);
  io::Table t({"alpha", "env_min_x", "env_max_x", "env_min_xdot", "env_max_xdot", "width",
               "visited_plus", "visited_minus"});
  for (const auto& r : recs) {
    t.add_row({num(r.parameter), num(r.envelope.min[0]), num(r.envelope.max[0]),
               num(r.envelope.min[1]), num(r.envelope.max[1]), num(r.envelope.width()),
               r.visited_plus ? "1" : "0", r.visited_minus ? "1" : "0"});
  }
  io::write_table(run.path("sweep.csv"), t);
  if (sw.landmarks) {
    const auto lm = attractor::sweep_landmarks(c.system.zeta, c.system.tau, c.system.epsilon,
                                               nsc_from_config(c), true);
    Json j;
    j["spc"] = lm.spc;
    j["icc"] = lm.icc ? Json(*lm.icc) : Json(nullptr);
    j["ns"] = lm.ns;
    io::write_json(run.path("landmarks.json"), j);
  }
  run.check("rows", t.rows.size());
  run.write_manifest();
}

void cmd_polygon(Run& run) {
  const RunConfig& c = run.config();
  const auto& pg = c.polygon;
  const CollisionContext ctx = context_at(c, c.system.alpha, pg.radius);
  const auto it =
      attractor::iterate_attractor(ctx, ctx.y_ref() + Vec2(0.01, 0.01), {pg.n_transient, pg.n_total});
  const auto poly = attractor::polygon_arcs(it.samples, ctx, pg.corner_factor);
  const auto cm = attractor::extract_circle_map(it.samples);

  io::Table pts({"phi", "x", "xdot", "arc_id", "domain"});
  for (std::size_t i = 0; i < poly.points.size(); ++i) {
    pts.add_row({num(poly.angles[i]), num(poly.points[i][0]), num(poly.points[i][1]),
                 std::to_string(poly.arc_id[i]), to_string(poly.tags[i])});
  }
  io::write_table(run.path("polygon.csv"), pts);
  io::Table map({"phi", "phi_next"});
  for (const auto& [a, b] : cm.circle_map) map.add_row({num(a), num(b)});
  io::write_table(run.path("circle_map.csv"), map);

  Json j;
  j["centroid"] = vec_json(cm.centroid);
  j["monotone"] = cm.monotone;
  j["rotation_number"] = cm.rotation_number;
  j["locking_period"] = cm.locking_period ? Json(*cm.locking_period) : Json(nullptr);
  j["arc_count"] = poly.arc_count;
  j["corners"] = poly.corners;
  j["visited_plus"] = it.visited_plus;
  j["visited_minus"] = it.visited_minus;
  io::write_json(run.path("polygon.json"), j);
  run.check("arc_count", poly.arc_count);
  run.check("monotone", cm.monotone);
  run.write_manifest();
}

int dispatch(const std::string& command, const RunConfig& cfg, const fs::path& out) {
  try {
    validate(cfg);
    Run run(command, cfg, out);
    if (command == "simulate") cmd_simulate(run);
    else if (command == "surface") cmd_surface(run);
    else if (command == "bifmap") cmd_bifmap(run);
    else if (command == "unfold") cmd_unfold(run);
    else if (command == "family") cmd_family(run);
    else if (command == "sweep") cmd_sweep(run);
    else if (command == "polygon") cmd_polygon(run);
    else throw ConfigError("unknown command '" + command + "'");
    return Ok;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ConfigFailure;
  } catch (const ValidationBreach& e) {
    std::cerr << "validation failure: " << e.what() << '\n';
    return ValidationFailure;
  } catch (const Error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return NumericFailure;
  }
}

}  // namespace relaycoll::cli
