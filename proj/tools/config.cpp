#include "config.hpp"

#include <yaml-cpp/yaml.h>

#include "relaycoll/io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace relaycoll::cli {

std::vector<double> Grid::values() const {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? min : min + (max - min) * i / (n - 1);
  return v;
}

namespace {

std::string where(const std::string& origin, const YAML::Mark& m) {
  std::ostringstream s;
  s << origin;
  if (!m.is_null()) s << ":" << m.line + 1 << ":" << m.column + 1;
  return s.str();
}

// Walks the known keys of a mapping; remembers which were consumed so that
// leftovers can be reported as unknown.
class Loader {
 public:
  Loader(const YAML::Node& node, std::string origin, std::string path)
      : node_(node), origin_(std::move(origin)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      throw ConfigError(where(origin_, node_.Mark()) + ": '" + path_ + "' must be a mapping");
    }
  }

  template <class T>
  void operator()(const char* key, T& value, const char*) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    read(v, value, qualified(key));
  }

  void operator()(const char* key, Grid& g, const char*) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    Loader sub(v, origin_, qualified(key));
    sub("min", g.min, "");
    sub("max", g.max, "");
    sub("n", g.n, "");
    sub.finish();
  }

  template <class S, class F>
  void section(const char* key, S& s, F fields) {
    seen_.insert(key);
    const YAML::Node v = node_ && !node_.IsNull() ? node_[key] : YAML::Node();
    Loader sub(v, origin_, qualified(key));
    fields(sub, s);
    sub.finish();
  }

  void finish() const {
    if (!node_ || node_.IsNull()) return;
    for (const auto& kv : node_) {
      const std::string k = kv.first.as<std::string>();
      if (!seen_.count(k)) {
        throw ConfigError(where(origin_, kv.first.Mark()) + ": unknown key '" + qualified(k) + "'");
      }
    }
  }

 private:
  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <class T>
  void read(const YAML::Node& v, T& value, const std::string& name) const {
    try {
      if constexpr (std::is_same_v<T, std::vector<double>>) {
        if (!v.IsSequence()) throw YAML::BadConversion(v.Mark());
        value.clear();
        for (const auto& e : v) value.push_back(e.as<double>());
      } else {
        value = v.as<T>();
      }
    } catch (const YAML::BadConversion&) {
      throw ConfigError(where(origin_, v.Mark()) + ": '" + name + "' has the wrong type");
    }
  }

  YAML::Node node_;
  std::string origin_, path_;
  std::set<std::string> seen_;
};

// Emits key/value pairs with their documentation as trailing comments.
class Dumper {
 public:
  explicit Dumper(YAML::Emitter& e) : e_(e) {}

  template <class T>
  void operator()(const char* key, const T& value, const char* doc) {
    e_ << YAML::Key << key << YAML::Value;
    if constexpr (std::is_same_v<T, std::vector<double>>) {
      e_ << YAML::Flow << YAML::BeginSeq;
      for (double x : value) e_ << io::format_double(x);
      e_ << YAML::EndSeq;
    } else if constexpr (std::is_same_v<T, Grid>) {
      e_ << YAML::Flow << YAML::BeginMap << YAML::Key << "min" << YAML::Value
         << io::format_double(value.min) << YAML::Key << "max" << YAML::Value
         << io::format_double(value.max) << YAML::Key << "n" << YAML::Value
         << value.n << YAML::EndMap;
    } else if constexpr (std::is_same_v<T, std::string>) {
      e_ << YAML::DoubleQuoted << value;
    } else if constexpr (std::is_same_v<T, double>) {
      e_ << io::format_double(value);
    } else {
      e_ << value;
    }
    if (doc && *doc) e_ << YAML::Comment(doc);
  }

  template <class S, class F>
  void section(const char* key, S& s, F fields) {
    e_ << YAML::Key << key << YAML::Value << YAML::BeginMap;
    fields(*this, s);
    e_ << YAML::EndMap;
  }

 private:
  YAML::Emitter& e_;
};

template <class V>
void visit(V& v, RunConfig& c) {
  v.section("system", c.system, [](auto& f, RunConfig::System& s) {
    f("zeta", s.zeta, "damping (negative: oscillating growth between switches)");
    f("tau", s.tau, "delay");
    f("epsilon", s.epsilon, "half-width of the hysteresis band");
    f("alpha", s.alpha, "switching direction h(y) = x cos(alpha) + x' sin(alpha)");
  });
  v.section("simulate", c.simulate, [](auto& f, RunConfig::Simulate& s) {
    f("t_final", s.t_final, "end of the simulation");
    f("dt", s.dt, "CSV sampling step");
    f("history", s.history, "collision | constant | random");
    f("state", s.state, "constant history value (history = constant)");
    f("u0", s.u0, "initial relay state, +1 or -1");
    f("perturbation", s.perturbation, "random start radius about y* (history = random)");
    f("scan_step", s.scan_step, "crossing scan sub-step");
  });
  v.section("surface", c.surface, [](auto& f, RunConfig::Surface& s) {
    f("tau", s.tau, "delay grid");
    f("alpha", s.alpha, "angle grid");
  });
  v.section("bifmap", c.bifmap, [](auto& f, RunConfig::Bifmap& s) {
    f("tau", s.tau, "delay grid");
    f("alpha", s.alpha, "angle grid");
  });
  v.section("unfold", c.unfold, [](auto& f, RunConfig::Unfold& s) {
    f("tau_guess", s.tau_guess, "NSC start value");
    f("alpha_guess", s.alpha_guess, "NSC start value");
    f("tau_min", s.tau_min, "NS curve continuation bounds");
    f("tau_max", s.tau_max, "");
    f("step", s.step, "NS curve arclength step");
    f("collision_points", s.collision_points, "samples of the collision curve");
  });
  v.section("family", c.family, [](auto& f, RunConfig::Family& s) {
    f("modes", s.modes, "Fourier modes N");
    f("dtau", s.dtau, "seed offset from NSC in tau");
    f("tau_max", s.tau_max, "upper tau bound");
    f("error_limit", s.error_limit, "break-up threshold of the error estimate");
    f("h_initial", s.h_initial, "initial arclength step");
    f("h_max", s.h_max, "largest arclength step");
    f("max_points", s.max_points, "");
    f("invariance_every", s.invariance_every, "invariance oracle period (points)");
    f("snapshot_every", s.snapshot_every, "curve CSV period (points)");
    f("nsc_file", s.nsc_file, "nsc.json written by unfold; solved afresh when empty");
  });
  v.section("sweep", c.sweep, [](auto& f, RunConfig::Sweep& s) {
    f("alpha", s.alpha, "swept angles");
    f("n_transient", s.n_transient, "first recorded iterate");
    f("n_total", s.n_total, "last iterate");
    f("warm_start", s.warm_start, "start each run at the previous last iterate");
    f("landmarks", s.landmarks, "compute SPC, ICC and NS along the sweep");
    f("radius", s.radius, "neighbourhood radius of the reduced map");
  });
  v.section("polygon", c.polygon, [](auto& f, RunConfig::Polygon& s) {
    f("n_transient", s.n_transient, "first recorded iterate");
    f("n_total", s.n_total, "last iterate");
    f("corner_factor", s.corner_factor, "corner threshold relative to the median turning angle");
    f("radius", s.radius, "neighbourhood radius of the reduced map");
  });
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(where(origin, e.mark) + ": " + e.msg);
  }
  RunConfig cfg;
  Loader top(root, origin, "");
  visit(top, cfg);
  top("threads", cfg.threads, "");
  top("seed", cfg.seed, "");
  top.finish();
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string dump_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  YAML::Emitter e;
  e << YAML::BeginMap;
  Dumper d(e);
  visit(d, copy);
  d("threads", copy.threads, "worker cap");
  d("seed", copy.seed, "random seed");
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid configuration: " + what);
}

void check_grid(const Grid& g, const std::string& name) {
  require(g.n >= 1, name + ".n must be at least 1");
  require(std::isfinite(g.min) && std::isfinite(g.max), name + " bounds must be finite");
  require(g.n == 1 || g.min < g.max, name + " must be a nonempty range (min < max)");
}

}  // namespace

void validate(const RunConfig& c) {
  require(c.system.tau > 0.0, "system.tau must be positive");
  require(c.system.epsilon > 0.0, "system.epsilon must be positive");
  require(std::abs(c.system.alpha) <= M_PI / 2, "system.alpha must lie in [-pi/2, pi/2]");
  require(c.simulate.t_final > 0.0, "simulate.t_final must be positive");
  require(c.simulate.dt > 0.0, "simulate.dt must be positive");
  require(c.simulate.scan_step > 0.0, "simulate.scan_step must be positive");
  require(c.simulate.perturbation > 0.0, "simulate.perturbation must be positive");
  require(c.simulate.u0 == 1 || c.simulate.u0 == -1, "simulate.u0 must be +1 or -1");
  require(c.simulate.history == "collision" || c.simulate.history == "constant" ||
              c.simulate.history == "random",
          "simulate.history must be collision, constant or random");
  require(c.simulate.state.size() == 2, "simulate.state must have two entries");
  check_grid(c.surface.tau, "surface.tau");
  check_grid(c.surface.alpha, "surface.alpha");
  check_grid(c.bifmap.tau, "bifmap.tau");
  check_grid(c.bifmap.alpha, "bifmap.alpha");
  require(c.bifmap.tau.n >= 2 && c.bifmap.alpha.n >= 2, "bifmap grids need n >= 2");
  require(c.unfold.tau_min < c.unfold.tau_max, "unfold.tau_min must be below unfold.tau_max");
  require(c.unfold.step > 0.0, "unfold.step must be positive");
  require(c.unfold.collision_points >= 2, "unfold.collision_points must be at least 2");
  require(c.family.modes >= 2, "family.modes must be at least 2");
  require(c.family.dtau > 0.0, "family.dtau must be positive");
  require(c.family.error_limit > 0.0, "family.error_limit must be positive");
  require(c.family.h_initial > 0.0 && c.family.h_max >= c.family.h_initial,
          "family steps need 0 < h_initial <= h_max");
  require(c.family.max_points >= 1, "family.max_points must be positive");
  require(c.family.invariance_every >= 0 && c.family.snapshot_every >= 0,
          "family periods must be non-negative");
  check_grid(c.sweep.alpha, "sweep.alpha");
  require(c.sweep.n_transient >= 0 && c.sweep.n_total >= c.sweep.n_transient,
          "sweep needs 0 <= n_transient <= n_total");
  require(c.sweep.radius > 0.0, "sweep.radius must be positive");
  require(c.polygon.n_transient >= 0 && c.polygon.n_total >= c.polygon.n_transient,
          "polygon needs 0 <= n_transient <= n_total");
  require(c.polygon.corner_factor > 1.0, "polygon.corner_factor must exceed 1");
  require(c.polygon.radius > 0.0, "polygon.radius must be positive");
  require(c.threads >= 1, "threads must be at least 1");
}

}  // namespace relaycoll::cli
