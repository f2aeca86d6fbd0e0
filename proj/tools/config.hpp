#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace relaycoll::cli {

/// Malformed or invalid configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computed result violates an invariant it must satisfy (exit code 4).
class ValidationBreach : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Grid {
  double min = 0.0, max = 1.0;
  int n = 2;
  std::vector<double> values() const;
};

struct RunConfig {
  struct System {
    double zeta = -0.1;
    double tau = 4.25;
    double epsilon = 0.1;
    double alpha = -0.44;
  } system;

  struct Simulate {
    double t_final = 40.0;
    double dt = 0.01;
    std::string history = "collision";  // collision | constant | random
    std::vector<double> state = {1.0, 0.0};
    int u0 = 1;
    double perturbation = 1e-3;  // radius of the random start about y*
    double scan_step = 0.05;
  } simulate;

  struct Surface {
    Grid tau{3.15, 6.28, 100};
    Grid alpha{-1.5, 1.5, 100};
  } surface;

  struct Bifmap {
    Grid tau{3.2, 6.2, 200};
    Grid alpha{-1.5, 1.5, 200};
  } bifmap;

  struct Unfold {
    double tau_guess = 4.13;
    double alpha_guess = -0.488;
    double tau_min = 3.9;
    double tau_max = 5.0;
    double step = 0.01;
    int collision_points = 200;
  } unfold;

  struct Family {
    int modes = 32;
    double dtau = 1e-3;
    double tau_max = 6.0;
    double error_limit = 1e-2;
    double h_initial = 1e-3;
    double h_max = 2e-2;
    int max_points = 2000;
    int invariance_every = 5;
    int snapshot_every = 5;
    std::string nsc_file;  // nsc.json from unfold; solved afresh when empty
  } family;

  struct Sweep {
    Grid alpha{-0.52, -0.42, 201};
    int n_transient = 40;
    int n_total = 400;
    bool warm_start = true;
    bool landmarks = true;
    double radius = 0.5;
  } sweep;

  struct Polygon {
    int n_transient = 40;
    int n_total = 400;
    double corner_factor = 10.0;
    double radius = 0.5;
  } polygon;

  int threads = 1;
  std::uint64_t seed = 1;
};

/// Reads a YAML file; absent keys keep their defaults. Throws ConfigError with
/// line and column for syntax errors, unknown keys and invalid values.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& origin = "<string>");

/// Full configuration with one comment per key.
std::string dump_config(const RunConfig& cfg);

/// Range and tolerance checks (ConfigError).
void validate(const RunConfig& cfg);

}  // namespace relaycoll::cli
