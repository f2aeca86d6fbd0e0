#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "commands.hpp"
#include "config.hpp"

using namespace relaycoll::cli;

int main(int argc, char** argv) {
  CLI::App app{"Delayed relay collisions: simulation, reduced maps, continuation and attractors"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 ok, 2 configuration, 3 numeric failure, 4 validation breach.\n\n"
             "Configuration keys and defaults:\n\n" +
             dump_config(RunConfig{}));

  std::string config_path, out_dir = "out";
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "YAML configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", threads, "worker cap")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "random seed");
  app.add_subcommand("simulate", "delayed relay trajectory: trajectory.csv, events.json");
  app.add_subcommand("surface", "collision surface sheet with epsilon > 0: surface.csv");
  app.add_subcommand("bifmap", "bifurcation curves of the collision orbit: curves.csv, special.csv");
  app.add_subcommand("unfold", "NSC point, NS and collision curves: nsc.json, ns_curve.csv, collision_curve.csv");
  app.add_subcommand("family", "colliding invariant-curve family: family.jsonl, family.json, family_curves.csv");
  app.add_subcommand("sweep", "attractor envelope along alpha: sweep.csv, landmarks.json");
  app.add_subcommand("polygon", "attractor polygon and circle map: polygon.csv, circle_map.csv, polygon.json");
  app.add_subcommand("print-config", "print the effective configuration");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Ok : ConfigFailure;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    if (threads) cfg.threads = *threads;
    if (seed) cfg.seed = *seed;
    validate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ConfigFailure;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  if (command == "print-config") {
    std::cout << dump_config(cfg);
    return Ok;
  }
  return dispatch(command, cfg, out_dir);
}
