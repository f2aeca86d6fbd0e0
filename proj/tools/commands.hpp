#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"

namespace relaycoll::cli {

enum ExitCode { Ok = 0, ConfigFailure = 2, NumericFailure = 3, ValidationFailure = 4 };

/// Identifier of the source tree the binary was built from.
const char* build_id();

/// Output directory plus the bookkeeping that ends up in manifest.json.
class Run {
 public:
  Run(std::string command, RunConfig cfg, std::filesystem::path out);

  const RunConfig& config() const { return cfg_; }
  std::string path(const std::string& file);
  void check(const std::string& name, nlohmann::ordered_json value) { checks_[name] = std::move(value); }
  void write_manifest() const;

 private:
  std::string command_;
  RunConfig cfg_;
  std::filesystem::path out_;
  std::vector<std::string> outputs_;
  nlohmann::ordered_json checks_ = nlohmann::ordered_json::object();
};

void cmd_simulate(Run& run);
void cmd_surface(Run& run);
void cmd_bifmap(Run& run);
void cmd_unfold(Run& run);
void cmd_family(Run& run);
void cmd_sweep(Run& run);
void cmd_polygon(Run& run);

const std::vector<std::string>& command_names();

/// Runs `command` and maps failures onto exit codes, reporting them on stderr.
int dispatch(const std::string& command, const RunConfig& cfg, const std::filesystem::path& out);

}  // namespace relaycoll::cli
