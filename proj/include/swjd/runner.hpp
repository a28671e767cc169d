#pragma once

#include "swjd/config.hpp"

#include <string>
#include <vector>

namespace swjd {

struct Artifact {
  std::string name;  // file name, e.g. "path.csv"
  std::string data;
};

struct CommandOutput {
  /// Result document: command, model, resolved params, result, passed, summary.
  std::string json;
  /// False when the command's check failed (e.g. a positive Lyapunov margin).
  bool passed = true;
  std::string summary;
  std::vector<Artifact> artifacts;
};

std::vector<std::string> command_names();
bool is_command(const std::string& name);

/// Runs one subcommand. `params_json` is a JSON object; unknown keys and
/// out-of-range values throw InvalidInput before any simulation starts.
CommandOutput run_command(const LoadedModel& model, const std::string& command, const std::string& params_json);

}  // namespace swjd
