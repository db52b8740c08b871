#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "morphrl/trainer.hpp"

namespace morphrl {

/// A full training run description: hyperparameters plus the robot roster.
/// Robot entries are morphology file paths; holdout entries are evaluated
/// but never trained on.
struct RunConfig {
  TrainConfig train;
  std::vector<std::string> robots;
  std::vector<std::string> holdouts;
};

/// Parses the line-oriented config grammar: `[section]` headers with
/// `key: value` entries. Sections are [train], [ranges], [curriculum],
/// [env] and [robots]; keys before any section count as [train]. Repeated
/// keys are rejected except robot/holdout, which accumulate.
RunConfig parse_run_config(std::string_view text);

/// Loads a config file; relative robot paths are resolved against the
/// config file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace morphrl
