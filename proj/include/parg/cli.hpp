#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "parg/eval.hpp"

namespace parg {

inline constexpr int kPipelineConfigVersion = 1;

/// Everything a pipeline run needs. Precedence: built-in defaults, then the
/// config file, then command-line flags.
struct PipelineConfig {
  int version = kPipelineConfigVersion;
  std::uint64_t seed = 1;
  std::string log_level = "warn";
  struct Paths {
    std::string corpus;
    std::string pairs;
    std::string checkpoint;
    std::string reports;
    bool operator==(const Paths&) const = default;
  } paths;
  /// Carries the mining and model settings as well as the experiment grid.
  eval::ExperimentConfig experiment;

  void validate() const;
};

nlohmann::json pipeline_config_to_json(const PipelineConfig& c);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Exit codes of the command-line tool.
enum ExitCode { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2 };

/// Parses arguments and runs one subcommand; never throws.
int run_cli(int argc, const char* const* argv);

}  // namespace parg
