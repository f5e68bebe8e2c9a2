#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "qclab/config.hpp"

namespace qclab {

inline constexpr const char* kSchemaVersion = "qclab.run/1";
inline constexpr const char* kArtifactVersion = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_nonconvergence = 2, exit_resource_cap = 3 };

struct RunRecord {
  nlohmann::json config;
  nlohmann::json results;
  /// Rows with a header naming units; empty for commands without a table.
  std::string csv;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  /// Nonzero when the command finished with a partial result.
  int status = exit_ok;
};

/// Runs the configured command. Throws ConfigError when cfg fails check_config.
RunRecord dispatch(const RunConfig& cfg);

/// schema_version, artifact_version, seed, config, results, wall_time_s.
nlohmann::json to_json(const RunRecord& r);
/// The same without wall_time_s; identical for identical (config, seed).
nlohmann::json payload(const RunRecord& r);

/// The output directory: QCLAB_OUTPUT_DIR when set, else cfg.output_dir.
std::filesystem::path output_directory(const RunConfig& cfg);

/// Writes <command>-<seed>.json (and .csv for format csv) by write-then-rename.
/// Returns the path of the main output.
std::filesystem::path write_record(const RunRecord& r, const RunConfig& cfg);

void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace qclab
