#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qclab/spaces.hpp"

namespace qclab {

enum class OutputFormat { json, csv };

/// Commands: distance, ball-volume, growth-fit, modulus, loewner, obstruction,
/// bounded-loewner, contacto-check, qi-estimate, planar. Unset optionals take the
/// command's default.
struct RunConfig {
  std::string command;
  SpaceId space = SpaceId::heisenberg;
  double Q = 4.0;
  double N = 3.0;
  std::optional<double> h;
  std::optional<double> h_over_r;
  std::vector<double> radii;
  std::vector<int> indices;
  std::vector<double> t;
  Point3d from = Point3d::Zero();
  Point3d to = Point3d(1.0, 0.0, 0.0);
  std::string method = "direct";
  std::optional<int> samples;
  std::optional<double> box;
  double scale = 1.0;
  double r_in = 1.0;
  double r_out = 2.0;
  double tol = 0.02;
  /// Quasi-isometry parameters for bounded-loewner.
  double C0 = 2.0;
  double R0 = 4.0;
  double L = 1.0;
  double b = 1.0;
  std::string example = "strip";
  std::vector<double> point = {0.0, 1.0};
  double lambda = 1.5;
  std::uint64_t seed = 0;
  std::string output_dir = "qclab-out";
  OutputFormat format = OutputFormat::json;
};

struct ConfigIssue {
  std::string key;
  std::string value;
  std::string constraint;
};

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

const std::vector<std::string>& command_names();

/// Every violated precondition of the command, empty when cfg is valid.
std::vector<ConfigIssue> check_config(const RunConfig& cfg);

/// Builds a config from a JSON object whose keys are the RunConfig field names; points
/// are arrays. Unknown keys, type mismatches and failed preconditions are all collected
/// into one ConfigError.
RunConfig config_from_json(const nlohmann::json& j);

/// Reads and validates a JSON config file.
RunConfig validate_config(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& cfg);

}  // namespace qclab
