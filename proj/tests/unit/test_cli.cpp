#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "qclab/cli.hpp"

using namespace qclab;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("qclab-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

bool has_issue(const ConfigError& e, const std::string& key, const std::string& constraint) {
  for (const auto& i : e.issues())
    if (i.key == key && i.constraint.find(constraint) != std::string::npos) return true;
  return false;
}

int call(std::vector<std::string> args) {
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("minimal obstruction config gets defaults") {
    const RunConfig c = config_from_json({{"command", "obstruction"}});
    CHECK(c.Q == 4.0);
    CHECK(c.N == 3.0);
    CHECK(c.seed == 0);
    CHECK(c.format == OutputFormat::json);
  }

  TEST_CASE("N = Q is rejected with the violated precondition") {
    try {
      config_from_json({{"command", "obstruction"}, {"N", 4}, {"Q", 4}});
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(has_issue(e, "N", "N < Q required"));
    }
  }

  TEST_CASE("every problem is listed") {
    try {
      config_from_json({{"command", "distance"}, {"h", -1.0}, {"Q", "four"}, {"colour", 1}, {"from", {1, 2}}});
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(has_issue(e, "h", "h > 0"));
      CHECK(has_issue(e, "Q", "wrong type"));
      CHECK(has_issue(e, "colour", "unknown key"));
      CHECK(has_issue(e, "from", "three coordinates"));
      CHECK(std::string(e.what()).find("h = -1") != std::string::npos);
    }
    CHECK_THROWS_AS(config_from_json({{"Q", 3}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"command", "teleport"}}), ConfigError);
  }

  TEST_CASE("config files") {
    const auto dir = scratch_dir("config");
    {
      std::ofstream(dir / "ok.json") << R"({"command": "planar", "example": "stretch", "point": [1, 0], "seed": 3})";
      std::ofstream(dir / "bad.json") << "{not json";
    }
    const RunConfig c = validate_config(dir / "ok.json");
    CHECK(c.example == "stretch");
    CHECK(c.seed == 3);
    CHECK_THROWS_AS(validate_config(dir / "bad.json"), ConfigError);
    CHECK_THROWS_AS(validate_config(dir / "missing.json"), ConfigError);
  }

  TEST_CASE("distance in the heisenberg group") {
    RunConfig c;
    c.command = "distance";
    c.space = SpaceId::heisenberg;
    const RunRecord r = dispatch(c);
    CHECK(r.results["value"].get<double>() == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("contacto-check payload") {
    RunConfig c;
    c.command = "contacto-check";
    c.samples = 10000;
    const RunRecord r = dispatch(c);
    CHECK(r.results["samples"] == 10000);
    CHECK(r.results["max_pullback_error"].get<double>() <= 1e-10);
    CHECK(r.results.contains("max_horizontality_defect"));
    CHECK(r.results.contains("bilip_constants"));
  }

  TEST_CASE("identical config and seed give identical payloads") {
    RunConfig c;
    c.command = "contacto-check";
    c.samples = 500;
    c.seed = 17;
    const std::string a = payload(dispatch(c)).dump();
    const std::string b = payload(dispatch(c)).dump();
    CHECK(a == b);
    c.seed = 18;
    CHECK(payload(dispatch(c)).dump() != a);
  }

  TEST_CASE("records are written atomically to the override directory") {
    const auto dir = scratch_dir("out");
    ::setenv("QCLAB_OUTPUT_DIR", dir.c_str(), 1);
    RunConfig c;
    c.command = "planar";
    c.output_dir = "ignored";
    c.format = OutputFormat::csv;
    const RunRecord r = dispatch(c);
    const auto path = write_record(r, c);
    ::unsetenv("QCLAB_OUTPUT_DIR");
    CHECK(path.parent_path() == dir);
    CHECK(std::filesystem::exists(dir / "planar-0.json"));
    CHECK(std::filesystem::exists(dir / "planar-0.csv"));
    CHECK_FALSE(std::filesystem::exists(dir / "planar-0.json.tmp"));
    std::ifstream in(dir / "planar-0.json");
    const auto j = nlohmann::json::parse(in);
    CHECK(j["schema_version"] == kSchemaVersion);
    CHECK(j.contains("wall_time_s"));
    CHECK(j["seed"] == 0);
    std::ifstream csv(dir / "planar-0.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header.find("radius[1]") != std::string::npos);
  }

  TEST_CASE("exit codes") {
    const auto dir = scratch_dir("exit");
    CHECK(call({"qclab", "distance", "--no-such-flag"}) == exit_usage);
    CHECK(call({"qclab", "teleport"}) == exit_usage);
    CHECK(call({"qclab", "obstruction", "--N", "4", "--Q", "4", "--output-dir", dir.string()}) == exit_usage);
    CHECK(call({"qclab", "planar", "--example", "strip", "--point", "0,1", "--output-dir", dir.string()}) == exit_ok);
    CHECK(std::filesystem::exists(dir / "planar-0.json"));
    // A graph lattice far beyond the node cap.
    CHECK(call({"qclab", "distance", "--method", "graph", "--to", "100,0,0", "--h", "0.001", "--output-dir",
                dir.string()}) == exit_resource_cap);
  }
}
