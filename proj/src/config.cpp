#include "qclab/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "qclab/planar.hpp"

namespace qclab {

namespace {

std::string summary(const std::vector<ConfigIssue>& issues) {
  std::ostringstream out;
  out << "invalid configuration";
  for (const auto& i : issues) out << "\n  " << i.key << " = " << i.value << ": " << i.constraint;
  return out.str();
}

template <class T>
std::string show(const T& v) {
  return nlohmann::json(v).dump();
}

bool is(const RunConfig& cfg, std::initializer_list<const char*> names) {
  return std::any_of(names.begin(), names.end(), [&](const char* n) { return cfg.command == n; });
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::invalid_argument(summary(issues)), issues_(std::move(issues)) {}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"distance",        "ball-volume",    "growth-fit",  "modulus",
                                                 "loewner",         "obstruction",    "bounded-loewner",
                                                 "contacto-check",  "qi-estimate",    "planar"};
  return names;
}

std::vector<ConfigIssue> check_config(const RunConfig& cfg) {
  std::vector<ConfigIssue> out;
  auto need = [&](bool ok, const std::string& key, const std::string& value, const std::string& constraint) {
    if (!ok) out.push_back({key, value, constraint});
  };
  const auto& names = command_names();
  need(std::find(names.begin(), names.end(), cfg.command) != names.end(), "command", cfg.command, "unknown command");
  need(cfg.Q > 1.0, "Q", show(cfg.Q), "Q > 1 required");
  if (is(cfg, {"obstruction", "bounded-loewner"})) {
    need(cfg.N > 0.0, "N", show(cfg.N), "N > 0 required");
    need(cfg.N < cfg.Q, "N", show(cfg.N), "N < Q required");
  }
  if (cfg.h) need(*cfg.h > 0.0, "h", show(*cfg.h), "h > 0 required");
  if (cfg.h_over_r) need(*cfg.h_over_r > 0.0, "h_over_r", show(*cfg.h_over_r), "h_over_r > 0 required");
  for (double r : cfg.radii) need(r > 0.0, "radii", show(r), "radii must be positive");
  if (is(cfg, {"growth-fit"})) need(cfg.radii.empty() || cfg.radii.size() >= 3, "radii", show(cfg.radii), "at least three radii");
  for (int n : cfg.indices) need(n >= 1, "indices", show(n), "indices must be positive");
  for (double t : cfg.t) need(t > 0.0, "t", show(t), "t must be positive");
  need(cfg.method == "direct" || cfg.method == "graph", "method", cfg.method, "method is direct or graph");
  if (cfg.samples) need(*cfg.samples >= 1, "samples", show(*cfg.samples), "samples >= 1 required");
  if (cfg.box) need(*cfg.box > 0.0, "box", show(*cfg.box), "box > 0 required");
  need(cfg.scale > 0.0, "scale", show(cfg.scale), "scale > 0 required");
  need(cfg.r_in > 0.0, "r_in", show(cfg.r_in), "r_in > 0 required");
  need(cfg.r_out > cfg.r_in, "r_out", show(cfg.r_out), "r_out > r_in required");
  need(cfg.tol > 0.0 && cfg.tol < 1.0, "tol", show(cfg.tol), "0 < tol < 1 required");
  need(cfg.C0 > 0.0, "C0", show(cfg.C0), "C0 > 0 required");
  need(cfg.R0 > 0.0, "R0", show(cfg.R0), "R0 > 0 required");
  need(cfg.L >= 1.0, "L", show(cfg.L), "L >= 1 required");
  need(cfg.b > 0.0, "b", show(cfg.b), "b > 0 required");
  need(cfg.from.allFinite() && cfg.to.allFinite(), "from/to", "", "points must be finite");
  if (is(cfg, {"planar"})) {
    bool known = true;
    try {
      parse_planar_example(cfg.example);
    } catch (const std::invalid_argument&) {
      known = false;
    }
    need(known, "example", cfg.example, "example is half-strip, strip, stretch or identity");
    need(cfg.point.size() == 2, "point", show(cfg.point), "point has two coordinates");
    if (cfg.example == "stretch") need(cfg.lambda > 1.0 && cfg.lambda < 2.0, "lambda", show(cfg.lambda), "1 < lambda < 2 required");
  }
  need(!cfg.output_dir.empty(), "output_dir", cfg.output_dir, "output_dir must be nonempty");
  return out;
}

RunConfig config_from_json(const nlohmann::json& j) {
  std::vector<ConfigIssue> issues;
  RunConfig cfg;
  if (!j.is_object()) throw ConfigError({{"<root>", j.dump(), "config must be an object"}});
  auto read = [&](const std::string& key, auto& target) {
    try {
      using T = std::decay_t<decltype(target)>;
      target = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      issues.push_back({key, j.at(key).dump(), "wrong type"});
    }
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "command") read(key, cfg.command);
    else if (key == "space") {
      std::string s;
      read(key, s);
      try {
        cfg.space = parse_space(s);
      } catch (const std::invalid_argument&) {
        issues.push_back({key, value.dump(), "space is heis, rt or e3"});
      }
    } else if (key == "Q") read(key, cfg.Q);
    else if (key == "N") read(key, cfg.N);
    else if (key == "h") { double v = 0.0; read(key, v); cfg.h = v; }
    else if (key == "h_over_r") { double v = 0.0; read(key, v); cfg.h_over_r = v; }
    else if (key == "radii") read(key, cfg.radii);
    else if (key == "indices") read(key, cfg.indices);
    else if (key == "t") read(key, cfg.t);
    else if (key == "from" || key == "to") {
      std::vector<double> v;
      read(key, v);
      if (v.size() != 3) issues.push_back({key, value.dump(), "point has three coordinates"});
      else (key == "from" ? cfg.from : cfg.to) = Point3d(v[0], v[1], v[2]);
    } else if (key == "method") read(key, cfg.method);
    else if (key == "samples") { int v = 0; read(key, v); cfg.samples = v; }
    else if (key == "box") { double v = 0.0; read(key, v); cfg.box = v; }
    else if (key == "scale") read(key, cfg.scale);
    else if (key == "r_in") read(key, cfg.r_in);
    else if (key == "r_out") read(key, cfg.r_out);
    else if (key == "tol") read(key, cfg.tol);
    else if (key == "C0") read(key, cfg.C0);
    else if (key == "R0") read(key, cfg.R0);
    else if (key == "L") read(key, cfg.L);
    else if (key == "b") read(key, cfg.b);
    else if (key == "example") read(key, cfg.example);
    else if (key == "point") read(key, cfg.point);
    else if (key == "lambda") read(key, cfg.lambda);
    else if (key == "seed") read(key, cfg.seed);
    else if (key == "output_dir") read(key, cfg.output_dir);
    else if (key == "format") {
      std::string s;
      read(key, s);
      if (s == "json") cfg.format = OutputFormat::json;
      else if (s == "csv") cfg.format = OutputFormat::csv;
      else issues.push_back({key, value.dump(), "format is json or csv"});
    } else issues.push_back({key, value.dump(), "unknown key"});
  }
  if (!j.contains("command")) issues.push_back({"command", "", "missing required key"});
  else {
    auto more = check_config(cfg);
    issues.insert(issues.end(), more.begin(), more.end());
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

RunConfig validate_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{"<file>", path.string(), "file not readable"}});
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({{"<file>", path.string(), std::string("not valid JSON: ") + e.what()}});
  }
  return config_from_json(j);
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j = {{"command", cfg.command},
                      {"space", std::string(to_string(cfg.space))},
                      {"Q", cfg.Q},
                      {"N", cfg.N},
                      {"radii", cfg.radii},
                      {"indices", cfg.indices},
                      {"t", cfg.t},
                      {"from", {cfg.from.x(), cfg.from.y(), cfg.from.z()}},
                      {"to", {cfg.to.x(), cfg.to.y(), cfg.to.z()}},
                      {"method", cfg.method},
                      {"scale", cfg.scale},
                      {"r_in", cfg.r_in},
                      {"r_out", cfg.r_out},
                      {"tol", cfg.tol},
                      {"C0", cfg.C0},
                      {"R0", cfg.R0},
                      {"L", cfg.L},
                      {"b", cfg.b},
                      {"example", cfg.example},
                      {"point", cfg.point},
                      {"lambda", cfg.lambda},
                      {"seed", cfg.seed},
                      {"format", cfg.format == OutputFormat::json ? "json" : "csv"}};
  j["h"] = cfg.h ? nlohmann::json(*cfg.h) : nlohmann::json(nullptr);
  j["h_over_r"] = cfg.h_over_r ? nlohmann::json(*cfg.h_over_r) : nlohmann::json(nullptr);
  j["samples"] = cfg.samples ? nlohmann::json(*cfg.samples) : nlohmann::json(nullptr);
  j["box"] = cfg.box ? nlohmann::json(*cfg.box) : nlohmann::json(nullptr);
  return j;
}

}  // namespace qclab
