#include "qclab/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qclab/contacto.hpp"
#include "qclab/geodesics.hpp"
#include "qclab/modulus.hpp"
#include "qclab/obstruction.hpp"
#include "qclab/planar.hpp"
#include "qclab/volume.hpp"

namespace qclab {

namespace {

nlohmann::json point_json(const Point3d& p) { return {p.x(), p.y(), p.z()}; }

std::vector<double> default_radii(const RunConfig& cfg) {
  if (!cfg.radii.empty()) return cfg.radii;
  switch (cfg.space) {
    case SpaceId::heisenberg: return log_spaced(0.5, 4.0, 5);
    case SpaceId::roto_translation: return log_spaced(8.0, 32.0, 5);
    case SpaceId::euclidean: break;
  }
  return log_spaced(1.0, 4.0, 4);
}

void run_distance(const RunConfig& cfg, RunRecord& rec) {
  const SpaceModel space{cfg.space};
  DistanceResult d;
  if (cfg.method == "graph") {
    d = cc_distance_graph(space, cfg.from, cfg.to, cfg.h.value_or(1.0 / 32.0));
  } else {
    DirectOptions opt;
    opt.seed = cfg.seed;
    d = cc_distance_direct(space, cfg.from, cfg.to, opt);
    if (!d.converged) throw NonConvergenceError("direct method did not reach the endpoint");
  }
  rec.results = {{"from", point_json(cfg.from)},
                 {"to", point_json(cfg.to)},
                 {"method", cfg.method},
                 {"value", d.value},
                 {"explicit_upper_bound", explicit_upper_bound(space, cfg.from, cfg.to)},
                 {"endpoint_error", d.endpoint_error},
                 {"converged", d.converged}};
  std::ostringstream csv;
  csv << "method,distance[length],endpoint_error[length]\n" << cfg.method << ',' << d.value << ',' << d.endpoint_error << '\n';
  rec.csv = csv.str();
}

void run_growth(const RunConfig& cfg, RunRecord& rec) {
  const SpaceModel space{cfg.space};
  const std::vector<double> radii = default_radii(cfg);
  if (cfg.command == "ball-volume") {
    const double h = cfg.h.value_or(*std::min_element(radii.begin(), radii.end()) / 6.0);
    GrowthFit vols;
    vols.radii = radii;
    vols.volumes = lattice_ball_volumes(space, radii, h);
    vols.h.assign(radii.size(), h);
    vols.method = "lattice-fixed";
    rec.results = {{"radii", vols.radii}, {"volumes", vols.volumes}, {"h", h}};
    rec.csv = to_csv(vols);
    return;
  }
  const GrowthFit fit = cfg.h_over_r ? growth_fit_scaled(space, radii, *cfg.h_over_r)
                                     : growth_fit_fixed(space, radii, cfg.h.value_or(*std::min_element(radii.begin(), radii.end()) / 6.0));
  rec.results = to_json(fit);
  rec.csv = to_csv(fit);
}

void run_modulus(const RunConfig& cfg, RunRecord& rec) {
  const double h = cfg.h.value_or(0.05);
  const PlanarGraph g = build_annulus_graph(cfg.r_in, cfg.r_out, h);
  CurveFamily<WeightedGraph> fam{&g.graph, g.inner, g.outer};
  ModulusOptions opt;
  opt.tol = cfg.tol;
  const ModulusResult m = q_modulus(fam, cfg.Q, opt);
  rec.results = to_json(m);
  rec.results["geometry"] = {{"r_in", cfg.r_in}, {"r_out", cfg.r_out}, {"h", h}, {"nodes", g.graph.num_nodes()}};
  if (cfg.Q == 2.0) rec.results["oracle"] = 2.0 * std::numbers::pi / std::log(cfg.r_out / cfg.r_in);
  std::ostringstream csv;
  csv << "Q,lower[1],upper[1],relative_gap[1]\n" << cfg.Q << ',' << m.lower << ',' << m.upper << ',' << m.relative_gap << '\n';
  rec.csv = csv.str();
  if (!m.converged) rec.status = exit_nonconvergence;
}

void run_loewner(const RunConfig& cfg, RunRecord& rec) {
  const std::vector<double> t = cfg.t.empty() ? std::vector<double>{1.0, 0.5, 0.25} : cfg.t;
  LoewnerOptions opt;
  if (cfg.h) opt.h_over_scale = *cfg.h / cfg.scale;
  opt.modulus.tol = cfg.tol;
  const auto samples = loewner_series(SpaceModel{cfg.space}, cfg.Q, t, cfg.scale, opt);
  rec.results = nlohmann::json::array();
  std::ostringstream csv;
  csv << "t[1],separation[length],min_diam[length],lower[1],upper[1]\n";
  for (const auto& s : samples) {
    rec.results.push_back(to_json(s));
    csv << s.t << ',' << s.separation << ',' << s.min_diam << ',' << s.modulus.lower << ',' << s.modulus.upper << '\n';
  }
  rec.csv = csv.str();
}

void run_obstruction(const RunConfig& cfg, RunRecord& rec) {
  ObstructionConfig oc;
  oc.Q = cfg.Q;
  oc.N = cfg.N;
  oc.indices = cfg.indices;
  oc.seed = cfg.seed;
  oc.sigma.seed = cfg.seed;
  oc.log = [](const std::string& s) { std::cerr << s << '\n'; };
  const ObstructionReport r = run_obstruction_experiment(oc);
  rec.results = to_json(r);
  rec.csv = to_csv(r);
  if (!r.completed) rec.status = r.error_kind == "resource-cap" || r.error_kind == "coverage" ? exit_resource_cap : exit_nonconvergence;
}

void run_bounded_loewner(const RunConfig& cfg, RunRecord& rec) {
  const std::vector<double> t = cfg.t.empty() ? std::vector<double>{1.0, 0.5} : cfg.t;
  ObstructionConfig oc;
  oc.Q = cfg.Q;
  oc.N = cfg.N;
  oc.seed = cfg.seed;
  oc.sigma.seed = cfg.seed;
  const ObstructionParams p{cfg.Q, cfg.N, cfg.C0, cfg.R0, cfg.L, cfg.b};
  rec.results = to_json(bounded_loewner_check(SpaceModel{cfg.space}, p, t, oc));
}

void run_contacto(const RunConfig& cfg, RunRecord& rec) {
  const int n = cfg.samples.value_or(10000);
  const double box = cfg.box.value_or(5.0);
  const PullbackReport pb = pullback_check(n, cfg.seed, box);
  const HorizontalityReport hz = pushforward_horizontality_check(n, cfg.seed, box);
  DirectOptions opt;
  opt.seed = cfg.seed;
  const BilipEstimate bl = local_bilip_estimate(1.0, 20, cfg.seed, opt);
  rec.results = {{"samples", n},
                 {"max_pullback_error", pb.max_error},
                 {"max_pullback_error_fd", pb.max_error_fd},
                 {"max_horizontality_defect", hz.max_defect},
                 {"bilip_constants", to_json(bl)}};
}

void run_qi(const RunConfig& cfg, RunRecord& rec) {
  QIOptions opt;
  opt.h = cfg.h.value_or(1.0);
  opt.seed = cfg.seed;
  rec.results = to_json(estimate_qi_constants(cfg.samples.value_or(1000), cfg.box.value_or(50.0), opt));
}

void run_planar(const RunConfig& cfg, RunRecord& rec) {
  const PlanarExample e = parse_planar_example(cfg.example);
  const std::vector<double> radii = cfg.radii.empty() ? std::vector<double>{1e-2, 1e-3} : cfg.radii;
  const Vector2d z(cfg.point[0], cfg.point[1]);
  const DilatationEstimate d = dilatation_estimate(e, z, radii, cfg.samples.value_or(256), cfg.lambda);
  rec.results = {{"example", cfg.example}, {"dilatation", to_json(d)}, {"image", {0.0, 0.0}}};
  const Vector2d fz = planar_map(e, z, cfg.lambda);
  rec.results["image"] = {fz.x(), fz.y()};
  if (e == PlanarExample::stretch) {
    rec.results["shape_fit"] = to_json(shape_inclusion_fit(cfg.lambda, 10000));
    rec.results["growth"] = to_json(stretched_strip_growth(cfg.lambda, {10.0, 20.0, 40.0, 80.0}));
  }
  if (e == PlanarExample::strip) rec.results["properness_witness"] = properness_witness(8);
  std::ostringstream csv;
  csv.precision(17);
  csv << "example,point_x[1],point_y[1],radius[1],estimate[1]\n";
  for (std::size_t i = 0; i < d.radii.size(); ++i)
    csv << cfg.example << ',' << z.x() << ',' << z.y() << ',' << d.radii[i] << ',' << d.H[i] << '\n';
  rec.csv = csv.str();
}

}  // namespace

RunRecord dispatch(const RunConfig& cfg) {
  if (auto issues = check_config(cfg); !issues.empty()) throw ConfigError(std::move(issues));
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config = to_json(cfg);
  rec.seed = cfg.seed;
  const std::string& c = cfg.command;
  if (c == "distance") run_distance(cfg, rec);
  else if (c == "ball-volume" || c == "growth-fit") run_growth(cfg, rec);
  else if (c == "modulus") run_modulus(cfg, rec);
  else if (c == "loewner") run_loewner(cfg, rec);
  else if (c == "obstruction") run_obstruction(cfg, rec);
  else if (c == "bounded-loewner") run_bounded_loewner(cfg, rec);
  else if (c == "contacto-check") run_contacto(cfg, rec);
  else if (c == "qi-estimate") run_qi(cfg, rec);
  else if (c == "planar") run_planar(cfg, rec);
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

nlohmann::json payload(const RunRecord& r) {
  return {{"schema_version", kSchemaVersion},
          {"artifact_version", kArtifactVersion},
          {"seed", r.seed},
          {"config", r.config},
          {"results", r.results},
          {"status", r.status}};
}

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json j = payload(r);
  j["wall_time_s"] = r.wall_seconds;
  return j;
}

std::filesystem::path output_directory(const RunConfig& cfg) {
  if (const char* env = std::getenv("QCLAB_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return cfg.output_dir;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::filesystem::path write_record(const RunRecord& r, const RunConfig& cfg) {
  const std::filesystem::path dir = output_directory(cfg);
  std::filesystem::create_directories(dir);
  const std::string stem = cfg.command + "-" + std::to_string(cfg.seed);
  const std::filesystem::path json_path = dir / (stem + ".json");
  write_atomic(json_path, to_json(r).dump(2) + "\n");
  if (cfg.format == OutputFormat::csv && !r.csv.empty()) {
    const std::filesystem::path csv_path = dir / (stem + ".csv");
    write_atomic(csv_path, r.csv);
    return csv_path;
  }
  return json_path;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Experiments on sub-Riemannian model spaces"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "Print this help message and exit");
  RunConfig cfg;
  std::string config_path;
  bool print = false;

  std::string space = "heis";
  std::vector<double> from, to;
  double h = 0.0, h_over_r = 0.0, box = 0.0;
  int samples = 0;
  std::string format = "json";

  auto add_common = [&](CLI::App* sub) {
    sub->set_help_flag("--help", "Print this help message and exit");
    sub->add_option("--space", space, "heis, rt or e3");
    sub->add_option("-Q,--Q", cfg.Q, "Homogeneous dimension");
    sub->add_option("-N,--N", cfg.N, "Volume growth exponent");
    sub->add_option("--h", h, "Lattice resolution");
    sub->add_option("--h-over-r", h_over_r, "Resolution relative to the radius");
    sub->add_option("--radii", cfg.radii, "Comma separated radii")->delimiter(',');
    sub->add_option("--indices", cfg.indices, "Comma separated indices")->delimiter(',');
    sub->add_option("--t", cfg.t, "Comma separated t values")->delimiter(',');
    sub->add_option("--from", from, "x,y,z")->delimiter(',')->expected(3);
    sub->add_option("--to", to, "x,y,z")->delimiter(',')->expected(3);
    sub->add_option("--method", cfg.method, "direct or graph");
    sub->add_option("--samples", samples, "Sample count");
    sub->add_option("--box", box, "Sampling box size");
    sub->add_option("--scale", cfg.scale, "Segment length for loewner");
    sub->add_option("--r-in", cfg.r_in, "Annulus inner radius");
    sub->add_option("--r-out", cfg.r_out, "Annulus outer radius");
    sub->add_option("--tol", cfg.tol, "Relative modulus tolerance");
    sub->add_option("--C0", cfg.C0, "Volume constant");
    sub->add_option("--R0", cfg.R0, "Volume radius");
    sub->add_option("--L", cfg.L, "Quasi-isometry factor");
    sub->add_option("--b", cfg.b, "Quasi-isometry offset");
    sub->add_option("--example", cfg.example, "half-strip, strip, stretch or identity");
    sub->add_option("--point", cfg.point, "x,y")->delimiter(',')->expected(2);
    sub->add_option("--lambda", cfg.lambda, "Stretch exponent in (1, 2)");
    sub->add_option("--seed", cfg.seed, "Random seed");
    sub->add_option("--output-dir", cfg.output_dir, "Output directory");
    sub->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_flag("--print", print, "Also print the record to stdout");
  };
  for (const auto& name : command_names()) add_common(app.add_subcommand(name, "Run " + name));
  auto* run = app.add_subcommand("run", "Run a JSON config file");
  run->add_option("config", config_path, "Config file")->required();
  run->add_flag("--print", print, "Also print the record to stdout");
  auto* check = app.add_subcommand("validate", "Validate a JSON config file");
  check->add_option("config", config_path, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub == check) {
      const RunConfig c = validate_config(config_path);
      std::cout << to_json(c).dump(2) << '\n';
      return exit_ok;
    }
    if (sub == run) {
      cfg = validate_config(config_path);
    } else {
      cfg.command = sub->get_name();
      cfg.space = parse_space(space);
      if (sub->count("--h") > 0) cfg.h = h;
      if (sub->count("--h-over-r") > 0) cfg.h_over_r = h_over_r;
      if (sub->count("--samples") > 0) cfg.samples = samples;
      if (sub->count("--box") > 0) cfg.box = box;
      if (from.size() == 3) cfg.from = Point3d(from[0], from[1], from[2]);
      if (to.size() == 3) cfg.to = Point3d(to[0], to[1], to[2]);
      cfg.format = format == "csv" ? OutputFormat::csv : OutputFormat::json;
    }
    const RunRecord rec = dispatch(cfg);
    const auto path = write_record(rec, cfg);
    if (print) std::cout << to_json(rec).dump(2) << '\n';
    std::cerr << "wrote " << path.string() << '\n';
    return rec.status;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return exit_usage;
  } catch (const NonConvergenceError& e) {
    std::cerr << "non-convergence: " << e.what() << '\n';
    return exit_nonconvergence;
  } catch (const ResourceCapError& e) {
    std::cerr << "resource cap: " << e.what() << '\n';
    return exit_resource_cap;
  } catch (const CoverageError& e) {
    std::cerr << "coverage: " << e.what() << '\n';
    return exit_resource_cap;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_nonconvergence;
  }
}

}  // namespace qclab
