#include "qclab/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/QR>

namespace qclab {

namespace {

void check_radii(const std::vector<double>& radii) {
  for (double r : radii)
    if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("radii must be positive and finite");
}

}  // namespace

double ball_volume(const FlowGraph& g, NodeId center, double r) {
  if (center < 0 || center >= g.num_nodes()) throw std::out_of_range("center node not in graph");
  if (!(r >= 0.0)) throw std::invalid_argument("radius must be nonnegative");
  if (g.params.radius_hint > 0.0 && r > g.params.radius_hint * (1.0 + 1e-12))
    throw CoverageError("radius " + std::to_string(r) + " exceeds graph coverage " + std::to_string(g.params.radius_hint));
  const ShortestPaths sp = dijkstra(g.graph, center, LengthWeight{}, r);
  double v = 0.0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (sp.dist[u] > r) continue;
    if (g.lattice && g.lattice->on_boundary(u)) throw CoverageError("ball reaches the edge of the graph box");
    v += g.node_measure(u);
  }
  return v;
}

std::vector<double> ball_volumes(const LatticeGraph& g, NodeId center, const std::vector<double>& radii) {
  check_radii(radii);
  const double rmax = *std::max_element(radii.begin(), radii.end());
  const ShortestPaths sp = dijkstra(g, center, LengthWeight{}, rmax);
  std::vector<double> reached;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (sp.dist[u] > rmax) continue;
    if (g.on_boundary(u)) throw CoverageError("ball reaches the edge of the lattice box");
    reached.push_back(sp.dist[u]);
  }
  std::sort(reached.begin(), reached.end());
  std::vector<double> out;
  for (double r : radii) {
    const auto count = std::upper_bound(reached.begin(), reached.end(), r) - reached.begin();
    out.push_back(static_cast<double>(count) * g.cell_volume());
  }
  return out;
}

std::vector<double> lattice_ball_volumes(const SpaceModel& space, const std::vector<double>& radii, double h,
                                         GraphOptions opt) {
  check_radii(radii);
  const double rmax = *std::max_element(radii.begin(), radii.end());
  for (;;) {
    const LatticeSpec spec = flow_lattice_spec(space, Point3d::Zero(), rmax, h, opt);
    const Index3 ext = spec.hi - spec.lo + Index3::Ones();
    if (std::int64_t{ext[0]} * ext[1] * ext[2] > opt.max_implicit_nodes)
      throw ResourceCapError("volume lattice exceeds the node cap");
    try {
      const LatticeGraph lg(spec);
      return ball_volumes(lg, *lg.nearest(Point3d::Zero()), radii);
    } catch (const CoverageError&) {
      opt.margin_cells = 2 * opt.margin_cells + 1;
    }
  }
}

GrowthFit fit_growth(std::vector<double> radii, std::vector<double> volumes) {
  if (radii.size() != volumes.size()) throw std::invalid_argument("radii and volumes differ in length");
  if (radii.size() < 3) throw std::invalid_argument("growth fit needs at least 3 radii");
  check_radii(radii);
  const auto n = static_cast<Eigen::Index>(radii.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(volumes[i] > 0.0)) throw std::invalid_argument("volumes must be positive for a log-log fit");
    a(i, 0) = 1.0;
    a(i, 1) = std::log(radii[i]);
    y[i] = std::log(volumes[i]);
  }
  const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(y);
  GrowthFit fit;
  fit.radii = std::move(radii);
  fit.volumes = std::move(volumes);
  fit.intercept = coef[0];
  fit.exponent = coef[1];
  fit.residual = std::sqrt((a * coef - y).squaredNorm() / static_cast<double>(n));
  return fit;
}

GrowthFit growth_exponent(const FlowGraph& g, NodeId center, const std::vector<double>& radii) {
  std::vector<double> vols;
  for (double r : radii) vols.push_back(ball_volume(g, center, r));
  GrowthFit fit = fit_growth(radii, std::move(vols));
  fit.h.assign(fit.radii.size(), g.params.h);
  fit.method = "graph";
  return fit;
}

GrowthFit growth_fit_fixed(const SpaceModel& space, const std::vector<double>& radii, double h,
                           const GraphOptions& opt) {
  check_radii(radii);
  GrowthFit fit = fit_growth(radii, lattice_ball_volumes(space, radii, h, opt));
  fit.h.assign(fit.radii.size(), h);
  fit.method = "lattice-fixed";
  return fit;
}

GrowthFit growth_fit_scaled(const SpaceModel& space, const std::vector<double>& radii, double h_over_r,
                            const GraphOptions& opt) {
  check_radii(radii);
  if (!(h_over_r > 0.0)) throw std::invalid_argument("h_over_r must be positive");
  std::vector<double> vols;
  std::vector<double> hs;
  for (double r : radii) {
    const double h = h_over_r * r;
    vols.push_back(lattice_ball_volumes(space, {r}, h, opt).front());
    hs.push_back(h);
  }
  GrowthFit fit = fit_growth(radii, std::move(vols));
  fit.h = std::move(hs);
  fit.method = "lattice-scaled";
  return fit;
}

std::vector<double> log_spaced(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw std::invalid_argument("log_spaced: need 0 < lo <= hi and n >= 1");
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return out;
}

nlohmann::json to_json(const GrowthFit& fit) {
  return {{"radii", fit.radii},     {"volumes", fit.volumes},     {"h", fit.h},
          {"method", fit.method},   {"exponent", fit.exponent},   {"intercept", fit.intercept},
          {"residual", fit.residual}};
}

std::string to_csv(const GrowthFit& fit) {
  std::ostringstream os;
  os.precision(17);
  os << "radius[cc_length],volume[lebesgue],method,h[cc_length]\n";
  for (std::size_t i = 0; i < fit.radii.size(); ++i)
    os << fit.radii[i] << ',' << fit.volumes[i] << ',' << fit.method << ',' << (i < fit.h.size() ? fit.h[i] : 0.0) << '\n';
  return os.str();
}

}  // namespace qclab
