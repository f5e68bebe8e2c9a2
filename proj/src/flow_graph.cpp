#include "qclab/flow_graph.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace qclab {

namespace {

constexpr double kPi = 3.14159265358979323846;

int effective_order(const SpaceModel& space, int order) {
  if (order > 0) return order;
  return space.id == SpaceId::euclidean ? 3 : 1;
}

}  // namespace

Vector3d default_steps(const SpaceModel& space, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("resolution h must be positive");
  switch (space.id) {
    case SpaceId::heisenberg:
      // Moves with integer controls change t by even multiples of h^2.
      return {h, h, 2.0 * h * h};
    case SpaceId::roto_translation: {
      const double dth = std::min(h, 0.5);
      return {h, h * dth, dth};
    }
    case SpaceId::euclidean:
      break;
  }
  return {h, h, h};
}

void fit_box(LatticeSpec& spec, double radius, int margin_cells) {
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  Vector3d ext;
  switch (spec.space.id) {
    case SpaceId::heisenberg:
      // A horizontal curve of length r and the chord back to the origin bound an area of
      // at most r^2 / (2 pi); t is four times that area.
      ext = {radius, radius, 2.0 * radius * radius / kPi};
      break;
    case SpaceId::roto_translation:
      ext = {radius, std::min(radius, radius * radius / 4.0), radius};
      break;
    case SpaceId::euclidean:
      ext = {radius, radius, radius};
      break;
  }
  for (int a = 0; a < 3; ++a) {
    const int n = static_cast<int>(std::ceil(ext[a] / spec.step[a] - 1e-9)) + margin_cells;
    spec.lo[a] = -n;
    spec.hi[a] = n;
  }
}

std::vector<Move> make_stencil(const SpaceModel& space, const Vector3d& step, int order) {
  order = effective_order(space, order);
  std::vector<Move> moves;
  if (space.id == SpaceId::euclidean) {
    for (int i = -order; i <= order; ++i)
      for (int j = -order; j <= order; ++j)
        for (int k = -order; k <= order; ++k) {
          if (std::gcd(std::gcd(std::abs(i), std::abs(j)), std::abs(k)) != 1) continue;
          Move m;
          m.control = Vector3d(i * step[0], j * step[1], k * step[2]);
          m.length = m.control.norm();
          m.increment = m.control;
          moves.push_back(m);
        }
    return moves;
  }
  std::vector<std::pair<int, int>> pairs = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  if (order >= 2) {
    for (int s1 : {-1, 1})
      for (int s2 : {-1, 1}) {
        pairs.emplace_back(s1, 2 * s2);
        pairs.emplace_back(2 * s1, s2);
      }
  }
  const double sx = step[0];
  const double sy = space.id == SpaceId::heisenberg ? step[1] : step[2];
  for (const auto& [m1, m2] : pairs) {
    Move m;
    m.control = Vector3d(m1 * sx, m2 * sy, 0.0);
    m.length = m.control.norm();
    m.increment = segment_exp<double>(space, m.control, 1.0);
    if (space.id == SpaceId::roto_translation) {
      m.layer_shift = m2;
      m.cos_phi = std::cos(m.increment.z());
      m.sin_phi = std::sin(m.increment.z());
    }
    moves.push_back(m);
  }
  return moves;
}

std::string describe_stencil(const LatticeSpec& spec) {
  std::ostringstream os;
  const int order = effective_order(spec.space, spec.stencil_order);
  if (spec.space.id == SpaceId::euclidean) {
    os << "primitive integer directions with max component " << order;
  } else {
    os << "controls (i dX, j dY) for unit time, (i,j) in {+-1,0}^2";
    if (order >= 2) os << " plus (+-1,+-2), (+-2,+-1)";
    os << "; dX=" << spec.step[0] << " dY=" << (spec.space.id == SpaceId::heisenberg ? spec.step[1] : spec.step[2]);
  }
  return os.str();
}

// ---------------------------------------------------------------------------

LatticeGraph::LatticeGraph(LatticeSpec spec) : spec_(std::move(spec)) {
  if (!(spec_.step.array() > 0.0).all()) throw std::invalid_argument("lattice steps must be positive");
  if ((spec_.hi.array() < spec_.lo.array()).any()) throw std::invalid_argument("empty lattice box");
  if (spec_.sheared && spec_.space.id != SpaceId::heisenberg) throw std::invalid_argument("sheared chart is Heisenberg only");
  const Index3 ext = extent();
  const std::int64_t n = std::int64_t{ext[0]} * ext[1] * ext[2];
  if (n > std::numeric_limits<NodeId>::max() / 2) throw ResourceCapError("lattice box too large for 32-bit node ids");
  num_nodes_ = static_cast<NodeId>(n);
  moves_ = make_stencil(spec_.space, spec_.step, spec_.stencil_order);
}

NodeId LatticeGraph::id(const Index3& idx) const {
  const Index3 ext = extent();
  const Index3 r = idx - spec_.lo;
  return (r[2] * ext[1] + r[1]) * ext[0] + r[0];
}

Index3 LatticeGraph::index(NodeId u) const {
  const Index3 ext = extent();
  Index3 r;
  r[0] = u % ext[0];
  u /= ext[0];
  r[1] = u % ext[1];
  r[2] = u / ext[1];
  return r + spec_.lo;
}

bool LatticeGraph::contains(const Index3& idx) const {
  return (idx.array() >= spec_.lo.array()).all() && (idx.array() <= spec_.hi.array()).all();
}

bool LatticeGraph::on_boundary(NodeId u) const {
  const Index3 idx = index(u);
  return (idx.array() == spec_.lo.array()).any() || (idx.array() == spec_.hi.array()).any();
}

Point3d LatticeGraph::from_chart(const Vector3d& c) const {
  if (spec_.sheared) return {c.x(), c.y(), c.z() - 2.0 * c.x() * c.y()};
  if (spec_.space.id != SpaceId::roto_translation) return c;
  const double cs = std::cos(c.z());
  const double sn = std::sin(c.z());
  return {cs * c.x() - sn * c.y(), sn * c.x() + cs * c.y(), c.z()};
}

Point3d LatticeGraph::chart_point(const Index3& idx) const { return from_chart(chart_coords(idx)); }

Point3d LatticeGraph::local_point(NodeId u) const { return chart_point(index(u)); }

Point3d LatticeGraph::position(NodeId u) const { return group_mul<double>(spec_.space, spec_.center, local_point(u)); }

Vector3d LatticeGraph::to_chart(const Point3d& local) const {
  if (spec_.sheared) return {local.x(), local.y(), local.z() + 2.0 * local.x() * local.y()};
  if (spec_.space.id != SpaceId::roto_translation) return local;
  const double cs = std::cos(local.z());
  const double sn = std::sin(local.z());
  return {cs * local.x() + sn * local.y(), -sn * local.x() + cs * local.y(), local.z()};
}

std::optional<NodeId> LatticeGraph::nearest(const Point3d& p) const {
  const Vector3d c = to_chart(group_mul<double>(spec_.space, group_inverse<double>(spec_.space, spec_.center), p));
  const Vector3d r = c.cwiseQuotient(spec_.step);
  if (!r.allFinite() || r.cwiseAbs().maxCoeff() > 1e9) return std::nullopt;
  const Index3 idx = r.array().round().cast<int>();
  if (!contains(idx)) return std::nullopt;
  return id(idx);
}

double LatticeGraph::snap_error(const Point3d& p) const {
  const Vector3d c = to_chart(group_mul<double>(spec_.space, group_inverse<double>(spec_.space, spec_.center), p));
  const Index3 idx = c.cwiseQuotient(spec_.step).array().round().cast<int>();
  return (c - chart_coords(idx)).norm();
}

bool LatticeGraph::apply(const Index3& idx, const Vector3d& c, const Move& m, Vector3d& cn, Index3& in,
                         double& err) const {
  if (spec_.space.id == SpaceId::roto_translation) {
    const double a = c.x() + m.increment.x();
    const double b = c.y() + m.increment.y();
    cn = {m.cos_phi * a + m.sin_phi * b, -m.sin_phi * a + m.cos_phi * b, 0.0};
    in[0] = static_cast<int>(std::lround(cn.x() / spec_.step[0]));
    in[1] = static_cast<int>(std::lround(cn.y() / spec_.step[1]));
    in[2] = idx[2] + m.layer_shift;
    if (!contains(in)) return false;
    err = std::hypot(cn.x() - in[0] * spec_.step[0], cn.y() - in[1] * spec_.step[1]);
  } else {
    if (spec_.sheared) cn = to_chart(group_mul<double>(spec_.space, from_chart(c), m.increment));
    else if (spec_.space.id == SpaceId::heisenberg) cn = group_mul<double>(spec_.space, c, m.increment);
    else cn = c + m.increment;
    for (int a = 0; a < 3; ++a) in[a] = static_cast<int>(std::lround(cn[a] / spec_.step[a]));
    if (!contains(in)) return false;
    err = (cn - chart_coords(in)).norm();
  }
  // Exact lattices land on nodes up to rounding in the last bits.
  if (err < 1e-12 * spec_.step.maxCoeff()) err = 0.0;
  return true;
}

// ---------------------------------------------------------------------------

NodeId FlowGraph::nearest(const Point3d& p) const {
  if (lattice) {
    if (auto u = lattice->nearest(p)) return *u;
    throw CoverageError("point outside the graph box");
  }
  if (nodes.empty()) throw CoverageError("empty graph");
  NodeId best = 0;
  double bd = kInf;
  for (NodeId u = 0; u < static_cast<NodeId>(nodes.size()); ++u) {
    const double d = (nodes[u] - p).squaredNorm();
    if (d < bd) {
      bd = d;
      best = u;
    }
  }
  return best;
}

LatticeSpec flow_lattice_spec(const SpaceModel& space, const Point3d& center, double radius_hint, double h,
                              const GraphOptions& opt) {
  if (!(radius_hint > 0.0)) throw std::invalid_argument("radius_hint must be positive");
  LatticeSpec spec;
  spec.space = space;
  spec.center = center;
  spec.h = h;
  spec.step = default_steps(space, h);
  spec.stencil_order = opt.stencil_order;
  fit_box(spec, radius_hint, opt.margin_cells);
  return spec;
}

FlowGraph materialize(const LatticeSpec& spec, std::int64_t max_nodes) {
  const Index3 ext = spec.hi - spec.lo + Index3::Ones();
  const std::int64_t n = std::int64_t{ext[0]} * ext[1] * ext[2];
  if (n > max_nodes) {
    throw ResourceCapError("flow graph would have " + std::to_string(n) + " nodes, cap is " + std::to_string(max_nodes));
  }
  LatticeGraph lg(spec);
  FlowGraph g;
  g.space = spec.space;
  g.nodes.resize(static_cast<std::size_t>(n));
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n) * lg.moves().size());
  for (NodeId u = 0; u < lg.num_nodes(); ++u) {
    g.nodes[u] = lg.position(u);
    lg.for_each_neighbor(u, [&](NodeId v, double len) { edges.push_back({u, v, len}); });
  }
  g.graph = WeightedGraph::from_edges(lg.num_nodes(), std::move(edges),
                                      std::vector<double>(static_cast<std::size_t>(n), lg.cell_volume()));
  g.params.h = spec.h;
  g.params.step = spec.step;
  g.params.lo = spec.lo;
  g.params.hi = spec.hi;
  g.params.center = spec.center;
  g.params.stencil_order = spec.stencil_order;
  g.params.stencil = describe_stencil(spec);
  g.lattice.emplace(std::move(lg));
  return g;
}

FlowGraph build_flow_graph(const SpaceModel& space, const Point3d& center, double radius_hint, double h,
                           const GraphOptions& opt) {
  FlowGraph g = materialize(flow_lattice_spec(space, center, radius_hint, h, opt), opt.max_nodes);
  g.params.radius_hint = radius_hint;
  return g;
}

std::vector<double> graph_distance(const FlowGraph& g, NodeId source, const std::vector<NodeId>& targets) {
  if (source < 0 || source >= g.num_nodes()) throw std::out_of_range("source node not in graph");
  const ShortestPaths sp = dijkstra(g.graph, source);
  std::vector<double> out;
  out.reserve(targets.size());
  for (NodeId t : targets) {
    if (t < 0 || t >= g.num_nodes()) throw std::out_of_range("target node not in graph");
    out.push_back(sp.dist[t]);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string flow_graph_to_json(const FlowGraph& g) {
  using nlohmann::json;
  json j;
  j["format_version"] = kFlowGraphFormatVersion;
  j["space"] = std::string(to_string(g.space.id));
  const auto& p = g.params;
  j["build_params"] = {{"h", p.h},
                       {"radius_hint", p.radius_hint},
                       {"step", {p.step[0], p.step[1], p.step[2]}},
                       {"lo", {p.lo[0], p.lo[1], p.lo[2]}},
                       {"hi", {p.hi[0], p.hi[1], p.hi[2]}},
                       {"center", {p.center[0], p.center[1], p.center[2]}},
                       {"stencil_order", p.stencil_order},
                       {"stencil", p.stencil}};
  json nodes = json::array();
  for (const auto& x : g.nodes) nodes.push_back({x[0], x[1], x[2]});
  j["nodes"] = std::move(nodes);
  j["node_measure"] = g.graph.node_measures();
  json edges = json::array();
  for (const auto& e : g.graph.edges()) edges.push_back({e.i, e.j, e.length});
  j["edges"] = std::move(edges);
  return j.dump();
}

FlowGraph flow_graph_from_json(const std::string& text) {
  using nlohmann::json;
  const json j = json::parse(text);
  if (j.at("format_version").get<int>() != kFlowGraphFormatVersion)
    throw std::runtime_error("unsupported flow graph format version");
  FlowGraph g;
  g.space.id = parse_space(j.at("space").get<std::string>());
  const auto& bp = j.at("build_params");
  auto& p = g.params;
  p.h = bp.at("h").get<double>();
  p.radius_hint = bp.at("radius_hint").get<double>();
  for (int a = 0; a < 3; ++a) {
    p.step[a] = bp.at("step")[a].get<double>();
    p.lo[a] = bp.at("lo")[a].get<int>();
    p.hi[a] = bp.at("hi")[a].get<int>();
    p.center[a] = bp.at("center")[a].get<double>();
  }
  p.stencil_order = bp.at("stencil_order").get<int>();
  p.stencil = bp.at("stencil").get<std::string>();
  for (const auto& x : j.at("nodes")) g.nodes.emplace_back(x[0].get<double>(), x[1].get<double>(), x[2].get<double>());
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) edges.push_back({e[0].get<NodeId>(), e[1].get<NodeId>(), e[2].get<double>()});
  g.graph = WeightedGraph::from_edges(static_cast<NodeId>(g.nodes.size()), std::move(edges),
                                      j.at("node_measure").get<std::vector<double>>());
  if ((p.step.array() > 0.0).all() && (p.hi.array() >= p.lo.array()).all()) {
    LatticeSpec spec{g.space, p.center, p.step, p.lo, p.hi, p.stencil_order, p.h};
    LatticeGraph lg(spec);
    if (lg.num_nodes() == g.num_nodes()) g.lattice.emplace(std::move(lg));
  }
  return g;
}

}  // namespace qclab
