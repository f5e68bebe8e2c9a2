#include "qclab/modulus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace qclab {

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_path(const std::vector<NodeId>& path) {
  std::uint64_t h = 0x51ED270B27ULL;
  for (NodeId v : path) h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)));
  return h;
}

std::vector<char> membership(NodeId n, const std::vector<NodeId>& set) {
  std::vector<char> in(static_cast<std::size_t>(n), 0);
  for (NodeId v : set) in[v] = 1;
  return in;
}

struct Entry {
  NodeId node;
  double coef;  // total edge-length weight of the node along the path
  double qmu;   // Q * node measure
};

struct Row {
  std::vector<NodeId> nodes;
  std::vector<Entry> entries;
  double lambda = 0.0;
};

template <class Graph>
std::vector<Entry> path_entries(const Graph& g, const std::vector<NodeId>& path, double Q) {
  std::vector<std::pair<NodeId, double>> raw;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const double len = g.edge_length(path[k], path[k + 1]);
    if (!std::isfinite(len)) throw std::invalid_argument("path has non-adjacent consecutive nodes");
    raw.emplace_back(path[k], 0.5 * len);
    raw.emplace_back(path[k + 1], 0.5 * len);
  }
  std::sort(raw.begin(), raw.end());
  std::vector<Entry> out;
  for (const auto& [v, c] : raw) {
    if (!out.empty() && out.back().node == v) {
      out.back().coef += c;
    } else {
      const double mu = g.node_measure(v);
      if (!(mu > 0.0)) throw std::invalid_argument("modulus needs positive node measures on path nodes");
      out.push_back({v, c, Q * mu});
    }
  }
  return out;
}

/// Dual state of the restricted problem.
class DualState {
 public:
  DualState(NodeId n, double Q) : q_(Q), expo_(1.0 / (Q - 1.0)), s_(static_cast<std::size_t>(n), 0.0) {}

  double root(double x) const {
    if (x <= 0.0) return 0.0;
    if (q_ == 2.0) return x;
    if (q_ == 4.0) return std::cbrt(x);
    return std::pow(x, expo_);
  }

  double rho(NodeId v, double qmu) const { return root(s_[v] / qmu); }

  void touch(const Row& r) {
    for (const auto& e : r.entries) {
      if (touched_.insert(e.node).second) {
        touched_list_.push_back({e.node, e.qmu});
      }
    }
  }

  void add(const Row& r, double dlam) {
    for (const auto& e : r.entries) s_[e.node] = std::max(0.0, s_[e.node] + dlam * e.coef);
  }

  double row_integral(const Row& r) const {
    double acc = 0.0;
    for (const auto& e : r.entries) acc += e.coef * rho(e.node, e.qmu);
    return acc;
  }

  /// Exact maximization of the dual along one multiplier.
  void coordinate_step(Row& r) {
    const double lam_old = r.lambda;
    auto phi = [&](double lam, double* dphi) {
      double f = 0.0;
      double df = 0.0;
      for (const auto& e : r.entries) {
        const double x = std::max(0.0, s_[e.node] + (lam - lam_old) * e.coef) / e.qmu;
        const double rt = root(x);
        f += e.coef * rt;
        if (dphi && x > 0.0) df += e.coef * e.coef / e.qmu * expo_ * rt / x;
      }
      if (dphi) *dphi = df;
      return f - 1.0;
    };
    double lam = 0.0;
    if (phi(0.0, nullptr) < 0.0) {
      double lo = 0.0;
      double hi = lam_old > 0.0 ? lam_old : 1e-3;
      for (int k = 0; k < 400 && phi(hi, nullptr) < 0.0; ++k) {
        lo = hi;
        hi *= 2.0;
      }
      lam = (lam_old > lo && lam_old < hi) ? lam_old : 0.5 * (lo + hi);
      for (int it = 0; it < 100; ++it) {
        double df = 0.0;
        const double f = phi(lam, &df);
        if (f < 0.0) lo = lam; else hi = lam;
        if (std::abs(f) < 1e-13 || hi - lo <= 1e-15 * hi) break;
        double next = df > 0.0 ? lam - f / df : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        lam = next;
      }
    }
    add(r, lam - lam_old);
    r.lambda = lam;
  }

  double energy() const {
    double e = 0.0;
    for (const auto& [v, qmu] : touched_list_) {
      const double p = rho(v, qmu);
      e += qmu / q_ * std::pow(p, q_);
    }
    return e;
  }

  double dual_value(const std::vector<Row>& rows) const {
    double sum = 0.0;
    for (const auto& r : rows) sum += r.lambda;
    return sum - (q_ - 1.0) * energy();
  }

  std::vector<double> dense_rho(NodeId n) const {
    std::vector<double> rho(static_cast<std::size_t>(n), 0.0);
    for (const auto& [v, qmu] : touched_list_) rho[v] = this->rho(v, qmu);
    return rho;
  }

 private:
  double q_;
  double expo_;
  std::vector<double> s_;
  std::unordered_set<NodeId> touched_;
  std::vector<std::pair<NodeId, double>> touched_list_;
};

template <class Graph>
struct RhoWeight {
  const std::vector<double>* rho;
  double operator()(NodeId u, NodeId v, double len) const { return 0.5 * ((*rho)[u] + (*rho)[v]) * len; }
};

/// Shortest E-F paths under rho, one per F node, in increasing order, trimmed so that
/// only the last node lies in F.
std::vector<std::vector<NodeId>> candidate_paths(const ShortestPaths& sp, const std::vector<NodeId>& F,
                                                 const std::vector<char>& in_f, double below, std::size_t limit,
                                                 std::vector<char>& used, const std::unordered_set<std::uint64_t>& known, bool disjoint) {
  std::vector<NodeId> order;
  for (NodeId f : F)
    if (sp.dist[f] < below) order.push_back(f);
  std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    return sp.dist[a] != sp.dist[b] ? sp.dist[a] < sp.dist[b] : a < b;
  });
  std::vector<std::vector<NodeId>> out;
  std::vector<NodeId> marked;
  for (NodeId f : order) {
    if (out.size() >= limit) break;
    std::vector<NodeId> path = extract_path(sp, f);
    if (path.size() < 2) continue;
    bool ok = true;
    for (std::size_t k = 0; k + 1 < path.size() && ok; ++k) ok = !in_f[path[k]];
    for (std::size_t k = 1; k + 1 < path.size() && ok && disjoint; ++k) ok = !used[path[k]];
    if (!ok || known.count(hash_path(path))) continue;
    for (std::size_t k = 1; k + 1 < path.size(); ++k) {
      used[path[k]] = 1;
      marked.push_back(path[k]);
    }
    out.push_back(std::move(path));
  }
  for (NodeId v : marked) used[v] = 0;
  return out;
}

bool symmetric_edges(const WeightedGraph&) { return true; }
bool symmetric_edges(const LatticeGraph& g) { return g.spec().space.id != SpaceId::roto_translation; }

/// Removes closed loops and trims so that only the first node is in E and only the
/// last is in F. The integral can only decrease.
std::vector<NodeId> clean_walk(const std::vector<NodeId>& walk, const std::vector<char>& in_e,
                               const std::vector<char>& in_f) {
  std::vector<NodeId> out;
  std::unordered_map<NodeId, std::size_t> pos;
  for (NodeId v : walk) {
    if (auto it = pos.find(v); it != pos.end()) {
      for (std::size_t k = it->second + 1; k < out.size(); ++k) pos.erase(out[k]);
      out.resize(it->second + 1);
      continue;
    }
    pos.emplace(v, out.size());
    out.push_back(v);
    if (in_f[v]) break;
  }
  std::size_t first = 0;
  for (std::size_t k = 0; k < out.size(); ++k)
    if (in_e[out[k]]) first = k;
  out.erase(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(first));
  return out;
}

/// Violated E-F walks through nodes v with dE(v) + dF(v) < below, in increasing order,
/// skipping nodes already on a walk chosen this round.
std::vector<std::vector<NodeId>> through_paths(const ShortestPaths& from_e, const ShortestPaths& from_f,
                                               const std::vector<char>& in_e, const std::vector<char>& in_f,
                                               double below, std::size_t limit, std::vector<char>& used,
                                               std::unordered_set<std::uint64_t>& seen) {
  const auto n = static_cast<NodeId>(from_e.dist.size());
  std::vector<std::pair<double, NodeId>> order;
  for (NodeId v = 0; v < n; ++v) {
    const double d = from_e.dist[v] + from_f.dist[v];
    if (d < below) order.emplace_back(d, v);
  }
  std::sort(order.begin(), order.end());
  std::vector<std::vector<NodeId>> out;
  std::vector<NodeId> marked;
  for (const auto& [d, v] : order) {
    if (out.size() >= limit) break;
    if (used[v]) continue;
    std::vector<NodeId> walk = extract_path(from_e, v);
    std::vector<NodeId> back = extract_path(from_f, v);
    walk.insert(walk.end(), back.rbegin() + 1, back.rend());
    std::vector<NodeId> path = clean_walk(walk, in_e, in_f);
    if (path.size() < 2 || !in_e[path.front()] || !in_f[path.back()]) continue;
    if (!seen.insert(hash_path(path)).second) continue;
    for (NodeId w : path) {
      if (!used[w]) marked.push_back(w);
      used[w] = 1;
    }
    out.push_back(std::move(path));
  }
  for (NodeId w : marked) used[w] = 0;
  return out;
}

}  // namespace

template <class Graph>
void validate_family(const CurveFamily<Graph>& fam) {
  if (!fam.graph) throw std::invalid_argument("curve family without graph");
  if (fam.E.empty() || fam.F.empty()) throw std::invalid_argument("curve family needs nonempty E and F");
  const NodeId n = fam.graph->num_nodes();
  for (NodeId v : fam.E)
    if (v < 0 || v >= n) throw std::out_of_range("E node out of range");
  for (NodeId v : fam.F)
    if (v < 0 || v >= n) throw std::out_of_range("F node out of range");
  const auto in_e = membership(n, fam.E);
  for (NodeId v : fam.F)
    if (in_e[v]) throw std::invalid_argument("E and F must be disjoint");
}

template <class Graph>
bool induces_connected(const Graph& g, const std::vector<NodeId>& set) {
  if (set.empty()) return true;
  auto in = membership(g.num_nodes(), set);
  const auto distinct = static_cast<std::size_t>(std::count(in.begin(), in.end(), 1));
  std::vector<NodeId> stack = {set.front()};
  in[set.front()] = 2;
  std::size_t seen = 1;
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    g.for_each_neighbor(u, [&](NodeId v, double) {
      if (in[v] == 1) {
        in[v] = 2;
        ++seen;
        stack.push_back(v);
      }
    });
  }
  return seen == distinct;
}

template <class Graph>
double path_integral(const Graph& g, const Density& rho, const std::vector<NodeId>& path) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const double len = g.edge_length(path[k], path[k + 1]);
    if (!std::isfinite(len)) throw std::invalid_argument("path has non-adjacent consecutive nodes");
    acc += 0.5 * (rho.values[path[k]] + rho.values[path[k + 1]]) * len;
  }
  return acc;
}

template <class Graph>
double energy(const Graph& g, const Density& rho, double Q) {
  if (!(Q >= 1.0)) throw std::invalid_argument("energy needs Q >= 1");
  double e = 0.0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    const double r = rho.values[u];
    if (r > 0.0) e += g.node_measure(u) * std::pow(r, Q);
  }
  return e;
}

template <class Graph>
AdmissibilityReport admissibility_check(const CurveFamily<Graph>& fam, const Density& rho, int samples,
                                        std::uint64_t seed) {
  validate_family(fam);
  const Graph& g = *fam.graph;
  if (static_cast<NodeId>(rho.values.size()) != g.num_nodes()) throw std::invalid_argument("density size mismatch");
  AdmissibilityReport rep;
  const RhoWeight<Graph> w{&rho.values};
  const ShortestPaths sp = dijkstra(g, std::span<const NodeId>(fam.E), w);
  NodeId best = kNoNode;
  for (NodeId f : fam.F)
    if (best == kNoNode || sp.dist[f] < sp.dist[best]) best = f;
  if (!std::isfinite(sp.dist[best])) {
    rep.min_integral = kInf;
    rep.connected = false;
    rep.note = "E and F are not connected in the graph";
    return rep;
  }
  rep.witness = extract_path(sp, best);
  rep.min_integral = path_integral(g, rho, rep.witness);

  std::mt19937_64 rng(seed);
  for (int k = 0; k < samples; ++k) {
    const NodeId e = fam.E[std::uniform_int_distribution<std::size_t>(0, fam.E.size() - 1)(rng)];
    const NodeId f = fam.F[std::uniform_int_distribution<std::size_t>(0, fam.F.size() - 1)(rng)];
    const std::uint64_t salt = rng();
    auto noisy = [&](NodeId u, NodeId v, double len) {
      const double xi = static_cast<double>(mix64(salt ^ (static_cast<std::uint64_t>(u) << 32) ^ v) >> 11) * 0x1.0p-53;
      return w(u, v, len) * (1.0 + xi) + 1e-12 * len;
    };
    const ShortestPaths sk = dijkstra(g, e, noisy);
    const auto path = extract_path(sk, f);
    if (path.empty()) continue;
    ++rep.sampled_paths;
    const double val = path_integral(g, rho, path);
    if (val < rep.min_integral) {
      rep.min_integral = val;
      rep.witness = path;
    }
  }
  return rep;
}

namespace {

template <class Graph>
ModulusResult modulus_by_paths(const CurveFamily<Graph>& fam, double Q, const ModulusOptions& opt) {
  const Graph& g = *fam.graph;
  const NodeId n = g.num_nodes();
  const auto in_f = membership(n, fam.F);
  const auto in_e = membership(n, fam.E);

  ModulusResult res;
  res.method = "constraint_generation";
  res.density.values.assign(static_cast<std::size_t>(n), 0.0);
  DualState state(n, Q);
  std::vector<Row> rows;
  std::unordered_set<std::uint64_t> known;
  auto add_row = [&](std::vector<NodeId> path, double lambda) {
    const std::uint64_t key = hash_path(path);
    if (!known.insert(key).second) return;
    Row r;
    r.entries = path_entries(g, path, Q);
    r.nodes = std::move(path);
    r.lambda = lambda;
    state.touch(r);
    state.add(r, lambda);
    rows.push_back(std::move(r));
  };

  if (opt.warm_start) {
    const auto& ws = *opt.warm_start;
    for (std::size_t k = 0; k < ws.paths.size(); ++k) {
      const auto& p = ws.paths[k];
      if (p.size() < 2) continue;
      if (std::any_of(p.begin(), p.end(), [&](NodeId v) { return v < 0 || v >= n; })) continue;
      const bool joins = (in_e[p.front()] && in_f[p.back()]) || (in_f[p.front()] && in_e[p.back()]);
      if (!joins) continue;
      bool adjacent = true;
      for (std::size_t i = 0; i + 1 < p.size() && adjacent; ++i) adjacent = std::isfinite(g.edge_length(p[i], p[i + 1]));
      if (!adjacent) continue;
      add_row(p, k < ws.multipliers.size() ? std::max(0.0, ws.multipliers[k]) : 0.0);
    }
  }
  if (rows.empty()) {
    const ShortestPaths sp = dijkstra(g, std::span<const NodeId>(fam.E));
    NodeId best = kNoNode;
    for (NodeId f : fam.F)
      if (std::isfinite(sp.dist[f]) && (best == kNoNode || sp.dist[f] < sp.dist[best])) best = f;
    if (best == kNoNode) {
      res.converged = true;
      res.note = "E and F are not connected: the family is empty";
      return res;
    }
    add_row(extract_path(sp, best), 0.0);
  }

  double best_upper = kInf;
  double lower = 0.0;
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  const bool symmetric = symmetric_edges(g);
  bool reached = false;
  for (int outer = 1; outer <= opt.max_outer; ++outer) {
    res.iterations = outer;
    for (int sweep = 1; sweep <= opt.max_inner; ++sweep) {
      ++res.inner_sweeps;
      for (auto& r : rows) state.coordinate_step(r);
      if (sweep % 5 != 0 && sweep != opt.max_inner) continue;
      double m_active = kInf;
      for (const auto& r : rows) m_active = std::min(m_active, state.row_integral(r));
      const double dual = state.dual_value(rows);
      const double restricted_upper = m_active > 0.0 ? state.energy() / std::pow(m_active, Q) : kInf;
      if (restricted_upper - dual <= opt.inner_tolerance * std::max(dual, 1e-300)) break;
    }
    lower = std::max(lower, state.dual_value(rows));

    const std::vector<double> rho = state.dense_rho(n);
    const ShortestPaths sp = dijkstra(g, std::span<const NodeId>(fam.E), RhoWeight<Graph>{&rho});
    double m = kInf;
    for (NodeId f : fam.F) m = std::min(m, sp.dist[f]);
    res.min_integral = m;
    if (m > 0.0 && std::isfinite(m)) {
      const double e = state.energy();
      const double cand = e / std::pow(m, Q);
      if (cand < best_upper) {
        best_upper = cand;
        for (NodeId u = 0; u < n; ++u) res.density.values[u] = rho[u] / m;
      }
    }
    if (opt.progress)
      opt.progress({outer, static_cast<int>(rows.size()), res.inner_sweeps, lower, best_upper, m});
    if (m >= 1.0 - opt.tol) {
      reached = true;
      break;
    }
    const std::size_t limit = std::max(static_cast<std::size_t>(opt.batch), opt.batch_growth ? rows.size() : 0);
    auto fresh = candidate_paths(sp, fam.F, in_f, 1.0, limit, used, known, opt.disjoint_paths);
    if (opt.through_paths && symmetric && fresh.size() < limit) {
      const ShortestPaths sp_f = dijkstra(g, std::span<const NodeId>(fam.F), RhoWeight<Graph>{&rho});
      std::unordered_set<std::uint64_t> seen = known;
      for (const auto& p : fresh) seen.insert(hash_path(p));
      auto more = through_paths(sp, sp_f, in_e, in_f, 1.0, limit - fresh.size(), used, seen);
      for (auto& p : more) fresh.push_back(std::move(p));
    }
    if (fresh.empty()) {
      res.note = "no new violated paths";
      break;
    }
    for (auto& p : fresh) add_row(std::move(p), 0.0);
  }

  res.upper = best_upper;
  res.lower = std::min(lower, best_upper);
  res.relative_gap = std::isfinite(best_upper) && best_upper > 0.0 ? (best_upper - res.lower) / best_upper : kInf;
  res.active_paths = static_cast<int>(rows.size());
  res.converged = reached && res.relative_gap <= opt.max_gap;
  if (!reached && res.note.empty()) res.note = "outer iteration cap reached";
  for (const auto& r : rows) {
    res.paths.push_back(r.nodes);
    res.multipliers.push_back(r.lambda);
  }
  return res;
}

struct EdgeList {
  std::vector<NodeId> tail;
  std::vector<NodeId> head;
  std::vector<double> len;
};

template <class Graph>
EdgeList directed_edges(const Graph& g) {
  EdgeList el;
  for (NodeId u = 0; u < g.num_nodes(); ++u)
    g.for_each_neighbor(u, [&](NodeId v, double len) {
      if (v == u) return;
      el.tail.push_back(u);
      el.head.push_back(v);
      el.len.push_back(len);
    });
  return el;
}

/// Minimizer of mu r^Q + (r - z)^2 / (2 tau) over r >= 0.
double prox_power(double z, double mu, double tau, double Q) {
  if (z <= 0.0) return 0.0;
  const double a = Q * mu * tau;
  double r = z;
  for (int k = 0; k < 60; ++k) {
    const double gq = a * std::pow(r, Q - 1.0);
    const double f = gq + r - z;
    const double next = r - f / ((Q - 1.0) * gq / r + 1.0);
    const double clipped = next > 0.0 ? next : 0.5 * r;
    if (std::abs(clipped - r) <= 1e-15 * r) return clipped;
    r = clipped;
  }
  return r;
}

template <class Graph>
ModulusResult modulus_primal_dual(const CurveFamily<Graph>& fam, double Q, const ModulusOptions& opt) {
  const Graph& g = *fam.graph;
  const NodeId n = g.num_nodes();
  const auto nn = static_cast<std::size_t>(n);
  ModulusResult res;
  res.method = "primal_dual";
  res.density.values.assign(nn, 0.0);

  {
    const ShortestPaths sp = dijkstra(g, std::span<const NodeId>(fam.E));
    if (std::none_of(fam.F.begin(), fam.F.end(), [&](NodeId f) { return std::isfinite(sp.dist[f]); })) {
      res.converged = true;
      res.note = "E and F are not connected: the family is empty";
      return res;
    }
  }

  enum : char { kInterior = 0, kSource = 1, kSink = 2 };
  std::vector<char> role(nn, kInterior);
  for (NodeId v : fam.E) role[v] = kSource;
  for (NodeId v : fam.F) role[v] = kSink;
  std::vector<double> mu(nn);
  for (NodeId v = 0; v < n; ++v) {
    mu[v] = g.node_measure(v);
    if (!(mu[v] > 0.0)) throw std::invalid_argument("modulus needs positive node measures");
  }
  const EdgeList el = directed_edges(g);
  const std::size_t m = el.len.size();

  // Diagonal preconditioners: inverse column and row sums of the constraint matrix.
  std::vector<double> col_rho(nn, 0.0);
  std::vector<double> col_phi(nn, 0.0);
  std::vector<double> row(m);
  for (std::size_t e = 0; e < m; ++e) {
    const NodeId u = el.tail[e];
    const NodeId v = el.head[e];
    col_rho[u] += 0.5 * el.len[e];
    col_rho[v] += 0.5 * el.len[e];
    row[e] = el.len[e];
    if (role[u] == kInterior) {
      col_phi[u] += 1.0;
      row[e] += 1.0;
    }
    if (role[v] == kInterior) {
      col_phi[v] += 1.0;
      row[e] += 1.0;
    }
  }

  std::vector<double> rho(nn, 0.0);
  std::vector<double> phi(nn, 0.5);
  std::vector<double> f(m, 0.0);
  for (NodeId v = 0; v < n; ++v)
    if (role[v] != kInterior) phi[v] = role[v] == kSink ? 1.0 : 0.0;
  if (opt.warm_start) {
    const auto& ws = *opt.warm_start;
    if (ws.flow.size() == m)
      for (std::size_t e = 0; e < m; ++e) f[e] = std::max(0.0, ws.flow[e]);
    if (ws.density.values.size() == nn)
      for (std::size_t v = 0; v < nn; ++v) rho[v] = std::max(0.0, ws.density.values[v]);
  }

  std::vector<double> s(nn);
  std::vector<double> net(nn);
  auto accumulate = [&]() {
    std::fill(s.begin(), s.end(), 0.0);
    std::fill(net.begin(), net.end(), 0.0);
    for (std::size_t e = 0; e < m; ++e) {
      const double a = 0.5 * f[e] * el.len[e];
      s[el.tail[e]] += a;
      s[el.head[e]] += a;
      net[el.head[e]] += f[e];
      net[el.tail[e]] -= f[e];
    }
  };
  const double qp = Q / (Q - 1.0);
  auto flow_bound = [&]() {
    accumulate();
    double linear = 0.0;
    double penalty = 0.0;
    for (NodeId v = 0; v < n; ++v) {
      if (role[v] == kSink) linear += net[v];
      else if (role[v] == kInterior) linear += std::min(0.0, net[v]);
      if (s[v] > 0.0) penalty += (Q - 1.0) * mu[v] * std::pow(s[v] / (Q * mu[v]), qp);
    }
    if (!(linear > 0.0) || !(penalty > 0.0)) return 0.0;
    const double c = std::pow(linear / (qp * penalty), Q - 1.0);
    return c * linear - std::pow(c, qp) * penalty;
  };

  double lower = flow_bound();
  std::vector<double> best_flow = f;
  double upper = kInf;
  double gamma = 1.0;
  std::vector<double> rho_bar = rho;
  std::vector<double> phi_bar = phi;
  std::vector<double> rho0 = rho;
  std::vector<double> phi0 = phi;
  std::vector<double> f0 = f;
  bool reached = false;
  for (int outer = 1; outer <= opt.max_outer; ++outer) {
    res.iterations = outer;
    for (int it = 0; it < opt.epoch; ++it) {
      ++res.inner_sweeps;
      accumulate();
      for (NodeId v = 0; v < n; ++v) {
        const double tau = gamma / col_rho[v];
        const double r = col_rho[v] > 0.0 ? prox_power(rho[v] + tau * s[v], mu[v], tau, Q) : 0.0;
        rho_bar[v] = 2.0 * r - rho[v];
        rho[v] = r;
        if (role[v] == kInterior && col_phi[v] > 0.0) {
          const double p = std::clamp(phi[v] - gamma / col_phi[v] * net[v], 0.0, 1.0);
          phi_bar[v] = 2.0 * p - phi[v];
          phi[v] = p;
        }
      }
      for (std::size_t e = 0; e < m; ++e) {
        const NodeId u = el.tail[e];
        const NodeId v = el.head[e];
        const double slack = phi_bar[v] - phi_bar[u] - 0.5 * el.len[e] * (rho_bar[u] + rho_bar[v]);
        f[e] = std::max(0.0, f[e] + slack / (gamma * row[e]));
      }
    }

    // Rebalance primal and dual step sizes from the motion over the round.
    double dx = 0.0;
    double dy = 0.0;
    for (std::size_t v = 0; v < nn; ++v) dx += (rho[v] - rho0[v]) * (rho[v] - rho0[v]) + (phi[v] - phi0[v]) * (phi[v] - phi0[v]);
    for (std::size_t e = 0; e < m; ++e) dy += (f[e] - f0[e]) * (f[e] - f0[e]);
    if (dx > 0.0 && dy > 0.0) gamma = std::exp(0.5 * std::log(std::sqrt(dx / dy)) + 0.5 * std::log(gamma));
    rho0 = rho;
    phi0 = phi;
    f0 = f;
    rho_bar = rho;
    phi_bar = phi;

    if (const double fb = flow_bound(); fb > lower) {
      lower = fb;
      best_flow = f;
    }
    const ShortestPaths sp = dijkstra(g, std::span<const NodeId>(fam.E), RhoWeight<Graph>{&rho});
    double mi = kInf;
    for (NodeId v : fam.F) mi = std::min(mi, sp.dist[v]);
    res.min_integral = mi;
    if (mi > 0.0 && std::isfinite(mi)) {
      double e = 0.0;
      for (NodeId v = 0; v < n; ++v)
        if (rho[v] > 0.0) e += mu[v] * std::pow(rho[v], Q);
      const double cand = e / std::pow(mi, Q);
      if (cand < upper) {
        upper = cand;
        for (std::size_t v = 0; v < nn; ++v) res.density.values[v] = rho[v] / mi;
      }
    }
    if (opt.progress) opt.progress({outer, 0, res.inner_sweeps, std::min(lower, upper), upper, mi});
    if (std::isfinite(upper) && upper - lower <= opt.tol * upper) {
      reached = true;
      break;
    }
  }

  res.upper = upper;
  res.lower = std::min(lower, upper);
  res.relative_gap = std::isfinite(upper) && upper > 0.0 ? (upper - res.lower) / upper : kInf;
  res.converged = reached && res.relative_gap <= opt.max_gap;
  if (!reached) res.note = "outer iteration cap reached";
  res.flow = std::move(best_flow);
  return res;
}

}  // namespace

template <class Graph>
ModulusResult q_modulus(const CurveFamily<Graph>& fam, double Q, const ModulusOptions& opt) {
  if (!(Q > 1.0)) throw std::invalid_argument("q_modulus needs Q > 1");
  if (!(opt.tol > 0.0 && opt.tol < 0.5)) throw std::invalid_argument("q_modulus needs tol in (0, 0.5)");
  if (opt.max_outer < 1 || opt.max_inner < 1 || opt.epoch < 1 || opt.batch < 1)
    throw std::invalid_argument("q_modulus needs positive iteration caps");
  validate_family(fam);
  if (opt.method == ModulusMethod::constraint_generation) return modulus_by_paths(fam, Q, opt);
  return modulus_primal_dual(fam, Q, opt);
}

nlohmann::json to_json(const ModulusResult& r, bool include_density) {
  nlohmann::json j = {{"upper", r.upper},
                      {"lower", r.lower},
                      {"relative_gap", r.relative_gap},
                      {"min_integral", r.min_integral},
                      {"active_paths", r.active_paths},
                      {"iterations", r.iterations},
                      {"inner_sweeps", r.inner_sweeps},
                      {"converged", r.converged},
                      {"method", r.method},
                      {"note", r.note}};
  if (include_density) j["density"] = r.density.values;
  return j;
}

// ---------------------------------------------------------------------------

PlanarGraph build_annulus_graph(double r_in, double r_out, double h, int reach) {
  if (!(r_in > 0.0 && r_out > r_in && h > 0.0 && reach >= 1)) throw std::invalid_argument("bad annulus parameters");
  constexpr double kTwoPi = 6.283185307179586;
  const int rings = std::max(1, static_cast<int>(std::ceil((r_out - r_in) / h - 1e-9)));
  const int sectors = std::max(8, static_cast<int>(std::ceil(kTwoPi * 0.5 * (r_in + r_out) / h - 1e-9)));
  const double dr = (r_out - r_in) / rings;
  const double dth = kTwoPi / sectors;
  PlanarGraph pg;
  std::vector<double> measure;
  auto id = [&](int i, int j) { return static_cast<NodeId>(i * sectors + ((j % sectors) + sectors) % sectors); };
  for (int i = 0; i <= rings; ++i) {
    const double r = r_in + i * dr;
    const double lo = std::max(r_in, r - 0.5 * dr);
    const double hi = std::min(r_out, r + 0.5 * dr);
    for (int j = 0; j < sectors; ++j) {
      const NodeId v = id(i, j);
      pg.points.emplace_back(r * std::cos(j * dth), r * std::sin(j * dth));
      measure.push_back(0.5 * dth * (hi * hi - lo * lo));
      if (i == 0) pg.inner.push_back(v);
      if (i == rings) pg.outer.push_back(v);
    }
  }
  std::vector<Edge> edges;
  for (int i = 0; i <= rings; ++i)
    for (int j = 0; j < sectors; ++j)
      for (int di = 0; di <= reach; ++di)
        for (int dj = -reach; dj <= reach; ++dj) {
          if ((di == 0 && dj <= 0) || std::gcd(di, std::abs(dj)) != 1 || i + di > rings) continue;
          const NodeId u = id(i, j);
          const NodeId v = id(i + di, j + dj);
          edges.push_back({u, v, (pg.points[u] - pg.points[v]).norm()});
        }
  pg.graph = WeightedGraph::from_edges(static_cast<NodeId>(pg.points.size()), std::move(edges), std::move(measure));
  return pg;
}

Density annulus_extremal_density(const PlanarGraph& g, double r_in, double r_out) {
  Density d;
  const double lg = std::log(r_out / r_in);
  for (const auto& p : g.points) d.values.push_back(1.0 / (p.norm() * lg));
  return d;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<NodeId> axis_nodes(const LatticeGraph& lg, double from, double to, double h) {
  std::vector<NodeId> out;
  const int steps = std::max(1, static_cast<int>(std::ceil((to - from) / (0.25 * h))));
  for (int k = 0; k <= steps; ++k) {
    const double x = from + (to - from) * k / steps;
    const auto v = lg.nearest(Point3d(x, 0.0, 0.0));
    if (!v) throw CoverageError("segment outside the Loewner lattice");
    out.push_back(*v);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

LatticeSpec loewner_lattice(const SpaceModel& space, double t_max, double scale, const LoewnerOptions& opt) {
  const double h = opt.h_over_scale * scale;
  const double reach = opt.margin * scale;
  LatticeSpec spec = flow_lattice_spec(space, Point3d::Zero(), reach, h, {opt.stencil_order, 3, opt.max_nodes, opt.max_nodes});
  const double x_ext = (1.0 + 0.5 * t_max) * scale + reach;
  Vector3d ext(x_ext, 0.0, 0.0);
  switch (space.id) {
    case SpaceId::heisenberg:
      // In the sheared chart translates along the axis are shifts in x; the ball's
      // s = t + 2xy stays within |t| + 2 |x y|.
      spec.sheared = true;
      ext[1] = reach;
      ext[2] = 2.0 * reach * reach / 3.14159265358979323846 + 2.0 * reach * reach;
      break;
    case SpaceId::roto_translation:
      ext[1] = std::min(reach + x_ext * std::sin(std::min(reach, 1.5707963267948966)), reach + x_ext);
      ext[2] = reach;
      break;
    case SpaceId::euclidean:
      ext[1] = reach;
      ext[2] = reach;
      break;
  }
  for (int a = 0; a < 3; ++a) {
    const int m = static_cast<int>(std::ceil(ext[a] / spec.step[a] - 1e-9)) + 3;
    spec.lo[a] = -m;
    spec.hi[a] = m;
  }
  const Index3 e = spec.hi - spec.lo + Index3::Ones();
  if (std::int64_t{e[0]} * e[1] * e[2] > opt.max_nodes) throw ResourceCapError("Loewner lattice exceeds the node cap");
  return spec;
}

LoewnerSample loewner_on(const LatticeGraph& lg, double Q, double t, double scale, const ModulusOptions& mopt) {
  if (!(t > 0.0)) throw std::invalid_argument("Loewner t must be positive");
  const double h = lg.spec().h;
  CurveFamily<LatticeGraph> fam;
  fam.graph = &lg;
  fam.E = axis_nodes(lg, -(1.0 + 0.5 * t) * scale, -0.5 * t * scale, h);
  fam.F = axis_nodes(lg, 0.5 * t * scale, (1.0 + 0.5 * t) * scale, h);
  LoewnerSample s;
  s.t = t;
  s.min_diam = scale;
  const ShortestPaths sp = dijkstra(lg, std::span<const NodeId>(fam.E));
  s.separation = kInf;
  for (NodeId f : fam.F) s.separation = std::min(s.separation, sp.dist[f]);
  s.modulus = q_modulus(fam, Q, mopt);
  return s;
}

}  // namespace

LoewnerSample loewner_estimate(const SpaceModel& space, double Q, double t, double scale, const LoewnerOptions& opt) {
  if (!(scale > 0.0)) throw std::invalid_argument("Loewner scale must be positive");
  const LatticeGraph lg(loewner_lattice(space, t, scale, opt));
  return loewner_on(lg, Q, t, scale, opt.modulus);
}

std::vector<LoewnerSample> loewner_series(const SpaceModel& space, double Q, const std::vector<double>& t_list,
                                          double scale, const LoewnerOptions& opt) {
  if (t_list.empty()) return {};
  if (!(scale > 0.0)) throw std::invalid_argument("Loewner scale must be positive");
  const double t_max = *std::max_element(t_list.begin(), t_list.end());
  const LatticeGraph lg(loewner_lattice(space, t_max, scale, opt));
  std::vector<LoewnerSample> out;
  for (double t : t_list) out.push_back(loewner_on(lg, Q, t, scale, opt.modulus));
  return out;
}

nlohmann::json to_json(const LoewnerSample& s) {
  return {{"t", s.t}, {"separation", s.separation}, {"min_diam", s.min_diam}, {"modulus", to_json(s.modulus)}};
}

#define QCLAB_INSTANTIATE(G)                                                                                    \
  template void validate_family<G>(const CurveFamily<G>&);                                                     \
  template bool induces_connected<G>(const G&, const std::vector<NodeId>&);                                    \
  template double path_integral<G>(const G&, const Density&, const std::vector<NodeId>&);                      \
  template double energy<G>(const G&, const Density&, double);                                                 \
  template AdmissibilityReport admissibility_check<G>(const CurveFamily<G>&, const Density&, int, std::uint64_t); \
  template ModulusResult q_modulus<G>(const CurveFamily<G>&, double, const ModulusOptions&);

QCLAB_INSTANTIATE(WeightedGraph)
QCLAB_INSTANTIATE(LatticeGraph)

#undef QCLAB_INSTANTIATE

}  // namespace qclab
