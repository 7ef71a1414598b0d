#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "edgeplace/metrics.hpp"
#include "edgeplace/model.hpp"
#include "edgeplace/outcome.hpp"

namespace edgeplace {

/// An ordered arrival sequence of applications sharing one resource graph.
/// Components and edges get global indices by per-application offsets, so a
/// single placement state can span the whole sequence. Most operations work
/// on a workload of one.
struct Workload {
  std::vector<ApplicationGraph> apps;
  std::vector<int> comp_offset;  // size apps+1
  std::vector<int> edge_offset;  // size apps+1

  static Workload of(std::vector<ApplicationGraph> applications) {
    Workload w;
    w.apps = std::move(applications);
    w.comp_offset.assign(1, 0);
    w.edge_offset.assign(1, 0);
    for (const ApplicationGraph& a : w.apps) {
      w.comp_offset.push_back(w.comp_offset.back() + static_cast<int>(a.components.size()));
      w.edge_offset.push_back(w.edge_offset.back() + static_cast<int>(a.edges.size()));
    }
    return w;
  }

  int total_components() const { return comp_offset.back(); }
  int total_edges() const { return edge_offset.back(); }

  int app_of_component(int gc) const {
    int a = 0;
    while (gc >= comp_offset[a + 1]) ++a;
    return a;
  }

  const ComponentSpec& component(int gc) const {
    int a = app_of_component(gc);
    return apps[a].components[gc - comp_offset[a]];
  }

  const AppEdgeSpec& edge(int ge) const {
    int a = 0;
    while (ge >= edge_offset[a + 1]) ++a;
    return apps[a].edges[ge - edge_offset[a]];
  }

  /// Global component ids of edge `ge`'s endpoints.
  std::pair<int, int> edge_endpoints(int ge) const {
    int a = 0;
    while (ge >= edge_offset[a + 1]) ++a;
    const AppEdgeSpec& e = apps[a].edges[ge - edge_offset[a]];
    return {comp_offset[a] + e.a, comp_offset[a] + e.b};
  }
};

/// Deterministic visitation order: BFS from component 0, neighbors ascending.
inline std::vector<int> placement_order(const ApplicationGraph& app) {
  const int n = static_cast<int>(app.components.size());
  std::vector<std::vector<int>> adj(n);
  for (const AppEdgeSpec& e : app.edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  for (auto& v : adj) std::sort(v.begin(), v.end());
  std::vector<int> order;
  std::vector<char> seen(n, 0);
  std::deque<int> q{0};
  seen[0] = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    order.push_back(u);
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        q.push_back(v);
      }
  }
  assert(static_cast<int>(order.size()) == n);  // apps are validated connected
  return order;
}

/// Workload-level visitation: apps in arrival order, BFS inside each.
inline std::vector<int> workload_order(const Workload& w) {
  std::vector<int> order;
  for (size_t a = 0; a < w.apps.size(); ++a)
    for (int c : placement_order(w.apps[a])) order.push_back(w.comp_offset[a] + c);
  return order;
}

/// Ordered list of resource-link indices connecting two hosts.
struct RoutedPath {
  std::vector<int> links;
};

/// Partial assignment of components to nodes with residual capacities, the
/// routed path per routed application edge, and the runtime availability
/// flags. Transitions are pure: apply() returns a new state.
struct PlacementState {
  std::vector<int> host;  // global component id -> node id, -1 while unplaced
  std::vector<ResourceVec> residual;
  std::vector<uint8_t> avail;
  std::vector<std::optional<RoutedPath>> routes;  // per global edge id
  int step = 0;
  std::vector<int> placement_order;  // fixed visitation sequence (global ids)

  bool placed(int comp) const { return host[comp] >= 0; }
  bool complete() const {
    for (int h : host)
      if (h < 0) return false;
    return true;
  }
  bool node_hosts_any(int node) const {
    for (int h : host)
      if (h == node) return true;
    return false;
  }
};

inline PlacementState initial_state(const ResourceGraph& res, const Workload& w) {
  PlacementState s;
  s.host.assign(w.total_components(), -1);
  s.residual.reserve(res.nodes.size());
  s.avail.reserve(res.nodes.size());
  for (const ResourceNodeSpec& v : res.nodes) {
    s.residual.push_back(v.capacity());
    s.avail.push_back(v.aval ? 1 : 0);
  }
  s.routes.assign(w.total_edges(), std::nullopt);
  s.placement_order = workload_order(w);
  return s;
}

/// Neighbor lists annotated with the link index, for routing.
struct ResourceAdjacency {
  std::vector<std::vector<std::pair<int, int>>> nbrs;  // (node, link), ascending node

  static ResourceAdjacency of(const ResourceGraph& g) {
    ResourceAdjacency a;
    a.nbrs.resize(g.nodes.size());
    for (int l = 0; l < static_cast<int>(g.links.size()); ++l) {
      a.nbrs[g.links[l].a].push_back({g.links[l].b, l});
      a.nbrs[g.links[l].b].push_back({g.links[l].a, l});
    }
    for (auto& v : a.nbrs) std::sort(v.begin(), v.end());
    return a;
  }
};

/// Cheapest feasible route between two hosts for one application edge.
///
/// Allowed paths use only available nodes (restricted to `domain` when
/// non-empty) and links with bandwidth >= the edge's min_bandwidth; the cost
/// minimized is exactly what the cost model charges: per link, latency +
/// msg_size / bandwidth. Returns nullopt when no path exists or the cheapest
/// one exceeds the edge's max_latency. src == dst yields the empty path.
inline std::optional<RoutedPath> route(const PlacementState& s, const ResourceGraph& res,
                                       const ResourceAdjacency& adj, const AppEdgeSpec& e,
                                       int src, int dst, std::span<const int> domain = {}) {
  const int n = static_cast<int>(res.nodes.size());
  std::vector<char> allowed(n, domain.empty() ? 1 : 0);
  for (int v : domain) allowed[v] = 1;
  for (int v = 0; v < n; ++v)
    if (!s.avail[v]) allowed[v] = 0;
  if (!allowed[src] || !allowed[dst]) return std::nullopt;
  if (src == dst) return RoutedPath{};

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  std::vector<int> pred_link(n, -1), pred_node(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  dist[src] = 0.0;
  pq.push({0.0, src});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    if (u == dst) break;
    for (auto [v, l] : adj.nbrs[u]) {
      if (!allowed[v]) continue;
      const ResourceLinkSpec& link = res.links[l];
      if (link.bandwidth < e.min_bandwidth) continue;
      double nd = d + link.latency + e.msg_size / link.bandwidth;
      if (nd < dist[v]) {
        dist[v] = nd;
        pred_link[v] = l;
        pred_node[v] = u;
        pq.push({nd, v});
      }
    }
  }
  if (!(dist[dst] <= e.max_latency)) return std::nullopt;
  RoutedPath path;
  for (int v = dst; v != src; v = pred_node[v]) path.links.push_back(pred_link[v]);
  std::reverse(path.links.begin(), path.links.end());
  return path;
}

/// Convenience overload that builds the adjacency on the fly.
inline std::optional<RoutedPath> route(const PlacementState& s, const ResourceGraph& res,
                                       const AppEdgeSpec& e, int src, int dst,
                                       std::span<const int> domain = {}) {
  return route(s, res, ResourceAdjacency::of(res), e, src, dst, domain);
}

/// Feasibility flags for placing one component, aligned with `domain_nodes`.
struct ActionMask {
  std::vector<uint8_t> allowed;

  int count() const {
    int c = 0;
    for (uint8_t b : allowed) c += b;
    return c;
  }
  bool any() const { return count() > 0; }
};

namespace detail {

inline bool capacity_fits(const ResourceVec& residual, const ResourceVec& demand) {
  for (int k = 0; k < kResourceDims; ++k)
    if (residual[k] < demand[k]) return false;
  return true;
}

/// Global edge ids incident to `comp` whose other endpoint is already placed,
/// in ascending edge order.
inline std::vector<int> placed_neighbor_edges(const Workload& w, const PlacementState& s,
                                              int comp) {
  std::vector<int> out;
  const int a = w.app_of_component(comp);
  for (int ge = w.edge_offset[a]; ge < w.edge_offset[a + 1]; ++ge) {
    auto [x, y] = w.edge_endpoints(ge);
    int other = (x == comp) ? y : (y == comp) ? x : -1;
    if (other >= 0 && s.placed(other)) out.push_back(ge);
  }
  return out;
}

}  // namespace detail

/// True iff node v can host `comp` right now: available, capacity-feasible,
/// and every already-placed neighbor is reachable within its edge's latency
/// and bandwidth constraints (search restricted to `domain`).
inline bool placement_feasible(const PlacementState& s, const ResourceGraph& res,
                               const ResourceAdjacency& adj, const Workload& w, int comp,
                               int v, std::span<const int> domain, std::string* why = nullptr) {
  if (!s.avail[v]) {
    if (why) *why = "availability";
    return false;
  }
  const ResourceVec demand = w.component(comp).demand();
  for (int k = 0; k < kResourceDims; ++k)
    if (s.residual[v][k] < demand[k]) {
      if (why) *why = std::string("capacity:") + kDimNames[k];
      return false;
    }
  for (int ge : detail::placed_neighbor_edges(w, s, comp)) {
    auto [x, y] = w.edge_endpoints(ge);
    int other = (x == comp) ? y : x;
    if (!route(s, res, adj, w.edge(ge), v, s.host[other], domain)) {
      if (why) {
        const AppEdgeSpec& e = w.edge(ge);
        *why = "route:" + std::to_string(e.a) + "-" + std::to_string(e.b);
      }
      return false;
    }
  }
  return true;
}

/// Mask over `domain_nodes` for the next component. An all-false mask is a
/// legal result.
inline ActionMask action_mask(const PlacementState& s, const ResourceGraph& res,
                              const ResourceAdjacency& adj, const Workload& w, int comp,
                              std::span<const int> domain_nodes) {
  ActionMask m;
  m.allowed.resize(domain_nodes.size());
  for (size_t i = 0; i < domain_nodes.size(); ++i)
    m.allowed[i] =
        placement_feasible(s, res, adj, w, comp, domain_nodes[i], domain_nodes) ? 1 : 0;
  return m;
}

#ifndef NDEBUG
/// Debug-only invariant: residual + hosted demand == capacity per node/dim.
inline void debug_check_conservation(const PlacementState& s, const ResourceGraph& res,
                                     const Workload& w) {
  for (int v = 0; v < static_cast<int>(res.nodes.size()); ++v) {
    ResourceVec used = {0, 0, 0, 0};
    for (int c = 0; c < w.total_components(); ++c)
      if (s.host[c] == v) {
        const ResourceVec d = w.component(c).demand();
        for (int k = 0; k < kResourceDims; ++k) used[k] += d[k];
      }
    const ResourceVec cap = res.nodes[v].capacity();
    for (int k = 0; k < kResourceDims; ++k) {
      assert(s.residual[v][k] >= 0.0);
      assert(std::abs(s.residual[v][k] + used[k] - cap[k]) <=
             1e-9 * std::max(1.0, cap[k]));
    }
  }
}
#endif

/// Pure transition: places `comp` on `node`, decrementing residuals and
/// routing every edge to an already-placed neighbor. Rejects infeasible
/// placements with an error naming the violated constraint.
inline Outcome<PlacementState> apply(const PlacementState& s, const ResourceGraph& res,
                                     const ResourceAdjacency& adj, const Workload& w,
                                     int comp, int node,
                                     std::span<const int> domain = {}) {
  if (s.placed(comp))
    return Error{"placed", "component " + std::to_string(comp) + " already placed"};
  std::string why;
  if (!placement_feasible(s, res, adj, w, comp, node, domain, &why))
    return Error{why, "cannot place component " + std::to_string(comp) + " on node " +
                          std::to_string(node) + " (" + why + ")"};

  PlacementState next = s;
  next.host[comp] = node;
  const ResourceVec demand = w.component(comp).demand();
  for (int k = 0; k < kResourceDims; ++k) next.residual[node][k] -= demand[k];
  for (int ge : detail::placed_neighbor_edges(w, s, comp)) {
    auto [x, y] = w.edge_endpoints(ge);
    int other = (x == comp) ? y : x;
    auto path = route(next, res, adj, w.edge(ge), node, next.host[other], domain);
    assert(path.has_value());  // feasibility was just checked
    next.routes[ge] = std::move(*path);
  }
  next.step = s.step + 1;
#ifndef NDEBUG
  debug_check_conservation(next, res, w);
#endif
  return next;
}

}  // namespace edgeplace
