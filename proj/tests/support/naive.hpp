#pragma once

// Test-only oracles, kept independent of the engine's code paths: the cost
// model recomputed with straight-line loops from the host map and stored
// routes, and best-route search by exhaustive simple-path enumeration.

#include <cmath>
#include <limits>
#include <vector>

#include "edgeplace/model.hpp"
#include "edgeplace/placement.hpp"

namespace naive {

using namespace edgeplace;

struct RouteAnswer {
  bool feasible = false;
  double cost = std::numeric_limits<double>::infinity();
};

/// Minimum comm_time over all simple paths using available nodes (within
/// `domain` when non-empty) and links with bandwidth >= the edge's demand;
/// infeasible when that minimum exceeds max_latency or no path exists.
inline RouteAnswer best_route_bruteforce(const ResourceGraph& res,
                                         const std::vector<uint8_t>& avail,
                                         const AppEdgeSpec& e, int src, int dst,
                                         const std::vector<int>& domain = {}) {
  const int n = static_cast<int>(res.nodes.size());
  std::vector<char> allowed(n, domain.empty() ? 1 : 0);
  for (int v : domain) allowed[v] = 1;
  for (int v = 0; v < n; ++v)
    if (!avail[v]) allowed[v] = 0;
  RouteAnswer best;
  if (!allowed[src] || !allowed[dst]) return best;
  if (src == dst) return {true, 0.0};

  std::vector<char> on_path(n, 0);
  on_path[src] = 1;
  double best_cost = std::numeric_limits<double>::infinity();
  auto dfs = [&](auto&& self, int u, double cost) -> void {
    if (u == dst) {
      best_cost = std::min(best_cost, cost);
      return;
    }
    for (int l = 0; l < static_cast<int>(res.links.size()); ++l) {
      const ResourceLinkSpec& link = res.links[l];
      int v = link.a == u ? link.b : link.b == u ? link.a : -1;
      if (v < 0 || on_path[v] || !allowed[v]) continue;
      if (link.bandwidth < e.min_bandwidth) continue;
      on_path[v] = 1;
      self(self, v, cost + link.latency + e.msg_size / link.bandwidth);
      on_path[v] = 0;
    }
  };
  dfs(dfs, src, 0.0);
  if (best_cost <= e.max_latency) return {true, best_cost};
  return best;
}

inline double route_cost(const ResourceGraph& res, const AppEdgeSpec& e,
                         const RoutedPath& p) {
  double c = 0.0;
  for (int l : p.links) c += res.links[l].latency + e.msg_size / res.links[l].bandwidth;
  return c;
}

/// CT per component recomputed from scratch: pt + work/speed on the host,
/// plus each stored route's cost charged to the edge's larger endpoint.
inline std::vector<double> per_component_ct(const ResourceGraph& res, const Workload& w,
                                            const PlacementState& s) {
  std::vector<double> ct(w.total_components(), 0.0);
  for (int c = 0; c < w.total_components(); ++c) {
    const ComponentSpec& spec = w.component(c);
    const ResourceNodeSpec& host = res.nodes[s.host[c]];
    ct[c] = host.pt + spec.work / host.speed;
  }
  for (int ge = 0; ge < w.total_edges(); ++ge) {
    if (!s.routes[ge]) continue;
    auto [x, y] = w.edge_endpoints(ge);
    ct[std::max(x, y)] += route_cost(res, w.edge(ge), *s.routes[ge]);
  }
  return ct;
}

inline double ct_app(const ResourceGraph& res, const Workload& w, const PlacementState& s) {
  double t = 0.0;
  for (double x : per_component_ct(res, w, s)) t += x;
  return t;
}

/// RU recomputed from the host map alone (not the engine's residuals).
inline double ru_from_hosts(const ResourceGraph& res, const Workload& w,
                            const PlacementState& s) {
  const int n = static_cast<int>(res.nodes.size());
  std::vector<ResourceVec> used(n, ResourceVec{0, 0, 0, 0});
  for (int c = 0; c < w.total_components(); ++c) {
    const ResourceVec d = w.component(c).demand();
    for (int k = 0; k < kResourceDims; ++k) used[s.host[c]][k] += d[k];
  }
  int n_avail = 0;
  double total = 0.0;
  for (int v = 0; v < n; ++v) {
    if (!s.avail[v]) continue;
    ++n_avail;
    const ResourceVec cap = res.nodes[v].capacity();
    double mean = 0.0;
    int dims = 0;
    for (int k = 0; k < kResourceDims; ++k) {
      if (cap[k] <= 0) continue;
      mean += used[v][k] / cap[k];
      ++dims;
    }
    if (dims > 0) total += mean / dims;
  }
  return n_avail > 0 ? total / n_avail : 0.0;
}

inline double svr(const ResourceGraph& res, const Workload& w, const PlacementState& s) {
  const std::vector<double> ct = per_component_ct(res, w, s);
  int missed = 0;
  for (int c = 0; c < w.total_components(); ++c)
    if (ct[c] > w.component(c).ddl) ++missed;
  return 100.0 * missed / w.total_components();
}

inline double objective(const ResourceGraph& res, const Workload& w,
                        const PlacementState& s, const MetricWeights& wt) {
  return wt.alpha * ru_from_hosts(res, w, s) - wt.beta * ct_app(res, w, s) -
         wt.gamma * svr(res, w, s);
}

}  // namespace naive
