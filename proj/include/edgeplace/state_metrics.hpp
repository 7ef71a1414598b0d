#pragma once

#include <cassert>
#include <span>
#include <vector>

#include "edgeplace/metrics.hpp"
#include "edgeplace/placement.hpp"

namespace edgeplace {

namespace detail {

inline double routed_comm_time(const ResourceGraph& res, const AppEdgeSpec& e,
                               const RoutedPath& p) {
  double t = 0.0;
  for (int l : p.links) t += res.links[l].latency + e.msg_size / res.links[l].bandwidth;
  return t;
}

}  // namespace detail

/// Completion time of one placed component: computation on its host plus the
/// communication of its attributed routed edges. Each application edge is
/// charged exactly once, to the endpoint with the larger component id, so the
/// application-level sum counts every edge once.
inline double completion_time_component(const ResourceGraph& res, const Workload& w,
                                        const PlacementState& s, int comp) {
  assert(s.placed(comp));
  double t = comp_time(w.component(comp), res.nodes[s.host[comp]]);
  const int a = w.app_of_component(comp);
  for (int ge = w.edge_offset[a]; ge < w.edge_offset[a + 1]; ++ge) {
    if (!s.routes[ge]) continue;
    auto [x, y] = w.edge_endpoints(ge);
    if (std::max(x, y) != comp) continue;
    t += detail::routed_comm_time(res, w.edge(ge), *s.routes[ge]);
  }
  return t;
}

/// Sum of all per-component completion times (sequential workflow).
inline double completion_time_app(const ResourceGraph& res, const Workload& w,
                                  const PlacementState& s) {
  assert(s.complete());
  double t = 0.0;
  for (int c = 0; c < w.total_components(); ++c)
    t += completion_time_component(res, w, s, c);
  return t;
}

/// Mean utilization over available nodes; per node, the mean of used/total
/// over dimensions with nonzero capacity (all-zero-capacity nodes count 0).
inline double resource_utilization(const ResourceGraph& res, const PlacementState& s) {
  int n_avail = 0;
  double total = 0.0;
  for (int v = 0; v < static_cast<int>(res.nodes.size()); ++v) {
    if (!s.avail[v]) continue;
    ++n_avail;
    const ResourceVec cap = res.nodes[v].capacity();
    double mean = 0.0;
    int dims = 0;
    for (int k = 0; k < kResourceDims; ++k) {
      if (cap[k] <= 0) continue;
      mean += (cap[k] - s.residual[v][k]) / cap[k];
      ++dims;
    }
    if (dims > 0) total += mean / dims;
  }
  return n_avail > 0 ? total / n_avail : 0.0;
}

/// Percentage of components whose completion time exceeds their deadline.
inline double sla_violation_rate(const ResourceGraph& res, const Workload& w,
                                 const PlacementState& s) {
  assert(s.complete());
  const int n = w.total_components();
  int missed = 0;
  for (int c = 0; c < n; ++c)
    if (completion_time_component(res, w, s, c) > w.component(c).ddl) ++missed;
  return 100.0 * missed / n;
}

/// Full-system cost report; requires a complete placement.
inline CostReport full_cost_report(const ResourceGraph& res, const Workload& w,
                                   const PlacementState& s, const MetricWeights& wt) {
  assert(s.complete());
  CostReport r;
  r.per_component_ct.reserve(w.total_components());
  int missed = 0;
  for (int c = 0; c < w.total_components(); ++c) {
    double ct = completion_time_component(res, w, s, c);
    r.per_component_ct.push_back(ct);
    r.ct_app += ct;
    if (ct > w.component(c).ddl) ++missed;
  }
  r.ru = resource_utilization(res, s);
  r.svr = 100.0 * missed / w.total_components();
  r.objective = objective_value(r, wt);
  return r;
}

/// Zone-scope cost report over a possibly partial state: utilization over the
/// zone's available nodes, completion times and SLA misses over components
/// currently hosted inside the zone (SVR is 0 when the zone hosts nothing).
inline CostReport zone_cost_report(const ResourceGraph& res, const Workload& w,
                                   const PlacementState& s,
                                   std::span<const int> zone_nodes,
                                   const MetricWeights& wt) {
  std::vector<char> in_zone(res.nodes.size(), 0);
  for (int v : zone_nodes) in_zone[v] = 1;

  CostReport r;
  int missed = 0, hosted = 0;
  for (int c = 0; c < w.total_components(); ++c) {
    if (!s.placed(c) || !in_zone[s.host[c]]) continue;
    double ct = completion_time_component(res, w, s, c);
    r.per_component_ct.push_back(ct);
    r.ct_app += ct;
    ++hosted;
    if (ct > w.component(c).ddl) ++missed;
  }

  int n_avail = 0;
  double total = 0.0;
  for (int v : zone_nodes) {
    if (!s.avail[v]) continue;
    ++n_avail;
    const ResourceVec cap = res.nodes[v].capacity();
    double mean = 0.0;
    int dims = 0;
    for (int k = 0; k < kResourceDims; ++k) {
      if (cap[k] <= 0) continue;
      mean += (cap[k] - s.residual[v][k]) / cap[k];
      ++dims;
    }
    if (dims > 0) total += mean / dims;
  }
  r.ru = n_avail > 0 ? total / n_avail : 0.0;
  r.svr = hosted > 0 ? 100.0 * missed / hosted : 0.0;
  r.objective = objective_value(r, wt);
  return r;
}

}  // namespace edgeplace
