#pragma once

// Seeded random instance generators for property tests: connected resource
// graphs and applications sized for exhaustive verification.

#include <algorithm>
#include <vector>

#include "edgeplace/model.hpp"
#include "edgeplace/placement.hpp"
#include "edgeplace/rng.hpp"

namespace gen {

using namespace edgeplace;

inline ResourceGraph random_resources(Rng& rng, int min_nodes, int max_nodes) {
  ResourceGraph g;
  const int n = min_nodes + rng.uniform_int(max_nodes - min_nodes + 1);
  const bool with_gpu = rng.uniform() < 0.5;
  for (int i = 0; i < n; ++i) {
    ResourceNodeSpec v;
    v.id = i;
    v.cpu = 4 + rng.uniform_int(7);
    v.gpu = with_gpu ? 2 + rng.uniform_int(3) : 0;
    v.ram = 4 + rng.uniform_int(7);
    v.stor = 4 + rng.uniform_int(13);
    v.pt = rng.uniform(0.0, 2.0);
    v.speed = rng.uniform(0.5, 2.5);
    v.aval = true;
    g.nodes.push_back(v);
  }
  // random spanning tree, then extra links
  for (int i = 1; i < n; ++i) {
    ResourceLinkSpec l;
    l.a = rng.uniform_int(i);
    l.b = i;
    l.latency = rng.uniform(0.0, 2.0);
    l.bandwidth = 2.0 + rng.uniform(0.0, 8.0);
    g.links.push_back(l);
  }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      bool present = false;
      for (const ResourceLinkSpec& l : g.links)
        if ((l.a == a && l.b == b) || (l.a == b && l.b == a)) present = true;
      if (!present && rng.uniform() < 0.35) {
        ResourceLinkSpec l;
        l.a = a;
        l.b = b;
        l.latency = rng.uniform(0.0, 2.0);
        l.bandwidth = 2.0 + rng.uniform(0.0, 8.0);
        g.links.push_back(l);
      }
    }
  return g;
}

inline ApplicationGraph random_app(Rng& rng, int min_comps, int max_comps, bool with_gpu) {
  ApplicationGraph app;
  const int n = min_comps + rng.uniform_int(max_comps - min_comps + 1);
  for (int i = 0; i < n; ++i) {
    ComponentSpec c;
    c.id = i;
    c.cpu = 1 + rng.uniform_int(3);
    c.gpu = with_gpu && rng.uniform() < 0.4 ? 1 : 0;
    c.ram = 1 + rng.uniform_int(3);
    c.stor = 1 + rng.uniform_int(4);
    c.work = 1 + rng.uniform(0.0, 7.0);
    c.ddl = rng.uniform(6.0, 40.0);
    app.components.push_back(c);
  }
  for (int i = 1; i < n; ++i) {
    AppEdgeSpec e;
    e.a = rng.uniform_int(i);
    e.b = i;
    e.max_latency = rng.uniform(4.0, 20.0);
    e.msg_size = rng.uniform(0.0, 8.0);
    e.min_bandwidth = 1.0 + rng.uniform(0.0, 2.0);
    app.edges.push_back(e);
  }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      bool present = false;
      for (const AppEdgeSpec& e : app.edges)
        if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) present = true;
      if (!present && rng.uniform() < 0.3) {
        AppEdgeSpec e;
        e.a = a;
        e.b = b;
        e.max_latency = rng.uniform(4.0, 20.0);
        e.msg_size = rng.uniform(0.0, 8.0);
        e.min_bandwidth = 1.0 + rng.uniform(0.0, 2.0);
        app.edges.push_back(e);
      }
    }
  return app;
}

struct Instance {
  ResourceGraph res;
  ApplicationGraph app;
};

/// Tiny instance sized for the exhaustive oracle (<=4 components, <=5 nodes).
inline Instance random_instance(Rng& rng) {
  Instance inst;
  inst.res = random_resources(rng, 2, 5);
  bool with_gpu = false;
  for (const ResourceNodeSpec& v : inst.res.nodes)
    if (v.gpu > 0) with_gpu = true;
  inst.app = random_app(rng, 1, 4, with_gpu);
  return inst;
}

/// Random partial state: up to `max_place` components placed by uniformly
/// random feasible choices over the full node set.
inline PlacementState random_partial_state(const Instance& inst, const Workload& w,
                                           const ResourceAdjacency& adj, Rng& rng,
                                           int max_place) {
  PlacementState s = initial_state(inst.res, w);
  std::vector<int> all(inst.res.nodes.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  const std::vector<int> order = s.placement_order;
  int placed = 0;
  for (int comp : order) {
    if (placed >= max_place) break;
    ActionMask m = action_mask(s, inst.res, adj, w, comp, all);
    std::vector<int> options;
    for (size_t i = 0; i < m.allowed.size(); ++i)
      if (m.allowed[i]) options.push_back(static_cast<int>(i));
    if (options.empty()) break;
    int pick = options[rng.uniform_int(static_cast<int>(options.size()))];
    auto next = apply(s, inst.res, adj, w, comp, pick, all);
    if (!next.ok()) break;
    s = std::move(*next);
    ++placed;
  }
  return s;
}

}  // namespace gen
