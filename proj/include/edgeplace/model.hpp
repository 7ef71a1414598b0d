#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "edgeplace/outcome.hpp"
#include "edgeplace/rng.hpp"

namespace edgeplace {

inline constexpr int kResourceDims = 4;
inline constexpr std::array<const char*, kResourceDims> kDimNames = {"cpu", "gpu", "ram",
                                                                     "stor"};

/// One value per capacity dimension (cpu, gpu, ram, stor).
using ResourceVec = std::array<double, kResourceDims>;

/// One microservice of an application: resource demands, abstract compute
/// volume and a completion deadline. Runtime on a node is work / node.speed.
struct ComponentSpec {
  int id = 0;
  double cpu = 0, gpu = 0, ram = 0, stor = 0;
  double work = 0;
  double ddl = 0;  // deadline, ms

  ResourceVec demand() const { return {cpu, gpu, ram, stor}; }
};

/// Communication requirement between two components (undirected).
struct AppEdgeSpec {
  int a = 0, b = 0;
  double max_latency = 0;    // ms bound on the routed path
  double msg_size = 0;       // data units per message
  double min_bandwidth = 0;  // data units per ms each traversed link must offer
};

struct ApplicationGraph {
  std::string name;
  std::vector<ComponentSpec> components;
  std::vector<AppEdgeSpec> edges;
};

/// A compute node anywhere on the cloud-edge substrate.
struct ResourceNodeSpec {
  int id = 0;
  double cpu = 0, gpu = 0, ram = 0, stor = 0;
  double pt = 0;     // device response time, ms
  double speed = 1;  // compute units per ms
  bool aval = true;

  ResourceVec capacity() const { return {cpu, gpu, ram, stor}; }
};

struct ResourceLinkSpec {
  int a = 0, b = 0;
  double latency = 0;    // ms
  double bandwidth = 0;  // data units per ms
};

struct ResourceGraph {
  std::vector<ResourceNodeSpec> nodes;
  std::vector<ResourceLinkSpec> links;
};

/// Assignment of every resource node to exactly one zone.
struct Partition {
  std::vector<int> assignment;  // node id -> zone id
  int n_local = 1;
};

/// A zone's induced resource graph with node ids re-indexed from 0. The
/// original ids are retained in `global_ids` (ascending).
struct ZoneSubgraph {
  ResourceGraph graph;
  std::vector<int> global_ids;
};

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline bool connected_over(int n, const std::vector<std::vector<int>>& adj,
                           const std::vector<char>& active) {
  int start = -1, active_count = 0;
  for (int i = 0; i < n; ++i)
    if (active[i]) {
      if (start < 0) start = i;
      ++active_count;
    }
  if (active_count <= 1) return true;
  std::vector<char> seen(n, 0);
  std::deque<int> q{start};
  seen[start] = 1;
  int reached = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (int v : adj[u])
      if (active[v] && !seen[v]) {
        seen[v] = 1;
        ++reached;
        q.push_back(v);
      }
  }
  return reached == active_count;
}

}  // namespace detail

/// Returns every violated invariant; empty means the application is valid.
inline std::vector<std::string> validate_application(const ApplicationGraph& app) {
  std::vector<std::string> errs;
  const int n = static_cast<int>(app.components.size());
  if (n == 0) {
    errs.push_back("application has no components");
    return errs;
  }
  std::vector<char> id_seen(n, 0);
  for (int i = 0; i < n; ++i) {
    const ComponentSpec& c = app.components[i];
    if (c.id < 0 || c.id >= n) {
      errs.push_back("component ids not contiguous from 0 (saw " + std::to_string(c.id) +
                     ")");
    } else if (id_seen[c.id]) {
      errs.push_back("duplicate component id " + std::to_string(c.id));
    } else {
      id_seen[c.id] = 1;
    }
    if (c.id != i)
      errs.push_back("component at index " + std::to_string(i) + " has id " +
                     std::to_string(c.id));
    const ResourceVec d = c.demand();
    for (int k = 0; k < kResourceDims; ++k)
      if (d[k] < 0)
        errs.push_back("component " + std::to_string(c.id) + ": negative demand (" +
                       kDimNames[k] + ")");
    if (c.work < 0)
      errs.push_back("component " + std::to_string(c.id) + ": negative demand (work)");
    if (!(c.ddl > 0))
      errs.push_back("component " + std::to_string(c.id) + ": nonpositive deadline");
  }

  std::vector<std::vector<int>> adj(n);
  std::vector<std::pair<int, int>> seen_pairs;
  for (size_t e = 0; e < app.edges.size(); ++e) {
    const AppEdgeSpec& ed = app.edges[e];
    bool endpoints_ok = true;
    for (int v : {ed.a, ed.b})
      if (v < 0 || v >= n) {
        errs.push_back("edge " + std::to_string(e) + ": dangling endpoint " +
                       std::to_string(v));
        endpoints_ok = false;
      }
    if (!endpoints_ok) continue;
    if (ed.a == ed.b) {
      errs.push_back("edge " + std::to_string(e) + ": self-loop on component " +
                     std::to_string(ed.a));
      continue;
    }
    std::pair<int, int> key{std::min(ed.a, ed.b), std::max(ed.a, ed.b)};
    if (std::find(seen_pairs.begin(), seen_pairs.end(), key) != seen_pairs.end())
      errs.push_back("duplicate edge between " + std::to_string(key.first) + " and " +
                     std::to_string(key.second));
    seen_pairs.push_back(key);
    if (!(ed.max_latency > 0))
      errs.push_back("edge " + std::to_string(e) + ": nonpositive max_latency");
    if (ed.msg_size < 0)
      errs.push_back("edge " + std::to_string(e) + ": negative msg_size");
    if (!(ed.min_bandwidth > 0))
      errs.push_back("edge " + std::to_string(e) + ": nonpositive min_bandwidth");
    adj[ed.a].push_back(ed.b);
    adj[ed.b].push_back(ed.a);
  }
  if (errs.empty() && !detail::connected_over(n, adj, std::vector<char>(n, 1)))
    errs.push_back("application graph disconnected");
  return errs;
}

/// Returns every violated invariant; empty means the resource graph is valid.
inline std::vector<std::string> validate_resources(const ResourceGraph& res) {
  std::vector<std::string> errs;
  const int n = static_cast<int>(res.nodes.size());
  if (n == 0) {
    errs.push_back("resource graph has no nodes");
    return errs;
  }
  for (int i = 0; i < n; ++i) {
    const ResourceNodeSpec& v = res.nodes[i];
    if (v.id != i)
      errs.push_back("node at index " + std::to_string(i) + " has id " +
                     std::to_string(v.id));
    const ResourceVec cap = v.capacity();
    for (int k = 0; k < kResourceDims; ++k)
      if (cap[k] < 0)
        errs.push_back("node " + std::to_string(v.id) + ": negative capacity (" +
                       kDimNames[k] + ")");
    if (v.pt < 0) errs.push_back("node " + std::to_string(v.id) + ": negative pt");
    if (!(v.speed > 0))
      errs.push_back("node " + std::to_string(v.id) + ": nonpositive speed");
  }

  std::vector<std::vector<int>> adj(n);
  std::vector<std::pair<int, int>> seen_pairs;
  for (size_t e = 0; e < res.links.size(); ++e) {
    const ResourceLinkSpec& l = res.links[e];
    bool endpoints_ok = true;
    for (int v : {l.a, l.b})
      if (v < 0 || v >= n) {
        errs.push_back("link " + std::to_string(e) + ": dangling endpoint " +
                       std::to_string(v));
        endpoints_ok = false;
      }
    if (!endpoints_ok) continue;
    if (l.a == l.b) {
      errs.push_back("link " + std::to_string(e) + ": self-loop on node " +
                     std::to_string(l.a));
      continue;
    }
    std::pair<int, int> key{std::min(l.a, l.b), std::max(l.a, l.b)};
    if (std::find(seen_pairs.begin(), seen_pairs.end(), key) != seen_pairs.end())
      errs.push_back("duplicate link between " + std::to_string(key.first) + " and " +
                     std::to_string(key.second));
    seen_pairs.push_back(key);
    if (l.latency < 0) errs.push_back("link " + std::to_string(e) + ": negative latency");
    if (!(l.bandwidth > 0))
      errs.push_back("link " + std::to_string(e) + ": nonpositive bandwidth");
  }
  if (errs.empty()) {
    // Connectivity over the currently available subgraph; links count only
    // when both endpoints are available.
    std::vector<char> active(n, 0);
    for (int i = 0; i < n; ++i) active[i] = res.nodes[i].aval ? 1 : 0;
    std::vector<std::vector<int>> avail_adj(n);
    for (const ResourceLinkSpec& l : res.links)
      if (active[l.a] && active[l.b]) {
        avail_adj[l.a].push_back(l.b);
        avail_adj[l.b].push_back(l.a);
      }
    if (!detail::connected_over(n, avail_adj, active))
      errs.push_back("available subgraph disconnected");
  }
  return errs;
}

// ---------------------------------------------------------------------------
// Partitioning

/// Node-level adjacency lists (sorted ascending), links taken regardless of
/// availability.
inline std::vector<std::vector<int>> node_adjacency(const ResourceGraph& res) {
  std::vector<std::vector<int>> adj(res.nodes.size());
  for (const ResourceLinkSpec& l : res.links) {
    adj[l.a].push_back(l.b);
    adj[l.b].push_back(l.a);
  }
  for (auto& v : adj) std::sort(v.begin(), v.end());
  return adj;
}

/// Splits the resource graph into n_zones connected zones balanced within one
/// node, by seeded multi-source BFS growth. Deterministic in (graph, n_zones,
/// seed). Fails after bounded retries if the graph cannot be split that way.
inline Outcome<Partition> partition_resources(const ResourceGraph& res, int n_zones,
                                              uint64_t seed) {
  const int n = static_cast<int>(res.nodes.size());
  if (n_zones < 1) return Error{"partition", "n_zones must be positive"};
  if (n_zones > n)
    return Error{"partition", "n_zones (" + std::to_string(n_zones) +
                                  ") exceeds node count (" + std::to_string(n) + ")"};
  const auto adj = node_adjacency(res);
  const int cap = (n + n_zones - 1) / n_zones;  // ceil(n / n_zones)

  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(attempt)));
    // n_zones distinct growth seeds via partial Fisher-Yates.
    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
    for (int i = 0; i < n_zones; ++i) {
      int j = i + rng.uniform_int(n - i);
      std::swap(ids[i], ids[j]);
    }

    std::vector<int> owner(n, -1);
    std::vector<int> size(n_zones, 0);
    std::vector<std::deque<int>> frontier(n_zones);
    for (int z = 0; z < n_zones; ++z) {
      owner[ids[z]] = z;
      size[z] = 1;
      frontier[z].push_back(ids[z]);
    }

    int claimed = n_zones;
    bool progress = true;
    while (claimed < n && progress) {
      progress = false;
      for (int z = 0; z < n_zones; ++z) {
        if (size[z] >= cap) continue;
        int grabbed = -1;
        while (!frontier[z].empty() && grabbed < 0) {
          int u = frontier[z].front();
          for (int v : adj[u])
            if (owner[v] < 0) {
              grabbed = v;
              break;
            }
          if (grabbed < 0) frontier[z].pop_front();
        }
        if (grabbed >= 0) {
          owner[grabbed] = z;
          ++size[z];
          ++claimed;
          frontier[z].push_back(grabbed);
          progress = true;
        }
      }
    }
    if (claimed < n) continue;
    int lo = *std::min_element(size.begin(), size.end());
    int hi = *std::max_element(size.begin(), size.end());
    if (hi - lo > 1) continue;
    return Partition{std::move(owner), n_zones};
  }
  return Error{"partition",
               "no balanced connected partition found after 100 seeded attempts"};
}

/// Extracts one zone's induced subgraph, re-indexing node ids and keeping the
/// mapping back to global ids. Attributes are copied bit-identically.
inline Outcome<ZoneSubgraph> induced_subgraph(const ResourceGraph& res,
                                              const Partition& part, int zone) {
  if (zone < 0 || zone >= part.n_local)
    return Error{"zone", "unknown zone id " + std::to_string(zone)};
  ZoneSubgraph out;
  std::vector<int> local_of(res.nodes.size(), -1);
  for (int i = 0; i < static_cast<int>(res.nodes.size()); ++i)
    if (part.assignment[i] == zone) {
      local_of[i] = static_cast<int>(out.global_ids.size());
      out.global_ids.push_back(i);
      ResourceNodeSpec v = res.nodes[i];
      v.id = local_of[i];
      out.graph.nodes.push_back(v);
    }
  for (const ResourceLinkSpec& l : res.links)
    if (local_of[l.a] >= 0 && local_of[l.b] >= 0) {
      ResourceLinkSpec c = l;
      c.a = local_of[l.a];
      c.b = local_of[l.b];
      out.graph.links.push_back(c);
    }
  return out;
}

}  // namespace edgeplace
