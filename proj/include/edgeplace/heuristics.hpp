#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgeplace/outcome.hpp"
#include "edgeplace/placement.hpp"

namespace edgeplace {

enum class HeuristicKind { first_fit, best_fit, worst_fit, round_robin };

inline const char* to_string(HeuristicKind k) {
  switch (k) {
    case HeuristicKind::first_fit: return "first_fit";
    case HeuristicKind::best_fit: return "best_fit";
    case HeuristicKind::worst_fit: return "worst_fit";
    case HeuristicKind::round_robin: return "round_robin";
  }
  return "?";
}

inline Outcome<HeuristicKind> heuristic_from_string(const std::string& s) {
  if (s == "first_fit") return HeuristicKind::first_fit;
  if (s == "best_fit") return HeuristicKind::best_fit;
  if (s == "worst_fit") return HeuristicKind::worst_fit;
  if (s == "round_robin") return HeuristicKind::round_robin;
  return Error{"args", "unknown heuristic kind '" + s + "'"};
}

/// Normalized slack left on a node if `demand` were placed there: sum over
/// nonzero-capacity dimensions of residual/capacity after placement.
/// Comparable across heterogeneous nodes; best_fit minimizes it, worst_fit
/// maximizes it.
inline double residual_score_after(const ResourceNodeSpec& node, const ResourceVec& residual,
                                   const ResourceVec& demand) {
  const ResourceVec cap = node.capacity();
  double score = 0.0;
  for (int k = 0; k < kResourceDims; ++k)
    if (cap[k] > 0) score += (residual[k] - demand[k]) / cap[k];
  return score;
}

/// Picks a node index (into `domain`) from a feasibility mask according to the
/// heuristic rule. `rr_cursor` persists across calls of one placement run.
/// Ties break toward the lowest node id. Returns -1 when the mask is empty.
inline int choose_heuristic(HeuristicKind kind, const ActionMask& mask,
                            std::span<const int> domain, const ResourceGraph& res,
                            const PlacementState& s, const ResourceVec& demand,
                            int& rr_cursor) {
  const int n = static_cast<int>(domain.size());
  switch (kind) {
    case HeuristicKind::first_fit: {
      for (int i = 0; i < n; ++i)
        if (mask.allowed[i]) return i;
      return -1;
    }
    case HeuristicKind::round_robin: {
      for (int off = 0; off < n; ++off) {
        int i = (rr_cursor + off) % n;
        if (mask.allowed[i]) {
          rr_cursor = (i + 1) % n;
          return i;
        }
      }
      return -1;
    }
    case HeuristicKind::best_fit:
    case HeuristicKind::worst_fit: {
      int best = -1;
      double best_score = 0.0;
      for (int i = 0; i < n; ++i) {
        if (!mask.allowed[i]) continue;
        int v = domain[i];
        double score = residual_score_after(res.nodes[v], s.residual[v], demand);
        bool better = best < 0 || (kind == HeuristicKind::best_fit ? score < best_score
                                                                   : score > best_score);
        if (better) {
          best = i;
          best_score = score;
        }
      }
      return best;
    }
  }
  return -1;
}

struct HeuristicResult {
  PlacementState state;
  bool feasible = false;
  int failed_component = -1;  // global component id when infeasible
};

/// Places the whole workload with one bin-packing heuristic over the full
/// node set, components in workload order. Failure (an all-false mask) is a
/// value, not an error. `seed` is accepted for signature parity with the
/// stochastic policies; all four heuristics are deterministic.
inline HeuristicResult heuristic_place(const Workload& w, const ResourceGraph& res,
                                       HeuristicKind kind,
                                       [[maybe_unused]] uint64_t seed = 0) {
  const ResourceAdjacency adj = ResourceAdjacency::of(res);
  std::vector<int> all_nodes(res.nodes.size());
  for (size_t i = 0; i < all_nodes.size(); ++i) all_nodes[i] = static_cast<int>(i);

  HeuristicResult out;
  out.state = initial_state(res, w);
  int rr_cursor = 0;
  const std::vector<int> order = out.state.placement_order;
  for (int comp : order) {
    ActionMask mask = action_mask(out.state, res, adj, w, comp, all_nodes);
    int pick = choose_heuristic(kind, mask, all_nodes, res, out.state,
                                w.component(comp).demand(), rr_cursor);
    if (pick < 0) {
      out.feasible = false;
      out.failed_component = comp;
      return out;
    }
    auto next = apply(out.state, res, adj, w, comp, all_nodes[pick], all_nodes);
    assert(next.ok());
    out.state = std::move(*next);
  }
  out.feasible = true;
  return out;
}

/// Single-application convenience form.
inline HeuristicResult heuristic_place(const ApplicationGraph& app, const ResourceGraph& res,
                                       HeuristicKind kind, uint64_t seed = 0) {
  return heuristic_place(Workload::of({app}), res, kind, seed);
}

}  // namespace edgeplace
