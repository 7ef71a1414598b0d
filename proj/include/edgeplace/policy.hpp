#pragma once

#include <cassert>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "edgeplace/embedding.hpp"
#include "edgeplace/linalg.hpp"
#include "edgeplace/model.hpp"
#include "edgeplace/placement.hpp"
#include "edgeplace/rng.hpp"

namespace edgeplace {

inline constexpr int kHeadHidden = 32;

/// One zone as seen by its agent: ascending global node ids, the induced
/// subgraph re-indexed from 0 and its adjacency lists.
struct ZoneView {
  int zone_id = 0;
  std::vector<int> node_ids;
  ResourceGraph sub;
  std::vector<std::vector<int>> adj;

  static Outcome<ZoneView> of(const ResourceGraph& res, const Partition& part, int zone) {
    auto sg = induced_subgraph(res, part, zone);
    if (!sg) return sg.error();
    ZoneView zv;
    zv.zone_id = zone;
    zv.node_ids = std::move(sg->global_ids);
    zv.sub = std::move(sg->graph);
    zv.adj = node_adjacency(zv.sub);
    return zv;
  }
};

inline std::vector<std::vector<int>> app_adjacency(const ApplicationGraph& app) {
  std::vector<std::vector<int>> adj(app.components.size());
  for (const AppEdgeSpec& e : app.edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  for (auto& v : adj) std::sort(v.begin(), v.end());
  return adj;
}

/// Self-contained graph snapshot: features, adjacency and the encoder mask.
struct GraphView {
  Mat features;
  std::vector<std::vector<int>> adj;
  std::vector<uint8_t> mask;
};

/// What a local agent sees when placing one component: the application state,
/// the component's row, its zone's resource state and the feasibility mask
/// over zone nodes.
struct LocalObservation {
  GraphView app;
  int component_row = 0;
  GraphView zone;
  std::vector<uint8_t> action_mask;

  size_t bytes() const {
    return sizeof(*this) + (app.features.a.size() + zone.features.a.size()) * sizeof(double) +
           (action_mask.size() + app.mask.size() + zone.mask.size());
  }
};

/// What the global agent sees before delegating one application.
struct GlobalObservation {
  GraphView app;
  std::vector<GraphView> zones;
};

inline GraphView make_app_view(const ApplicationGraph& app,
                               const std::vector<std::vector<int>>& adj,
                               const PlacementState& s, int comp_offset,
                               const FeatureScale& sc) {
  GraphView v;
  v.features = featurize_application(app, s, comp_offset, sc);
  v.adj = adj;
  v.mask.assign(app.components.size(), 1);
  return v;
}

inline GraphView make_zone_view(const ZoneView& zone, const PlacementState& s,
                                const FeatureScale& sc) {
  GraphView v;
  v.features = featurize_resources(zone.sub, zone.node_ids, s, sc);
  v.adj = zone.adj;
  v.mask.resize(zone.node_ids.size());
  for (size_t i = 0; i < zone.node_ids.size(); ++i) v.mask[i] = s.avail[zone.node_ids[i]];
  return v;
}

/// Deterministic composition of the application view, the zone view and the
/// action mask for the component about to be placed.
inline LocalObservation local_observe(const Workload& w, int app_index, int comp_local,
                                      const std::vector<std::vector<int>>& app_adj,
                                      const ZoneView& zone, const PlacementState& s,
                                      const ResourceGraph& res, const ResourceAdjacency& radj,
                                      const FeatureScale& sc) {
  LocalObservation o;
  o.app = make_app_view(w.apps[app_index], app_adj, s, w.comp_offset[app_index], sc);
  o.component_row = comp_local;
  o.zone = make_zone_view(zone, s, sc);
  o.action_mask =
      action_mask(s, res, radj, w, w.comp_offset[app_index] + comp_local, zone.node_ids)
          .allowed;
  return o;
}

/// The global agent's composite observation: application view plus every
/// zone's view, in zone-id order.
inline GlobalObservation global_observe(const Workload& w, int app_index,
                                        const std::vector<std::vector<int>>& app_adj,
                                        std::span<const ZoneView> zones,
                                        const PlacementState& s, const FeatureScale& sc) {
  GlobalObservation o;
  o.app = make_app_view(w.apps[app_index], app_adj, s, w.comp_offset[app_index], sc);
  o.zones.reserve(zones.size());
  for (const ZoneView& z : zones) o.zones.push_back(make_zone_view(z, s, sc));
  return o;
}

// ---------------------------------------------------------------------------
// Masked categorical

/// Probabilities of a masked softmax: masked entries are exactly 0, log
/// probabilities are computed from logits so they stay finite for every
/// unmasked entry.
struct MaskedDist {
  Vec p;     // exact 0 at masked entries
  Vec logp;  // valid only at unmasked entries
  double entropy = 0.0;
  int n_allowed = 0;
};

inline MaskedDist masked_dist(std::span<const double> scores,
                              std::span<const uint8_t> mask) {
  MaskedDist d;
  const size_t n = scores.size();
  d.p.assign(n, 0.0);
  d.logp.assign(n, -std::numeric_limits<double>::infinity());
  double m = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < n; ++i)
    if (mask[i]) {
      ++d.n_allowed;
      m = std::max(m, scores[i]);
    }
  if (d.n_allowed == 0) return d;
  double z = 0.0;
  for (size_t i = 0; i < n; ++i)
    if (mask[i]) z += std::exp(scores[i] - m);
  const double log_z = m + std::log(z);
  for (size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    d.logp[i] = scores[i] - log_z;
    d.p[i] = std::exp(d.logp[i]);
    d.entropy -= d.p[i] * d.logp[i];
  }
  return d;
}

struct Choice {
  int index = -1;
  double logprob = 0.0;
};

/// Samples (or argmaxes) from the masked softmax. Masked entries can never be
/// chosen. A single allowed action is returned without consuming randomness.
/// Returns nullopt when everything is masked.
inline std::optional<Choice> sample_masked(std::span<const double> scores,
                                           std::span<const uint8_t> mask, Rng* rng,
                                           bool greedy) {
  MaskedDist d = masked_dist(scores, mask);
  if (d.n_allowed == 0) return std::nullopt;
  if (d.n_allowed == 1) {
    for (size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) return Choice{static_cast<int>(i), d.logp[i]};
  }
  if (greedy) {
    int best = -1;
    for (size_t i = 0; i < mask.size(); ++i)
      if (mask[i] && (best < 0 || scores[i] > scores[best])) best = static_cast<int>(i);
    return Choice{best, d.logp[best]};
  }
  assert(rng != nullptr);
  const double u = rng->uniform();
  double cum = 0.0;
  int last = -1;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    last = static_cast<int>(i);
    cum += d.p[i];
    if (u < cum) return Choice{last, d.logp[last]};
  }
  return Choice{last, d.logp[last]};  // numeric slack: fall back to the last allowed
}

// ---------------------------------------------------------------------------
// Policy parameters

struct MlpHead {
  Mat w1;  // hidden × in
  Vec b1;
  Mat w2;  // out × hidden
  Vec b2;

  /// Hidden layer uniform in [-1/sqrt(fan_in), ..]; output layer zero so the
  /// initial policy is uniform over unmasked actions.
  static MlpHead init(int in, int hidden, int out, Rng& rng) {
    MlpHead h;
    h.w1 = Mat(hidden, in);
    h.b1.assign(hidden, 0.0);
    h.w2 = Mat(out, hidden);
    h.b2.assign(out, 0.0);
    double s1 = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& x : h.w1.a) x = rng.uniform(-s1, s1);
    for (double& x : h.b1) x = rng.uniform(-s1, s1);
    return h;
  }
};

/// Zone agent: encodes the application and its zone, then scores each zone
/// node from [app pooled ‖ zone pooled ‖ component row ‖ node row].
struct LocalPolicy {
  int zone_id = 0;
  EncoderParams app_enc, res_enc;
  MlpHead head;

  static LocalPolicy init(int zone_id, uint64_t seed) {
    LocalPolicy p;
    p.zone_id = zone_id;
    Rng rng(seed);
    p.app_enc = EncoderParams::init(kAppFeatureDim, kEmbedDim, kEncoderLayers, rng);
    p.res_enc = EncoderParams::init(kResFeatureDim, kEmbedDim, kEncoderLayers, rng);
    p.head = MlpHead::init(4 * kEmbedDim, kHeadHidden, 1, rng);
    return p;
  }
};

/// Coordinator: encodes the application and every zone, then scores each zone
/// from [app pooled ‖ zone pooled blocks]. One resource encoder is shared
/// across zones.
struct GlobalPolicy {
  int n_zones = 1;
  EncoderParams app_enc, res_enc;
  MlpHead head;

  static GlobalPolicy init(int n_zones, uint64_t seed) {
    GlobalPolicy p;
    p.n_zones = n_zones;
    Rng rng(seed);
    p.app_enc = EncoderParams::init(kAppFeatureDim, kEmbedDim, kEncoderLayers, rng);
    p.res_enc = EncoderParams::init(kResFeatureDim, kEmbedDim, kEncoderLayers, rng);
    p.head = MlpHead::init((1 + n_zones) * kEmbedDim, kHeadHidden, n_zones, rng);
    return p;
  }
};

template <class F>
void visit_params(EncoderParams& p, F&& f) {
  for (EncoderLayer& l : p.layers) {
    f(l.w_self.a);
    f(l.w_nbr.a);
    f(l.b);
  }
}
template <class F>
void visit_params(const EncoderParams& p, F&& f) {
  for (const EncoderLayer& l : p.layers) {
    f(l.w_self.a);
    f(l.w_nbr.a);
    f(l.b);
  }
}
template <class F>
void visit_params(MlpHead& h, F&& f) {
  f(h.w1.a);
  f(h.b1);
  f(h.w2.a);
  f(h.b2);
}
template <class F>
void visit_params(const MlpHead& h, F&& f) {
  f(h.w1.a);
  f(h.b1);
  f(h.w2.a);
  f(h.b2);
}
template <class F>
void visit_params(LocalPolicy& p, F&& f) {
  visit_params(p.app_enc, f);
  visit_params(p.res_enc, f);
  visit_params(p.head, f);
}
template <class F>
void visit_params(const LocalPolicy& p, F&& f) {
  visit_params(p.app_enc, f);
  visit_params(p.res_enc, f);
  visit_params(p.head, f);
}
template <class F>
void visit_params(GlobalPolicy& p, F&& f) {
  visit_params(p.app_enc, f);
  visit_params(p.res_enc, f);
  visit_params(p.head, f);
}
template <class F>
void visit_params(const GlobalPolicy& p, F&& f) {
  visit_params(p.app_enc, f);
  visit_params(p.res_enc, f);
  visit_params(p.head, f);
}

template <class P>
size_t param_count(const P& p) {
  size_t n = 0;
  visit_params(p, [&](const Vec& v) { n += v.size(); });
  return n;
}

template <class P>
P zeros_like(const P& p) {
  P z = p;
  visit_params(z, [](Vec& v) { std::fill(v.begin(), v.end(), 0.0); });
  return z;
}

/// dst += s · src, tensor by tensor. A zero step is a no-op by construction.
template <class P>
void add_scaled(P& dst, const P& src, double s) {
  if (s == 0.0) return;
  std::vector<Vec*> d;
  visit_params(dst, [&](Vec& v) { d.push_back(&v); });
  size_t i = 0;
  visit_params(src, [&](const Vec& v) {
    Vec& t = *d[i++];
    for (size_t k = 0; k < v.size(); ++k) t[k] += s * v[k];
  });
}

template <class P>
void scale_params(P& p, double s) {
  visit_params(p, [&](Vec& v) {
    for (double& x : v) x *= s;
  });
}

template <class P>
double param_norm(const P& p) {
  double s = 0.0;
  visit_params(p, [&](const Vec& v) {
    for (double x : v) s += x * x;
  });
  return std::sqrt(s);
}

template <class P>
Vec flatten_params(const P& p) {
  Vec out;
  visit_params(p, [&](const Vec& v) { out.insert(out.end(), v.begin(), v.end()); });
  return out;
}

template <class P>
void set_flat_params(P& p, std::span<const double> flat) {
  size_t off = 0;
  visit_params(p, [&](Vec& v) {
    std::copy(flat.begin() + off, flat.begin() + off + v.size(), v.begin());
    off += v.size();
  });
  assert(off == flat.size());
}

// ---------------------------------------------------------------------------
// Forward / backward

struct LocalForward {
  EncodeTrace app_t, zone_t;
  Mat head_x;       // node × 4·kEmbedDim
  Mat head_hidden;  // node × kHeadHidden
  Vec scores;       // per zone node
};

inline LocalForward local_forward(const LocalPolicy& p, const LocalObservation& o) {
  LocalForward f;
  f.app_t = encode_traced(o.app.features, o.app.adj, p.app_enc, o.app.mask);
  f.zone_t = encode_traced(o.zone.features, o.zone.adj, p.res_enc, o.zone.mask);
  const int n = f.zone_t.h.back().rows;
  const int d = kEmbedDim;
  f.head_x = Mat(n, 4 * d);
  f.head_hidden = Mat(n, kHeadHidden);
  f.scores.assign(n, 0.0);
  const double* comp_row = f.app_t.h.back().row(o.component_row);
  Vec z1(kHeadHidden);
  for (int j = 0; j < n; ++j) {
    double* x = f.head_x.row(j);
    for (int c = 0; c < d; ++c) {
      x[c] = f.app_t.pooled[c];
      x[d + c] = f.zone_t.pooled[c];
      x[2 * d + c] = comp_row[c];
      x[3 * d + c] = f.zone_t.h.back().row(j)[c];
    }
    matvec_into(p.head.w1, x, z1.data());
    double* hid = f.head_hidden.row(j);
    for (int c = 0; c < kHeadHidden; ++c) hid[c] = std::tanh(z1[c] + p.head.b1[c]);
    double s = p.head.b2[0];
    const double* w2 = p.head.w2.row(0);
    for (int c = 0; c < kHeadHidden; ++c) s += w2[c] * hid[c];
    f.scores[j] = s;
  }
  return f;
}

inline void local_backward(const LocalPolicy& p, const LocalObservation& o,
                           const LocalForward& f, std::span<const double> dscores,
                           LocalPolicy& grads) {
  const int n = static_cast<int>(f.scores.size());
  const int d = kEmbedDim;
  Vec d_app_pooled(d, 0.0), d_zone_pooled(d, 0.0), d_comp(d, 0.0);
  Mat d_zone_nodes(n, d);
  Vec dz1(kHeadHidden), dx(4 * d);
  for (int j = 0; j < n; ++j) {
    const double dy = dscores[j];
    if (dy == 0.0) continue;
    const double* hid = f.head_hidden.row(j);
    double* gw2 = grads.head.w2.row(0);
    for (int c = 0; c < kHeadHidden; ++c) gw2[c] += dy * hid[c];
    grads.head.b2[0] += dy;
    const double* w2 = p.head.w2.row(0);
    for (int c = 0; c < kHeadHidden; ++c)
      dz1[c] = w2[c] * dy * (1.0 - hid[c] * hid[c]);
    outer_add(grads.head.w1, dz1.data(), f.head_x.row(j));
    for (int c = 0; c < kHeadHidden; ++c) grads.head.b1[c] += dz1[c];
    std::fill(dx.begin(), dx.end(), 0.0);
    matvec_transposed_add(p.head.w1, dz1.data(), dx.data());
    for (int c = 0; c < d; ++c) {
      d_app_pooled[c] += dx[c];
      d_zone_pooled[c] += dx[d + c];
      d_comp[c] += dx[2 * d + c];
      d_zone_nodes(j, c) += dx[3 * d + c];
    }
  }
  Mat d_app_nodes(f.app_t.h.back().rows, d);
  for (int c = 0; c < d; ++c) d_app_nodes(o.component_row, c) = d_comp[c];
  encode_backward(f.app_t, o.app.adj, p.app_enc, d_app_nodes, d_app_pooled, grads.app_enc);
  encode_backward(f.zone_t, o.zone.adj, p.res_enc, d_zone_nodes, d_zone_pooled,
                  grads.res_enc);
}

struct GlobalForward {
  EncodeTrace app_t;
  std::vector<EncodeTrace> zone_t;
  Vec x;       // (1 + n_zones)·kEmbedDim, the embedded global observation
  Vec hidden;  // kHeadHidden
  Vec scores;  // per zone
};

inline GlobalForward global_forward(const GlobalPolicy& p, const GlobalObservation& o) {
  assert(static_cast<int>(o.zones.size()) == p.n_zones);
  GlobalForward f;
  f.app_t = encode_traced(o.app.features, o.app.adj, p.app_enc, o.app.mask);
  f.zone_t.reserve(o.zones.size());
  for (const GraphView& z : o.zones)
    f.zone_t.push_back(encode_traced(z.features, z.adj, p.res_enc, z.mask));
  const int d = kEmbedDim;
  f.x.assign((1 + p.n_zones) * d, 0.0);
  std::copy(f.app_t.pooled.begin(), f.app_t.pooled.end(), f.x.begin());
  for (int z = 0; z < p.n_zones; ++z)
    std::copy(f.zone_t[z].pooled.begin(), f.zone_t[z].pooled.end(),
              f.x.begin() + (1 + z) * d);
  Vec z1(kHeadHidden);
  matvec_into(p.head.w1, f.x.data(), z1.data());
  f.hidden.assign(kHeadHidden, 0.0);
  for (int c = 0; c < kHeadHidden; ++c) f.hidden[c] = std::tanh(z1[c] + p.head.b1[c]);
  f.scores.assign(p.n_zones, 0.0);
  matvec_into(p.head.w2, f.hidden.data(), f.scores.data());
  for (int z = 0; z < p.n_zones; ++z) f.scores[z] += p.head.b2[z];
  return f;
}

inline void global_backward(const GlobalPolicy& p, const GlobalObservation& o,
                            const GlobalForward& f, std::span<const double> dscores,
                            GlobalPolicy& grads) {
  const int d = kEmbedDim;
  Vec dhid(kHeadHidden, 0.0);
  for (int z = 0; z < p.n_zones; ++z) {
    const double dy = dscores[z];
    if (dy == 0.0) continue;
    double* gw2 = grads.head.w2.row(z);
    const double* w2 = p.head.w2.row(z);
    for (int c = 0; c < kHeadHidden; ++c) {
      gw2[c] += dy * f.hidden[c];
      dhid[c] += w2[c] * dy;
    }
    grads.head.b2[z] += dy;
  }
  Vec dz1(kHeadHidden);
  for (int c = 0; c < kHeadHidden; ++c)
    dz1[c] = dhid[c] * (1.0 - f.hidden[c] * f.hidden[c]);
  outer_add(grads.head.w1, dz1.data(), f.x.data());
  for (int c = 0; c < kHeadHidden; ++c) grads.head.b1[c] += dz1[c];
  Vec dx(f.x.size(), 0.0);
  matvec_transposed_add(p.head.w1, dz1.data(), dx.data());

  Vec d_app_pooled(dx.begin(), dx.begin() + d);
  Mat d_app_nodes(f.app_t.h.back().rows, d);
  encode_backward(f.app_t, o.app.adj, p.app_enc, d_app_nodes, d_app_pooled, grads.app_enc);
  for (int z = 0; z < p.n_zones; ++z) {
    Vec d_zone_pooled(dx.begin() + (1 + z) * d, dx.begin() + (2 + z) * d);
    Mat d_zone_nodes(f.zone_t[z].h.back().rows, d);
    encode_backward(f.zone_t[z], o.zones[z].adj, p.res_enc, d_zone_nodes, d_zone_pooled,
                    grads.res_enc);
  }
}

/// Embedded global observation: [app pooled ‖ pooled zone blocks]. This is
/// the fixed-length vector the global head scores from.
inline Vec global_embed(const GlobalPolicy& p, const GlobalObservation& o) {
  return global_forward(p, o).x;
}

/// Masked stochastic action selection for a local agent. nullopt when no
/// zone node is feasible.
inline std::optional<Choice> act_local(const LocalPolicy& p, const LocalObservation& o,
                                       Rng* rng, bool greedy) {
  LocalForward f = local_forward(p, o);
  return sample_masked(f.scores, o.action_mask, rng, greedy);
}

/// Zone selection by the global agent; every zone is selectable.
inline std::optional<Choice> act_global(const GlobalPolicy& p, const GlobalObservation& o,
                                        Rng* rng, bool greedy) {
  GlobalForward f = global_forward(p, o);
  std::vector<uint8_t> mask(p.n_zones, 1);
  return sample_masked(f.scores, mask, rng, greedy);
}

}  // namespace edgeplace
