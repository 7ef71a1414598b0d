#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <span>
#include <vector>

#include "edgeplace/linalg.hpp"
#include "edgeplace/model.hpp"
#include "edgeplace/placement.hpp"
#include "edgeplace/rng.hpp"

namespace edgeplace {

inline constexpr int kAppFeatureDim = 7;   // cpu,gpu,ram,stor,work,ddl,placed
inline constexpr int kResFeatureDim = 11;  // caps(4),pt,speed,residual fracs(4),aval
inline constexpr int kEmbedDim = 16;
inline constexpr int kEncoderLayers = 2;

/// Per-scenario normalization constants: the maximum of each raw feature over
/// the scenario (1 where the maximum is not positive). Fixed at load so
/// features stay bounded without running statistics.
struct FeatureScale {
  std::array<double, 6> app{1, 1, 1, 1, 1, 1};  // cpu,gpu,ram,stor,work,ddl
  std::array<double, 6> res{1, 1, 1, 1, 1, 1};  // cpu,gpu,ram,stor,pt,speed
};

inline FeatureScale compute_feature_scale(const ResourceGraph& res,
                                          std::span<const ApplicationGraph> apps) {
  FeatureScale s;
  std::array<double, 6> am{0, 0, 0, 0, 0, 0}, rm{0, 0, 0, 0, 0, 0};
  for (const ApplicationGraph& a : apps)
    for (const ComponentSpec& c : a.components) {
      am[0] = std::max(am[0], c.cpu);
      am[1] = std::max(am[1], c.gpu);
      am[2] = std::max(am[2], c.ram);
      am[3] = std::max(am[3], c.stor);
      am[4] = std::max(am[4], c.work);
      am[5] = std::max(am[5], c.ddl);
    }
  for (const ResourceNodeSpec& v : res.nodes) {
    rm[0] = std::max(rm[0], v.cpu);
    rm[1] = std::max(rm[1], v.gpu);
    rm[2] = std::max(rm[2], v.ram);
    rm[3] = std::max(rm[3], v.stor);
    rm[4] = std::max(rm[4], v.pt);
    rm[5] = std::max(rm[5], v.speed);
  }
  for (int i = 0; i < 6; ++i) {
    if (am[i] > 0) s.app[i] = am[i];
    if (rm[i] > 0) s.res[i] = rm[i];
  }
  return s;
}

/// One row per component: normalized demands, work and deadline plus a placed
/// flag read from the state (components indexed from `comp_offset`).
inline Mat featurize_application(const ApplicationGraph& app, const PlacementState& s,
                                 int comp_offset, const FeatureScale& sc) {
  Mat f(static_cast<int>(app.components.size()), kAppFeatureDim);
  for (int i = 0; i < f.rows; ++i) {
    const ComponentSpec& c = app.components[i];
    double* r = f.row(i);
    r[0] = c.cpu / sc.app[0];
    r[1] = c.gpu / sc.app[1];
    r[2] = c.ram / sc.app[2];
    r[3] = c.stor / sc.app[3];
    r[4] = c.work / sc.app[4];
    r[5] = c.ddl / sc.app[5];
    r[6] = s.placed(comp_offset + i) ? 1.0 : 0.0;
  }
  return f;
}

/// One row per node of a (sub)graph: normalized capacities, pt and speed,
/// residual fractions (0 where capacity is 0) and the availability flag.
/// Unavailable nodes keep their rows; masking happens in the encoder.
inline Mat featurize_resources(const ResourceGraph& sub, std::span<const int> global_ids,
                               const PlacementState& s, const FeatureScale& sc) {
  assert(global_ids.size() == sub.nodes.size());
  Mat f(static_cast<int>(sub.nodes.size()), kResFeatureDim);
  for (int i = 0; i < f.rows; ++i) {
    const ResourceNodeSpec& v = sub.nodes[i];
    const int g = global_ids[i];
    double* r = f.row(i);
    r[0] = v.cpu / sc.res[0];
    r[1] = v.gpu / sc.res[1];
    r[2] = v.ram / sc.res[2];
    r[3] = v.stor / sc.res[3];
    r[4] = v.pt / sc.res[4];
    r[5] = v.speed / sc.res[5];
    const ResourceVec cap = v.capacity();
    for (int k = 0; k < kResourceDims; ++k)
      r[6 + k] = cap[k] > 0 ? s.residual[g][k] / cap[k] : 0.0;
    r[10] = s.avail[g] ? 1.0 : 0.0;
  }
  return f;
}

struct EncoderLayer {
  Mat w_self, w_nbr;
  Vec b;
};

struct EncoderParams {
  std::vector<EncoderLayer> layers;

  /// Uniform init in [-s, s] with s = 1/sqrt(fan_in), seeded.
  static EncoderParams init(int in_dim, int out_dim, int n_layers, Rng& rng) {
    EncoderParams p;
    int d = in_dim;
    for (int l = 0; l < n_layers; ++l) {
      EncoderLayer layer;
      double s = 1.0 / std::sqrt(static_cast<double>(d));
      layer.w_self = Mat(out_dim, d);
      layer.w_nbr = Mat(out_dim, d);
      layer.b.assign(out_dim, 0.0);
      for (double& x : layer.w_self.a) x = rng.uniform(-s, s);
      for (double& x : layer.w_nbr.a) x = rng.uniform(-s, s);
      for (double& x : layer.b) x = rng.uniform(-s, s);
      p.layers.push_back(std::move(layer));
      d = out_dim;
    }
    return p;
  }
};

/// Encoder output: one embedding row per node (masked rows are exactly zero)
/// and the masked mean pooled vector (zero when everything is masked).
struct Embedding {
  Mat per_node;
  Vec pooled;
};

/// Forward cache for backprop: post-activation node states per layer and the
/// neighbor means that fed each layer.
struct EncodeTrace {
  std::vector<Mat> h;         // size L+1; h[0] = input features (masked rows zeroed)
  std::vector<Mat> nbr_mean;  // size L
  Vec pooled;
  std::vector<uint8_t> mask;
  int n_unmasked = 0;
};

namespace detail {

inline void masked_mean_rows(const Mat& h, const std::vector<std::vector<int>>& adj,
                             std::span<const uint8_t> mask, Mat& out) {
  for (int i = 0; i < h.rows; ++i) {
    double* o = out.row(i);
    std::fill(o, o + h.cols, 0.0);
    if (!mask[i]) continue;
    int deg = 0;
    for (int j : adj[i]) {
      if (!mask[j]) continue;
      const double* hj = h.row(j);
      for (int c = 0; c < h.cols; ++c) o[c] += hj[c];
      ++deg;
    }
    if (deg > 0)
      for (int c = 0; c < h.cols; ++c) o[c] /= deg;
  }
}

}  // namespace detail

/// Two-layer mean-aggregation message passing:
///   h' = tanh(W_self·h + W_nbr·mean(h over unmasked neighbors) + b)
/// Masked nodes emit zero rows, are skipped in neighbor means and excluded
/// from pooling, so they have exactly zero influence on the output.
inline EncodeTrace encode_traced(const Mat& features,
                                 const std::vector<std::vector<int>>& adj,
                                 const EncoderParams& p, std::span<const uint8_t> mask) {
  assert(static_cast<size_t>(features.rows) == adj.size());
  assert(static_cast<size_t>(features.rows) == mask.size());
  EncodeTrace t;
  t.mask.assign(mask.begin(), mask.end());
  for (uint8_t m : mask) t.n_unmasked += m;

  Mat h0 = features;
  for (int i = 0; i < h0.rows; ++i)
    if (!mask[i]) std::fill(h0.row(i), h0.row(i) + h0.cols, 0.0);
  t.h.push_back(std::move(h0));

  for (const EncoderLayer& layer : p.layers) {
    const Mat& h = t.h.back();
    assert(layer.w_self.cols == h.cols);
    Mat means(h.rows, h.cols);
    detail::masked_mean_rows(h, adj, mask, means);
    Mat next(h.rows, layer.w_self.rows);
    Vec z(layer.w_self.rows);
    for (int i = 0; i < h.rows; ++i) {
      if (!mask[i]) continue;  // row stays zero
      matvec_into(layer.w_self, h.row(i), z.data());
      Vec zn(layer.w_nbr.rows);
      matvec_into(layer.w_nbr, means.row(i), zn.data());
      double* out = next.row(i);
      for (int c = 0; c < next.cols; ++c) out[c] = std::tanh(z[c] + zn[c] + layer.b[c]);
    }
    t.nbr_mean.push_back(std::move(means));
    t.h.push_back(std::move(next));
  }

  const Mat& last = t.h.back();
  t.pooled.assign(last.cols, 0.0);
  if (t.n_unmasked > 0) {
    for (int i = 0; i < last.rows; ++i) {
      if (!mask[i]) continue;
      const double* r = last.row(i);
      for (int c = 0; c < last.cols; ++c) t.pooled[c] += r[c];
    }
    for (double& x : t.pooled) x /= t.n_unmasked;
  }
  return t;
}

inline Embedding encode(const Mat& features, const std::vector<std::vector<int>>& adj,
                        const EncoderParams& p, std::span<const uint8_t> mask) {
  EncodeTrace t = encode_traced(features, adj, p, mask);
  return Embedding{std::move(t.h.back()), std::move(t.pooled)};
}

/// Backprop through encode_traced. d_per_node / d_pooled are gradients w.r.t.
/// the final node rows and the pooled vector (either may be empty). Parameter
/// gradients accumulate into `grads`, which must be shaped like `p`.
inline void encode_backward(const EncodeTrace& t, const std::vector<std::vector<int>>& adj,
                            const EncoderParams& p, const Mat& d_per_node,
                            const Vec& d_pooled, EncoderParams& grads) {
  const int n = t.h[0].rows;
  const int L = static_cast<int>(p.layers.size());
  Mat dh = d_per_node.rows ? d_per_node : Mat(n, t.h.back().cols);
  if (!d_pooled.empty() && t.n_unmasked > 0) {
    for (int i = 0; i < n; ++i) {
      if (!t.mask[i]) continue;
      double* r = dh.row(i);
      for (int c = 0; c < dh.cols; ++c) r[c] += d_pooled[c] / t.n_unmasked;
    }
  }

  for (int l = L - 1; l >= 0; --l) {
    const EncoderLayer& layer = p.layers[l];
    EncoderLayer& g = grads.layers[l];
    const Mat& h_prev = t.h[l];
    const Mat& h_next = t.h[l + 1];
    const Mat& means = t.nbr_mean[l];
    Mat dh_prev(n, h_prev.cols);
    Vec dz(h_next.cols), wnbr_dz(h_prev.cols);
    for (int i = 0; i < n; ++i) {
      if (!t.mask[i]) continue;
      const double* hi = h_next.row(i);
      const double* di = dh.row(i);
      for (int c = 0; c < h_next.cols; ++c) dz[c] = di[c] * (1.0 - hi[c] * hi[c]);
      outer_add(g.w_self, dz.data(), h_prev.row(i));
      outer_add(g.w_nbr, dz.data(), means.row(i));
      for (int c = 0; c < h_next.cols; ++c) g.b[c] += dz[c];
      matvec_transposed_add(layer.w_self, dz.data(), dh_prev.row(i));
      // Neighbor-mean path: each unmasked neighbor receives Wnbrᵀdz / deg.
      int deg = 0;
      for (int j : adj[i]) deg += t.mask[j] ? 1 : 0;
      if (deg > 0) {
        std::fill(wnbr_dz.begin(), wnbr_dz.end(), 0.0);
        matvec_transposed_add(layer.w_nbr, dz.data(), wnbr_dz.data());
        for (int j : adj[i]) {
          if (!t.mask[j]) continue;
          double* dj = dh_prev.row(j);
          for (int c = 0; c < h_prev.cols; ++c) dj[c] += wnbr_dz[c] / deg;
        }
      }
    }
    dh = std::move(dh_prev);
  }
}

/// Concatenates pooled zone vectors in zone-id order; with a fixed number of
/// zones the output length is fixed. A fully masked zone contributes a zero
/// block.
inline Vec aggregate_zones(std::span<const Embedding> zone_embeddings) {
  assert(!zone_embeddings.empty());
  const size_t d = zone_embeddings.front().pooled.size();
  Vec out;
  out.reserve(d * zone_embeddings.size());
  for (const Embedding& e : zone_embeddings) {
    assert(e.pooled.size() == d);
    out.insert(out.end(), e.pooled.begin(), e.pooled.end());
  }
  return out;
}

}  // namespace edgeplace
