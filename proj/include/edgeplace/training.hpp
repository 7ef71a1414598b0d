#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "edgeplace/config.hpp"
#include "edgeplace/heuristics.hpp"
#include "edgeplace/metrics.hpp"
#include "edgeplace/model.hpp"
#include "edgeplace/oracle.hpp"
#include "edgeplace/placement.hpp"
#include "edgeplace/policy.hpp"
#include "edgeplace/scenario.hpp"
#include "edgeplace/state_metrics.hpp"

namespace edgeplace {

/// Everything derived once per scenario: workload indexing, the partition,
/// zone views, adjacencies, feature normalization and a whole-graph view for
/// centralized baselines.
struct EpisodeContext {
  const Scenario* scenario = nullptr;
  Workload workload;
  Partition partition;
  std::vector<ZoneView> zones;
  ZoneView full_view;  // all nodes, for centralized policies
  std::vector<std::vector<std::vector<int>>> app_adj;
  ResourceAdjacency res_adj;
  FeatureScale scale;

  const ResourceGraph& res() const { return scenario->resources; }
  const MetricWeights& weights() const { return scenario->weights; }
  int n_zones() const { return partition.n_local; }
  int n_apps() const { return static_cast<int>(workload.apps.size()); }
};

inline Outcome<EpisodeContext> make_context(const Scenario& sc) {
  EpisodeContext ctx;
  ctx.scenario = &sc;
  ctx.workload = Workload::of(sc.applications);
  auto part = partition_resources(sc.resources, sc.partition.n_local, sc.partition.seed);
  if (!part) return part.error();
  ctx.partition = std::move(*part);
  for (int z = 0; z < ctx.partition.n_local; ++z) {
    auto zv = ZoneView::of(sc.resources, ctx.partition, z);
    if (!zv) return zv.error();
    ctx.zones.push_back(std::move(*zv));
  }
  ctx.full_view.zone_id = -1;
  ctx.full_view.sub = sc.resources;
  ctx.full_view.node_ids.resize(sc.resources.nodes.size());
  for (size_t i = 0; i < sc.resources.nodes.size(); ++i)
    ctx.full_view.node_ids[i] = static_cast<int>(i);
  ctx.full_view.adj = node_adjacency(sc.resources);
  for (const ApplicationGraph& a : sc.applications) ctx.app_adj.push_back(app_adjacency(a));
  ctx.res_adj = ResourceAdjacency::of(sc.resources);
  ctx.scale = compute_feature_scale(sc.resources, sc.applications);
  return ctx;
}

/// Two independent streams per episode: one feeding action sampling, one
/// feeding availability dynamics, so neither perturbs the other.
struct EpisodeStreams {
  Rng action;
  Rng dynamics;

  static EpisodeStreams of(uint64_t ep_seed) {
    return EpisodeStreams{Rng(mix_seed(ep_seed, 1)), Rng(mix_seed(ep_seed, 2))};
  }
};

struct TrajectoryStep {
  LocalObservation obs;
  int action = -1;  // index into the zone's node list; -1 marks the dead-end step
  double logprob = 0.0;
  double ru = 0.0;  // utilization snapshot right after this decision
};

/// One application placed by one agent: the observations and masks actually
/// used, the actions taken, and the terminal reward (intermediate rewards are
/// zero; discount within an episode is 1).
struct Trajectory {
  int zone = 0;
  int app_index = 0;
  std::vector<TrajectoryStep> steps;
  double ret = 0.0;
  bool failed = false;

  size_t bytes() const {
    size_t b = sizeof(*this);
    for (const TrajectoryStep& s : steps) b += sizeof(s) + s.obs.bytes();
    return b;
  }
};

/// Bounded FIFO of pretraining trajectories with seeded uniform sampling.
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  explicit ReplayBuffer(int capacity) : capacity_(capacity) { assert(capacity > 0); }

  void push(Trajectory t) {
    if (static_cast<int>(buf_.size()) == capacity_) buf_.pop_front();
    buf_.push_back(std::move(t));
  }
  size_t size() const { return buf_.size(); }
  bool empty() const { return buf_.empty(); }
  int capacity() const { return capacity_; }
  const Trajectory& at(size_t i) const { return buf_[i]; }

  size_t bytes() const {
    size_t b = sizeof(*this);
    for (const Trajectory& t : buf_) b += t.bytes();
    return b;
  }

 private:
  int capacity_ = 256;
  std::deque<Trajectory> buf_;
};

// ---------------------------------------------------------------------------
// Episode execution

namespace detail {

struct StepChooser {
  enum class Kind { policy, heuristic, random } kind = Kind::policy;
  const LocalPolicy* policy = nullptr;
  bool greedy = false;
  HeuristicKind heuristic = HeuristicKind::first_fit;
  int rr_cursor = 0;
};

/// Places one application into one zone on a shared state, applying dynamics
/// before every decision. Returns the trajectory (observations only for
/// policy-driven runs); `ret` is left for the caller.
inline Trajectory run_app_in_zone(const EpisodeContext& ctx, int app_index,
                                  const ZoneView& zone, StepChooser& chooser,
                                  PlacementState& state, EpisodeStreams& streams) {
  const Workload& w = ctx.workload;
  const ResourceGraph& res = ctx.res();
  Trajectory traj;
  traj.zone = zone.zone_id;
  traj.app_index = app_index;

  for (int comp_local : placement_order(w.apps[app_index])) {
    apply_dynamics(state, *ctx.scenario, state.step, streams.dynamics);
    const int comp = w.comp_offset[app_index] + comp_local;

    TrajectoryStep step;
    int pick = -1;
    if (chooser.kind == StepChooser::Kind::policy) {
      step.obs = local_observe(w, app_index, comp_local, ctx.app_adj[app_index], zone,
                               state, res, ctx.res_adj, ctx.scale);
      auto choice = act_local(*chooser.policy, step.obs, &streams.action, chooser.greedy);
      if (choice) {
        pick = choice->index;
        step.logprob = choice->logprob;
      }
    } else {
      ActionMask mask = action_mask(state, res, ctx.res_adj, w, comp, zone.node_ids);
      if (chooser.kind == StepChooser::Kind::random) {
        Vec flat(mask.allowed.size(), 0.0);
        auto choice = sample_masked(flat, mask.allowed, &streams.action, false);
        if (choice) pick = choice->index;
      } else {
        pick = choose_heuristic(chooser.heuristic, mask, zone.node_ids, res, state,
                                w.component(comp).demand(), chooser.rr_cursor);
      }
    }

    if (pick < 0) {
      step.action = -1;
      traj.steps.push_back(std::move(step));
      traj.failed = true;
      return traj;
    }
    step.action = pick;
    auto next = apply(state, res, ctx.res_adj, w, comp, zone.node_ids[pick], zone.node_ids);
    assert(next.ok());
    state = std::move(*next);
    step.ru = resource_utilization(res, state);
    traj.steps.push_back(std::move(step));
  }
  return traj;
}

}  // namespace detail

/// Local reward of a zone's current state.
inline double zone_reward_now(const EpisodeContext& ctx, const PlacementState& s,
                              const ZoneView& zone) {
  return local_reward(zone_cost_report(ctx.res(), ctx.workload, s, zone.node_ids,
                                       ctx.weights()),
                      ctx.weights());
}

struct LocalEpisode {
  Trajectory traj;
  PlacementState state;
};

/// One application placed into one zone from a fresh state by its local
/// policy. The terminal reward is the zone reward, or the infeasible penalty
/// when a dead end is reached.
inline LocalEpisode run_local_episode(const EpisodeContext& ctx, int zone, int app_index,
                                      const LocalPolicy& policy, bool greedy,
                                      uint64_t ep_seed) {
  EpisodeStreams streams = EpisodeStreams::of(ep_seed);
  PlacementState state = initial_state(ctx.res(), ctx.workload);
  detail::StepChooser chooser;
  chooser.kind = detail::StepChooser::Kind::policy;
  chooser.policy = &policy;
  chooser.greedy = greedy;
  Trajectory traj =
      detail::run_app_in_zone(ctx, app_index, ctx.zones[zone], chooser, state, streams);
  traj.ret = traj.failed ? ctx.scenario->training.infeasible_penalty
                         : zone_reward_now(ctx, state, ctx.zones[zone]);
  return LocalEpisode{std::move(traj), std::move(state)};
}

/// Uniform-random counterpart of run_local_episode, for baselines.
inline LocalEpisode run_zone_random_episode(const EpisodeContext& ctx, int zone,
                                            int app_index, uint64_t ep_seed) {
  EpisodeStreams streams = EpisodeStreams::of(ep_seed);
  PlacementState state = initial_state(ctx.res(), ctx.workload);
  detail::StepChooser chooser;
  chooser.kind = detail::StepChooser::Kind::random;
  Trajectory traj =
      detail::run_app_in_zone(ctx, app_index, ctx.zones[zone], chooser, state, streams);
  traj.ret = traj.failed ? ctx.scenario->training.infeasible_penalty
                         : zone_reward_now(ctx, state, ctx.zones[zone]);
  return LocalEpisode{std::move(traj), std::move(state)};
}

struct GlobalStep {
  GlobalObservation obs;
  int zone = 0;
  double logprob = 0.0;
};

struct GlobalTrajectory {
  std::vector<GlobalStep> steps;
  double ret = 0.0;
  bool failed = false;
};

/// Outcome of one full-arrival-sequence episode, whichever pipeline ran it.
struct EpisodeResult {
  PlacementState state;
  bool feasible = false;
  std::vector<Trajectory> segments;   // one per application attempted
  GlobalTrajectory global_traj;       // steps only for the hierarchical pipeline
  std::vector<double> local_rewards;  // per zone, on the final state
  double global_reward_value = 0.0;   // combined reward (penalty when infeasible)
  CostReport report;                  // valid when feasible
};

namespace detail {

/// Shared epilogue: zone rewards on the final state and the combined reward.
inline void finish_episode(const EpisodeContext& ctx, EpisodeResult& r) {
  r.feasible = r.state.complete();
  r.local_rewards.clear();
  for (const ZoneView& z : ctx.zones)
    r.local_rewards.push_back(zone_reward_now(ctx, r.state, z));
  if (r.feasible) {
    r.report = full_cost_report(ctx.res(), ctx.workload, r.state, ctx.weights());
    auto g = global_reward(non_local_reward(r.report, ctx.weights()), r.local_rewards,
                           ctx.weights());
    assert(g.ok());
    r.global_reward_value = *g;
  } else {
    r.global_reward_value = ctx.scenario->training.infeasible_penalty;
  }
}

}  // namespace detail

/// Centralized baseline episode: the whole arrival sequence placed over the
/// full node set by a heuristic or by uniform-random choice.
inline EpisodeResult run_scripted_episode(const EpisodeContext& ctx, bool random,
                                          HeuristicKind kind, uint64_t ep_seed) {
  EpisodeStreams streams = EpisodeStreams::of(ep_seed);
  EpisodeResult r;
  r.state = initial_state(ctx.res(), ctx.workload);
  detail::StepChooser chooser;
  chooser.kind =
      random ? detail::StepChooser::Kind::random : detail::StepChooser::Kind::heuristic;
  chooser.heuristic = kind;
  for (int a = 0; a < ctx.n_apps(); ++a) {
    Trajectory seg =
        detail::run_app_in_zone(ctx, a, ctx.full_view, chooser, r.state, streams);
    seg.ret = seg.failed ? ctx.scenario->training.infeasible_penalty
                         : zone_reward_now(ctx, r.state, ctx.full_view);
    const bool failed = seg.failed;
    r.segments.push_back(std::move(seg));
    if (failed) break;
  }
  detail::finish_episode(ctx, r);
  return r;
}

/// Single-zone pipeline: every application is placed into `zone` by its local
/// policy. With one zone covering the whole graph this is the centralized
/// agent pipeline.
inline EpisodeResult run_zone_pipeline_episode(const EpisodeContext& ctx, int zone,
                                               const LocalPolicy& policy, bool greedy,
                                               uint64_t ep_seed) {
  EpisodeStreams streams = EpisodeStreams::of(ep_seed);
  EpisodeResult r;
  r.state = initial_state(ctx.res(), ctx.workload);
  detail::StepChooser chooser;
  chooser.kind = detail::StepChooser::Kind::policy;
  chooser.policy = &policy;
  chooser.greedy = greedy;
  for (int a = 0; a < ctx.n_apps(); ++a) {
    Trajectory seg =
        detail::run_app_in_zone(ctx, a, ctx.zones[zone], chooser, r.state, streams);
    seg.ret = seg.failed ? ctx.scenario->training.infeasible_penalty
                         : zone_reward_now(ctx, r.state, ctx.zones[zone]);
    const bool failed = seg.failed;
    r.segments.push_back(std::move(seg));
    if (failed) break;
  }
  detail::finish_episode(ctx, r);
  return r;
}

/// Hierarchical pipeline: per application, the global agent observes all
/// zones and delegates to one local agent, which places the application
/// inside its zone on the shared state. A placement dead end ends the episode
/// and the penalty flows into both reward streams.
inline EpisodeResult run_global_episode(const EpisodeContext& ctx,
                                        const GlobalPolicy& gpolicy,
                                        std::span<const LocalPolicy> locals, bool greedy,
                                        uint64_t ep_seed) {
  assert(static_cast<int>(locals.size()) == ctx.n_zones());
  EpisodeStreams streams = EpisodeStreams::of(ep_seed);
  EpisodeResult r;
  r.state = initial_state(ctx.res(), ctx.workload);
  for (int a = 0; a < ctx.n_apps(); ++a) {
    GlobalStep gstep;
    gstep.obs = global_observe(ctx.workload, a, ctx.app_adj[a], ctx.zones, r.state,
                               ctx.scale);
    auto choice = act_global(gpolicy, gstep.obs, &streams.action, greedy);
    assert(choice.has_value());  // every zone is selectable
    gstep.zone = choice->index;
    gstep.logprob = choice->logprob;
    const int z = gstep.zone;
    r.global_traj.steps.push_back(std::move(gstep));

    detail::StepChooser chooser;
    chooser.kind = detail::StepChooser::Kind::policy;
    chooser.policy = &locals[z];
    chooser.greedy = greedy;
    Trajectory seg = detail::run_app_in_zone(ctx, a, ctx.zones[z], chooser, r.state, streams);
    seg.ret = seg.failed ? ctx.scenario->training.infeasible_penalty
                         : zone_reward_now(ctx, r.state, ctx.zones[z]);
    const bool failed = seg.failed;
    r.segments.push_back(std::move(seg));
    if (failed) break;
  }
  detail::finish_episode(ctx, r);
  r.global_traj.ret = r.global_reward_value;
  r.global_traj.failed = !r.feasible;
  return r;
}

// ---------------------------------------------------------------------------
// Policy-gradient surrogate loss

struct LocalSample {
  const LocalObservation* obs = nullptr;
  int action = 0;
  double advantage = 0.0;
  double weight = 1.0;  // 1 for fresh data, clipped importance ratio for replay
};

struct GlobalSample {
  const GlobalObservation* obs = nullptr;
  int action = 0;
  double advantage = 0.0;
  double weight = 1.0;
};

/// Summed REINFORCE surrogate with entropy bonus:
///   L = Σ_i [ −w_i·A_i·log π(a_i|s_i) − entropy_weight·H(π(·|s_i)) ]
/// The gradient is linear in the batch (duplicating a sample doubles it).
/// Pass grads=nullptr for loss-only evaluation (finite differences).
inline double local_surrogate(const LocalPolicy& p, std::span<const LocalSample> batch,
                              double entropy_weight, LocalPolicy* grads) {
  double loss = 0.0;
  Vec dscores;
  for (const LocalSample& s : batch) {
    LocalForward f = local_forward(p, *s.obs);
    MaskedDist d = masked_dist(f.scores, s.obs->action_mask);
    assert(s.action >= 0 && s.obs->action_mask[s.action]);
    loss += -s.weight * s.advantage * d.logp[s.action] - entropy_weight * d.entropy;
    if (!grads) continue;
    dscores.assign(f.scores.size(), 0.0);
    for (size_t k = 0; k < f.scores.size(); ++k) {
      if (!s.obs->action_mask[k]) continue;
      const double indicator = (static_cast<int>(k) == s.action) ? 1.0 : 0.0;
      dscores[k] = -s.weight * s.advantage * (indicator - d.p[k]) +
                   entropy_weight * d.p[k] * (d.logp[k] + d.entropy);
    }
    local_backward(p, *s.obs, f, dscores, *grads);
  }
  return loss;
}

inline double global_surrogate(const GlobalPolicy& p, std::span<const GlobalSample> batch,
                               double entropy_weight, GlobalPolicy* grads) {
  double loss = 0.0;
  Vec dscores;
  std::vector<uint8_t> mask(p.n_zones, 1);
  for (const GlobalSample& s : batch) {
    GlobalForward f = global_forward(p, *s.obs);
    MaskedDist d = masked_dist(f.scores, mask);
    loss += -s.weight * s.advantage * d.logp[s.action] - entropy_weight * d.entropy;
    if (!grads) continue;
    dscores.assign(f.scores.size(), 0.0);
    for (size_t k = 0; k < f.scores.size(); ++k) {
      const double indicator = (static_cast<int>(k) == s.action) ? 1.0 : 0.0;
      dscores[k] = -s.weight * s.advantage * (indicator - d.p[k]) +
                   entropy_weight * d.p[k] * (d.logp[k] + d.entropy);
    }
    global_backward(p, *s.obs, f, dscores, *grads);
  }
  return loss;
}

/// Gradient step with global-norm clipping. False when the gradient is not
/// finite (divergence guard).
template <class P>
bool sgd_step(P& params, const P& grads, double lr, double clip_norm) {
  const double n = param_norm(grads);
  if (!std::isfinite(n)) return false;
  const double scale = (clip_norm > 0 && n > clip_norm) ? clip_norm / n : 1.0;
  add_scaled(params, grads, -lr * scale);
  return true;
}

// ---------------------------------------------------------------------------
// Phase 1: pretraining

struct PretrainResult {
  std::vector<double> reward_curve;  // terminal reward per episode
};

/// Episodic REINFORCE with a moving-average return baseline (decay 0.9).
/// Episode e places application e mod |apps| into the zone from an empty
/// state. Every trajectory is appended to the zone's replay buffer.
inline Outcome<PretrainResult> pretrain_local(const EpisodeContext& ctx, int zone,
                                              LocalPolicy& policy, ReplayBuffer& replay,
                                              const TrainConfig& cfg) {
  PretrainResult out;
  const uint64_t root = mix_seed(cfg.seed, 0xF1000ULL + static_cast<uint64_t>(zone));
  double baseline = 0.0;
  bool baseline_ready = false;
  std::vector<Trajectory> batch;
  std::vector<double> advantages;

  auto flush = [&]() -> bool {
    if (batch.empty()) return true;
    std::vector<LocalSample> samples;
    for (size_t i = 0; i < batch.size(); ++i)
      for (const TrajectoryStep& st : batch[i].steps)
        if (st.action >= 0)
          samples.push_back({&st.obs, st.action, advantages[i], 1.0});
    LocalPolicy grads = zeros_like(policy);
    const double loss = local_surrogate(policy, samples, cfg.entropy_weight, &grads);
    if (!std::isfinite(loss)) return false;
    scale_params(grads, 1.0 / static_cast<double>(batch.size()));
    if (!sgd_step(policy, grads, cfg.learning_rate, cfg.grad_clip_norm)) return false;
    batch.clear();
    advantages.clear();
    return true;
  };

  for (int e = 0; e < cfg.episodes_phase1; ++e) {
    LocalEpisode ep = run_local_episode(ctx, zone, e % ctx.n_apps(), policy, false,
                                        mix_seed(root, static_cast<uint64_t>(e)));
    const double g = ep.traj.ret;
    out.reward_curve.push_back(g);
    if (!baseline_ready) {
      baseline = g;
      baseline_ready = true;
    }
    advantages.push_back(g - baseline);
    baseline = 0.9 * baseline + 0.1 * g;
    replay.push(ep.traj);
    batch.push_back(std::move(ep.traj));
    if (static_cast<int>(batch.size()) == cfg.batch_size && !flush())
      return Error{"divergence", "non-finite loss during pretraining of zone " +
                                     std::to_string(zone)};
  }
  if (!flush())
    return Error{"divergence",
                 "non-finite loss during pretraining of zone " + std::to_string(zone)};
  return out;
}

// ---------------------------------------------------------------------------
// Phase 2: joint training

struct JointResult {
  std::vector<double> global_reward_curve;  // per joint episode
  std::vector<double> objective_curve;      // per joint episode, NaN when infeasible
};

/// Runs joint episodes in batches; per batch the global policy is updated on
/// combined-reward returns, then each local policy on its fresh segments mixed with
/// replayed pretraining trajectories (fraction `replay_mix`, importance
/// ratios clipped to [0.1, 10]). With replay_mix = 1 locals train on replay
/// only.
inline Outcome<JointResult> joint_train(const EpisodeContext& ctx, GlobalPolicy& gpolicy,
                                        std::vector<LocalPolicy>& locals,
                                        std::vector<ReplayBuffer>& replays,
                                        const TrainConfig& cfg) {
  JointResult out;
  const int n_zones = ctx.n_zones();
  const uint64_t root = mix_seed(cfg.seed, 0xF2000ULL);
  double gbase = 0.0;
  bool gbase_ready = false;
  std::vector<double> lbase(n_zones, 0.0);
  std::vector<char> lbase_ready(n_zones, 0);

  int episode = 0, round = 0;
  while (episode < cfg.episodes_phase2) {
    const int b = std::min(cfg.batch_size, cfg.episodes_phase2 - episode);
    std::vector<EpisodeResult> results;
    results.reserve(b);
    for (int i = 0; i < b; ++i)
      results.push_back(run_global_episode(ctx, gpolicy, locals, false,
                                           mix_seed(root, static_cast<uint64_t>(episode + i))));

    // Global update first, then locals, on alternating batches.
    std::vector<GlobalSample> gsamples;
    std::vector<double> gadv(b);
    for (int i = 0; i < b; ++i) {
      const double g = results[i].global_reward_value;
      out.global_reward_curve.push_back(g);
      out.objective_curve.push_back(results[i].feasible
                                        ? results[i].report.objective
                                        : std::numeric_limits<double>::quiet_NaN());
      if (!gbase_ready) {
        gbase = g;
        gbase_ready = true;
      }
      gadv[i] = g - gbase;
      gbase = 0.9 * gbase + 0.1 * g;
      for (const GlobalStep& st : results[i].global_traj.steps)
        gsamples.push_back({&st.obs, st.zone, gadv[i], 1.0});
    }
    {
      GlobalPolicy grads = zeros_like(gpolicy);
      const double loss = global_surrogate(gpolicy, gsamples, cfg.entropy_weight, &grads);
      if (!std::isfinite(loss)) return Error{"divergence", "non-finite loss in the global update"};
      scale_params(grads, 1.0 / static_cast<double>(b));
      if (!sgd_step(gpolicy, grads, cfg.learning_rate, cfg.grad_clip_norm))
        return Error{"divergence", "non-finite loss in the global update"};
    }

    for (int z = 0; z < n_zones; ++z) {
      std::vector<LocalSample> samples;
      int n_traj = 0;
      if (cfg.replay_mix < 1.0) {
        for (const EpisodeResult& r : results)
          for (const Trajectory& seg : r.segments) {
            if (seg.zone != z) continue;
            const double g = seg.ret;
            if (!lbase_ready[z]) {
              lbase[z] = g;
              lbase_ready[z] = 1;
            }
            const double adv = g - lbase[z];
            lbase[z] = 0.9 * lbase[z] + 0.1 * g;
            ++n_traj;
            for (const TrajectoryStep& st : seg.steps)
              if (st.action >= 0) samples.push_back({&st.obs, st.action, adv, 1.0});
          }
      }
      const int n_replay =
          static_cast<int>(cfg.replay_mix * static_cast<double>(cfg.batch_size) + 0.5);
      std::vector<const Trajectory*> drawn;
      if (n_replay > 0 && !replays[z].empty()) {
        Rng rrng(mix_seed(root, 0xE9000ULL + static_cast<uint64_t>(round) * 1024ULL +
                                    static_cast<uint64_t>(z)));
        for (int k = 0; k < n_replay; ++k)
          drawn.push_back(&replays[z].at(
              static_cast<size_t>(rrng.uniform_int(static_cast<int>(replays[z].size())))));
      }
      n_traj += static_cast<int>(drawn.size());
      for (const Trajectory* t : drawn) {
        const double adv = t->ret - lbase[z];
        for (const TrajectoryStep& st : t->steps) {
          if (st.action < 0) continue;
          // Off-policy correction: current-vs-stored likelihood, clipped.
          LocalForward f = local_forward(locals[z], st.obs);
          MaskedDist d = masked_dist(f.scores, st.obs.action_mask);
          double ratio = std::exp(d.logp[st.action] - st.logprob);
          ratio = std::clamp(ratio, 0.1, 10.0);
          samples.push_back({&st.obs, st.action, adv, ratio});
        }
      }
      if (samples.empty()) continue;
      LocalPolicy grads = zeros_like(locals[z]);
      const double loss = local_surrogate(locals[z], samples, cfg.entropy_weight, &grads);
      if (!std::isfinite(loss))
        return Error{"divergence",
                     "non-finite loss in the local update of zone " + std::to_string(z)};
      scale_params(grads, 1.0 / static_cast<double>(std::max(1, n_traj)));
      if (!sgd_step(locals[z], grads, cfg.learning_rate, cfg.grad_clip_norm))
        return Error{"divergence",
                     "non-finite loss in the local update of zone " + std::to_string(z)};
    }

    episode += b;
    ++round;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient verification

/// Max relative error between the analytic gradient of the surrogate loss and
/// central finite differences (h = 1e-5) over every parameter.
inline double gradient_check_local(const LocalPolicy& policy,
                                   std::span<const LocalSample> batch,
                                   double entropy_weight) {
  LocalPolicy p = policy;
  LocalPolicy grads = zeros_like(p);
  local_surrogate(p, batch, entropy_weight, &grads);
  const Vec ga = flatten_params(grads);
  Vec theta = flatten_params(p);
  const double h = 1e-5;
  double worst = 0.0;
  for (size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + h;
    set_flat_params(p, theta);
    const double lp = local_surrogate(p, batch, entropy_weight, nullptr);
    theta[i] = orig - h;
    set_flat_params(p, theta);
    const double lm = local_surrogate(p, batch, entropy_weight, nullptr);
    theta[i] = orig;
    const double gfd = (lp - lm) / (2.0 * h);
    const double rel =
        std::abs(ga[i] - gfd) / std::max({std::abs(ga[i]), std::abs(gfd), 1e-6});
    worst = std::max(worst, rel);
  }
  set_flat_params(p, theta);
  return worst;
}

inline double gradient_check_global(const GlobalPolicy& policy,
                                    std::span<const GlobalSample> batch,
                                    double entropy_weight) {
  GlobalPolicy p = policy;
  GlobalPolicy grads = zeros_like(p);
  global_surrogate(p, batch, entropy_weight, &grads);
  const Vec ga = flatten_params(grads);
  Vec theta = flatten_params(p);
  const double h = 1e-5;
  double worst = 0.0;
  for (size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + h;
    set_flat_params(p, theta);
    const double lp = global_surrogate(p, batch, entropy_weight, nullptr);
    theta[i] = orig - h;
    set_flat_params(p, theta);
    const double lm = global_surrogate(p, batch, entropy_weight, nullptr);
    theta[i] = orig;
    const double gfd = (lp - lm) / (2.0 * h);
    const double rel =
        std::abs(ga[i] - gfd) / std::max({std::abs(ga[i]), std::abs(gfd), 1e-6});
    worst = std::max(worst, rel);
  }
  set_flat_params(p, theta);
  return worst;
}

/// Bytes of parameters plus replay contents; the training-memory figure
/// reported by the harness (deterministic, unlike RSS).
inline size_t training_memory_bytes(std::span<const LocalPolicy> locals,
                                    const GlobalPolicy* gpolicy,
                                    std::span<const ReplayBuffer> replays) {
  size_t b = 0;
  for (const LocalPolicy& p : locals) b += param_count(p) * sizeof(double);
  if (gpolicy) b += param_count(*gpolicy) * sizeof(double);
  for (const ReplayBuffer& r : replays) b += r.bytes();
  return b;
}

}  // namespace edgeplace
