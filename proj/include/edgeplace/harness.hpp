#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "edgeplace/oracle.hpp"
#include "edgeplace/report.hpp"
#include "edgeplace/training.hpp"

namespace edgeplace {

enum class SourceKind { heuristic, random, trained };

struct RunSpec {
  SourceKind source = SourceKind::heuristic;
  HeuristicKind kind = HeuristicKind::first_fit;
  bool greedy = false;
  int episodes = 1;
  uint64_t seed = 0;
  int workers = 1;
  std::string label;
};

struct PolicyBundle {
  std::vector<LocalPolicy> locals;
  std::optional<GlobalPolicy> global;
};

namespace detail_harness {

inline EpisodeRow row_from_result(const EpisodeResult& r, int episode,
                                  uint64_t mem_bytes) {
  EpisodeRow row;
  row.episode = episode;
  row.feasible = r.feasible;
  if (r.feasible) {
    row.objective = r.report.objective;
    row.ru = r.report.ru;
    row.ct_app = r.report.ct_app;
    row.svr = r.report.svr;
  }
  row.reward_global = r.global_reward_value;
  row.reward_local = r.local_rewards;
  row.mem_bytes = mem_bytes;
  return row;
}

}  // namespace detail_harness

/// Runs `episodes` independent episodes of one policy source, collecting the
/// evaluation metrics per episode. Episode e uses the derived seed
/// mix_seed(seed, e), so results are identical whether episodes run on one
/// worker or several.
inline Outcome<RunReport> run_experiment(const EpisodeContext& ctx, const RunSpec& spec,
                                         const PolicyBundle* policies = nullptr) {
  RunReport report;
  report.scenario_name = ctx.scenario->name;
  report.scenario_hash = ctx.scenario->source_hash;
  report.seed = spec.seed;
  report.n_zones = ctx.n_zones();
  report.weights_echo = ctx.weights();
  report.config_echo = ctx.scenario->training;
  report.scale_echo = ctx.scale;

  uint64_t mem_bytes = 0;
  if (spec.source == SourceKind::trained) {
    if (!policies || policies->locals.empty())
      return Error{"checkpoint", "trained source requires loaded policies"};
    if (static_cast<int>(policies->locals.size()) != ctx.n_zones())
      return Error{"checkpoint",
                   "checkpoint/scenario mismatch: checkpoint has " +
                       std::to_string(policies->locals.size()) + " local policies, "
                       "scenario partitions into " + std::to_string(ctx.n_zones())};
    if (ctx.n_zones() > 1 && !policies->global)
      return Error{"checkpoint", "scenario has multiple zones but no global policy"};
    for (const LocalPolicy& p : policies->locals)
      mem_bytes += param_count(p) * sizeof(double);
    if (policies->global) mem_bytes += param_count(*policies->global) * sizeof(double);
    report.policy_label = spec.label.empty()
                              ? (spec.greedy ? "trained_greedy" : "trained_sample")
                              : spec.label;
  } else if (spec.source == SourceKind::random) {
    report.policy_label = spec.label.empty() ? "random" : spec.label;
  } else {
    report.policy_label = spec.label.empty() ? to_string(spec.kind) : spec.label;
  }

  report.episodes.resize(spec.episodes);
  auto run_one = [&](int e) {
    const uint64_t ep_seed = mix_seed(spec.seed, static_cast<uint64_t>(e));
    const auto t0 = std::chrono::steady_clock::now();
    EpisodeResult r;
    switch (spec.source) {
      case SourceKind::heuristic:
        r = run_scripted_episode(ctx, false, spec.kind, ep_seed);
        break;
      case SourceKind::random:
        r = run_scripted_episode(ctx, true, spec.kind, ep_seed);
        break;
      case SourceKind::trained:
        if (policies->global)
          r = run_global_episode(ctx, *policies->global, policies->locals, spec.greedy,
                                 ep_seed);
        else
          r = run_zone_pipeline_episode(ctx, 0, policies->locals[0], spec.greedy, ep_seed);
        break;
    }
    EpisodeRow row = detail_harness::row_from_result(r, e, mem_bytes);
    row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.episodes[e] = std::move(row);
  };

  const int workers = std::max(1, spec.workers);
  if (workers == 1 || spec.episodes <= 1) {
    for (int e = 0; e < spec.episodes; ++e) run_one(e);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&, t]() {
        for (int e = t; e < spec.episodes; e += workers) run_one(e);
      });
    for (std::thread& th : pool) th.join();
  }
  return report;
}

/// Exhaustive-optimum report in the same shape as run_experiment output, so
/// `compare` can measure optimality gaps against it.
inline Outcome<RunReport> oracle_report(const EpisodeContext& ctx, uint64_t seed,
                                        PlacementState* out_state = nullptr) {
  auto opt = oracle_optimal(ctx.workload, ctx.res(), ctx.weights());
  if (!opt) return opt.error();
  if (out_state) *out_state = opt->state;

  RunReport report;
  report.scenario_name = ctx.scenario->name;
  report.scenario_hash = ctx.scenario->source_hash;
  report.seed = seed;
  report.n_zones = ctx.n_zones();
  report.weights_echo = ctx.weights();
  report.config_echo = ctx.scenario->training;
  report.scale_echo = ctx.scale;
  report.policy_label = "oracle";

  EpisodeResult r;
  r.state = std::move(opt->state);
  detail::finish_episode(ctx, r);
  report.episodes.push_back(detail_harness::row_from_result(r, 0, 0));
  return report;
}

/// Seeded initial policies for a scenario: one local policy per zone plus the
/// global coordinator, all derived from the training seed.
inline PolicyBundle init_policies(const EpisodeContext& ctx, const TrainConfig& cfg) {
  PolicyBundle b;
  for (int z = 0; z < ctx.n_zones(); ++z)
    b.locals.push_back(
        LocalPolicy::init(z, mix_seed(cfg.seed, 0xA10CA1ULL + static_cast<uint64_t>(z))));
  b.global = GlobalPolicy::init(ctx.n_zones(), mix_seed(cfg.seed, 0x910BA1ULL));
  return b;
}

struct TrainOutputs {
  PolicyBundle policies;
  std::vector<ReplayBuffer> replays;
  std::vector<PretrainResult> phase1;  // per zone
  JointResult phase2;
};

/// Both phases end to end: pretrain every zone's local agent, then joint
/// training of the global agent alongside the locals with experience replay.
inline Outcome<TrainOutputs> train_full(const EpisodeContext& ctx, const TrainConfig& cfg) {
  TrainOutputs out;
  out.policies = init_policies(ctx, cfg);
  out.replays.assign(ctx.n_zones(), ReplayBuffer(cfg.replay_capacity));
  for (int z = 0; z < ctx.n_zones(); ++z) {
    auto r = pretrain_local(ctx, z, out.policies.locals[z], out.replays[z], cfg);
    if (!r) return r.error();
    out.phase1.push_back(std::move(*r));
  }
  auto j = joint_train(ctx, *out.policies.global, out.policies.locals, out.replays, cfg);
  if (!j) return j.error();
  out.phase2 = std::move(*j);
  return out;
}

}  // namespace edgeplace
