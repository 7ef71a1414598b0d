// Command-line front end: scenario validation, partitioning, baselines,
// training, evaluation, the exhaustive oracle and report comparison.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edgeplace/checkpoint.hpp"
#include "edgeplace/harness.hpp"
#include "edgeplace/jsonout.hpp"
#include "edgeplace/report.hpp"
#include "edgeplace/scenario.hpp"
#include "edgeplace/training.hpp"
#include "edgeplace/version.hpp"

namespace {

using namespace edgeplace;

int fail(const Error& e) {
  std::cerr << "{\"error\": {\"code\": " << json_str(e.code)
            << ", \"message\": " << json_str(e.message) << "}}\n";
  return 1;
}

struct Loaded {
  Scenario scenario;
  EpisodeContext ctx;
};

// The context keeps a pointer to its scenario, so both live in one stable
// heap object for the rest of the process.
Loaded* load(const std::string& path, std::optional<uint64_t> seed, int& exit_code) {
  auto sc = load_scenario(path, seed);
  if (!sc) {
    exit_code = fail(sc.error());
    return nullptr;
  }
  static std::vector<std::unique_ptr<Loaded>> keep_alive;
  keep_alive.push_back(std::make_unique<Loaded>());
  Loaded& L = *keep_alive.back();
  L.scenario = std::move(*sc);
  auto ctx = make_context(L.scenario);
  if (!ctx) {
    exit_code = fail(ctx.error());
    return nullptr;
  }
  L.ctx = std::move(*ctx);
  return &L;
}

void print_report_summary(const RunReport& r) {
  std::vector<double> obj, svr;
  int feasible = 0;
  for (const EpisodeRow& e : r.episodes) {
    obj.push_back(e.objective);
    svr.push_back(e.svr);
    if (e.feasible) ++feasible;
  }
  const MeanSd mo = mean_sd(obj), ms = mean_sd(svr);
  std::cout << r.policy_label << ": " << r.episodes.size() << " episodes, " << feasible
            << " feasible, objective " << mo.mean << " ±" << mo.sd << ", svr " << ms.mean
            << "\n";
}

bool write_text(const std::string& path, const std::string& text, int& exit_code) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    exit_code = fail({"io", "cannot write '" + path + "'"});
    return false;
  }
  out << text;
  return true;
}

bool write_curve(const std::string& path, const std::vector<double>& values,
                 int& exit_code) {
  std::ostringstream os;
  os << "episode,value\n";
  for (size_t i = 0; i < values.size(); ++i) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
    os << i << "," << buf << "\n";
  }
  return write_text(path, os.str(), exit_code);
}

bool ensure_dir(const std::string& dir, int& exit_code) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    exit_code = fail({"io", "cannot create directory '" + dir + "'"});
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical placement of multi-component applications on a "
               "cloud-edge resource graph"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string scenario_path, out_dir, format = "csv", stream_format = "both",
      checkpoint_path;
  std::optional<uint64_t> seed_flag;
  int episodes = 10, zone_flag = -1, workers = 1;
  bool greedy = false;
  std::string kind_str = "first_fit";
  std::vector<std::string> report_paths;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_flag, "override the scenario master seed");
  };

  CLI::App* validate = app.add_subcommand("validate", "validate a scenario file");
  validate->add_option("scenario", scenario_path)->required();
  add_seed(validate);

  CLI::App* partition = app.add_subcommand("partition", "partition the resource graph");
  partition->add_option("scenario", scenario_path)->required();
  partition->add_option("--out", out_dir);
  partition->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));
  add_seed(partition);

  CLI::App* baseline = app.add_subcommand("baseline", "run a heuristic or random policy");
  baseline->add_option("scenario", scenario_path)->required();
  baseline->add_option("--kind", kind_str,
                       "first_fit|best_fit|worst_fit|round_robin|random");
  baseline->add_option("--episodes", episodes);
  baseline->add_option("--out", out_dir);
  baseline->add_option("--format", stream_format)
      ->check(CLI::IsMember({"csv", "json", "both"}));
  baseline->add_option("--workers", workers);
  add_seed(baseline);

  CLI::App* pretrain = app.add_subcommand("pretrain", "phase 1: pretrain local agents");
  pretrain->add_option("scenario", scenario_path)->required();
  pretrain->add_option("--zone", zone_flag, "train a single zone (default: all)");
  pretrain->add_option("--out", out_dir);
  add_seed(pretrain);

  CLI::App* train = app.add_subcommand("train", "phase 1 + phase 2 training");
  train->add_option("scenario", scenario_path)->required();
  train->add_option("--out", out_dir);
  add_seed(train);

  CLI::App* eval = app.add_subcommand("eval", "run a trained checkpoint");
  eval->add_option("scenario", scenario_path)->required();
  eval->add_option("--checkpoint", checkpoint_path)->required();
  eval->add_flag("--greedy", greedy);
  eval->add_option("--episodes", episodes);
  eval->add_option("--out", out_dir);
  eval->add_option("--format", stream_format)
      ->check(CLI::IsMember({"csv", "json", "both"}));
  eval->add_option("--workers", workers);
  add_seed(eval);

  CLI::App* oracle = app.add_subcommand("oracle", "exhaustive optimum on tiny scenarios");
  oracle->add_option("scenario", scenario_path)->required();
  oracle->add_option("--out", out_dir);
  add_seed(oracle);

  CLI::App* compare = app.add_subcommand("compare", "align reports over one scenario");
  compare->add_option("reports", report_paths, "report.json files")->required();
  compare->add_option("--out", out_dir);
  compare->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

  CLI11_PARSE(app, argc, argv);
  int exit_code = 0;

  if (validate->parsed()) {
    auto L = load(scenario_path, seed_flag, exit_code);
    if (!L) return exit_code;
    const Scenario& sc = L->scenario;
    int comps = 0;
    for (const ApplicationGraph& a : sc.applications)
      comps += static_cast<int>(a.components.size());
    std::cout << "ok: " << sc.name << ": " << sc.resources.nodes.size() << " nodes, "
              << sc.resources.links.size() << " links, " << sc.applications.size()
              << " applications (" << comps << " components), " << L->ctx.n_zones()
              << " zones\n";
    return 0;
  }

  if (partition->parsed()) {
    auto L = load(scenario_path, seed_flag, exit_code);
    if (!L) return exit_code;
    const Partition& p = L->ctx.partition;
    std::ostringstream os;
    if (format == "json") {
      os << "{\"n_local\": " << p.n_local << ", \"assignment\": [";
      for (size_t i = 0; i < p.assignment.size(); ++i)
        os << (i ? "," : "") << p.assignment[i];
      os << "]}\n";
    } else {
      os << "node,zone\n";
      for (size_t i = 0; i < p.assignment.size(); ++i)
        os << i << "," << p.assignment[i] << "\n";
    }
    std::cout << os.str();
    if (!out_dir.empty()) {
      if (!ensure_dir(out_dir, exit_code)) return exit_code;
      if (!write_text(out_dir + "/partition." + format, os.str(), exit_code))
        return exit_code;
    }
    return 0;
  }

  if (baseline->parsed()) {
    auto L = load(scenario_path, seed_flag, exit_code);
    if (!L) return exit_code;
    RunSpec spec;
    if (kind_str == "random") {
      spec.source = SourceKind::random;
    } else {
      auto k = heuristic_from_string(kind_str);
      if (!k) return fail(k.error());
      spec.source = SourceKind::heuristic;
      spec.kind = *k;
    }
    spec.episodes = episodes;
    spec.seed = L->scenario.master_seed;
    spec.workers = workers;
    auto rep = run_experiment(L->ctx, spec);
    if (!rep) return fail(rep.error());
    print_report_summary(*rep);
    if (!out_dir.empty()) {
      auto w = write_report_files(out_dir, *rep, stream_format);
      if (!w) return fail(w.error());
    }
    return 0;
  }

  if (pretrain->parsed()) {
    auto L = load(scenario_path, seed_flag, exit_code);
    if (!L) return exit_code;
    TrainConfig cfg = L->scenario.training;
    if (seed_flag) cfg.seed = *seed_flag;
    PolicyBundle bundle = init_policies(L->ctx, cfg);
    std::vector<ReplayBuffer> replays(L->ctx.n_zones(), ReplayBuffer(cfg.replay_capacity));
    if (!out_dir.empty() && !ensure_dir(out_dir, exit_code)) return exit_code;
    for (int z = 0; z < L->ctx.n_zones(); ++z) {
      if (zone_flag >= 0 && z != zone_flag) continue;
      auto r = pretrain_local(L->ctx, z, bundle.locals[z], replays[z], cfg);
      if (!r) return fail(r.error());
      const auto& curve = r->reward_curve;
      double first = curve.empty() ? 0 : curve.front(), last = curve.empty() ? 0 : curve.back();
      std::cout << "zone " << z << ": " << curve.size() << " episodes, reward "
                << first << " -> " << last << "\n";
      if (!out_dir.empty() &&
          !write_curve(out_dir + "/pretrain_reward_zone" + std::to_string(z) + ".csv",
                       curve, exit_code))
        return exit_code;
    }
    if (!out_dir.empty()) {
      auto w = save_checkpoint(out_dir + "/checkpoint.json", bundle.locals, nullptr, cfg,
                               L->scenario.name, L->scenario.source_hash);
      if (!w) return fail(w.error());
      std::cout << "checkpoint: " << out_dir << "/checkpoint.json\n";
    }
    return 0;
  }

  if (train->parsed()) {
    auto L = load(scenario_path, seed_flag, exit_code);
    if (!L) return exit_code;
    TrainConfig cfg = L->scenario.training;
    if (seed_flag) cfg.seed = *seed_flag;
    auto t = train_full(L->ctx, cfg);
    if (!t) return fail(t.error());
    if (!out_dir.empty()) {
      if (!ensure_dir(out_dir, exit_code)) return exit_code;
      for (int z = 0; z < L->ctx.n_zones(); ++z)
        if (!write_curve(out_dir + "/pretrain_reward_zone" + std::to_string(z) + ".csv",
                         t->phase1[z].reward_curve, exit_code))
          return exit_code;
      if (!write_curve(out_dir + "/joint_global_reward.csv",
                       t->phase2.global_reward_curve, exit_code))
        return exit_code;
      if (!write_curve(out_dir + "/joint_objective.csv", t->phase2.objective_curve,
                       exit_code))
        return exit_code;
      auto w = save_checkpoint(out_dir + "/checkpoint.json", t->policies.locals,
                               &*t->policies.global, cfg, L->scenario.name,
                               L->scenario.source_hash);
      if (!w) return fail(w.error());
    }
    // One greedy evaluation episode as a quick summary.
    EpisodeResult final_ep = run_global_episode(
        L->ctx, *t->policies.global, t->policies.locals, true,
        mix_seed(L->scenario.master_seed, 0xE7A1ULL));
    std::cout << "training done: memory "
              << training_memory_bytes(t->policies.locals, &*t->policies.global,
                                       t->replays)
              << " bytes";
    if (final_ep.feasible)
      std::cout << ", greedy objective " << final_ep.report.objective;
    else
      std::cout << ", greedy episode infeasible";
    std::cout << "\n";
    if (!out_dir.empty()) std::cout << "checkpoint: " << out_dir << "/checkpoint.json\n";
    return 0;
  }

  if (eval->parsed()) {
    auto L = load(scenario_path, seed_flag, exit_code);
    if (!L) return exit_code;
    auto ck = load_checkpoint(checkpoint_path);
    if (!ck) return fail(ck.error());
    PolicyBundle bundle;
    bundle.locals = std::move(ck->locals);
    bundle.global = std::move(ck->global);
    RunSpec spec;
    spec.source = SourceKind::trained;
    spec.greedy = greedy;
    spec.episodes = episodes;
    spec.seed = L->scenario.master_seed;
    spec.workers = workers;
    auto rep = run_experiment(L->ctx, spec, &bundle);
    if (!rep) return fail(rep.error());
    print_report_summary(*rep);
    if (!out_dir.empty()) {
      auto w = write_report_files(out_dir, *rep, stream_format);
      if (!w) return fail(w.error());
    }
    return 0;
  }

  if (oracle->parsed()) {
    auto L = load(scenario_path, seed_flag, exit_code);
    if (!L) return exit_code;
    PlacementState best;
    auto rep = oracle_report(L->ctx, L->scenario.master_seed, &best);
    if (!rep) return fail(rep.error());
    std::cout << "oracle objective " << fmt17(rep->episodes[0].objective) << "\nassignment:";
    for (size_t c = 0; c < best.host.size(); ++c) std::cout << " " << best.host[c];
    std::cout << "\n";
    if (!out_dir.empty()) {
      auto w = write_report_files(out_dir, *rep);
      if (!w) return fail(w.error());
    }
    return 0;
  }

  if (compare->parsed()) {
    std::vector<RunReport> reports;
    for (const std::string& p : report_paths) {
      auto r = read_report_json(p);
      if (!r) return fail(r.error());
      reports.push_back(std::move(*r));
    }
    auto table = compare_reports(reports);
    if (!table) return fail(table.error());
    std::cout << render_table(*table);
    if (!out_dir.empty()) {
      if (!ensure_dir(out_dir, exit_code)) return exit_code;
      const std::string text =
          format == "json" ? comparison_to_json(*table) : comparison_to_csv(*table);
      if (!write_text(out_dir + "/comparison." + format, text, exit_code))
        return exit_code;
    }
    return 0;
  }

  return 0;
}
