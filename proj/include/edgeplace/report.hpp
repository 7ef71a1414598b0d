#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeplace/config.hpp"
#include "edgeplace/embedding.hpp"
#include "edgeplace/jsonout.hpp"
#include "edgeplace/metrics.hpp"
#include "edgeplace/outcome.hpp"
#include "edgeplace/version.hpp"

namespace edgeplace {

struct EpisodeRow {
  int episode = 0;
  bool feasible = false;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double ru = std::numeric_limits<double>::quiet_NaN();
  double ct_app = std::numeric_limits<double>::quiet_NaN();
  double svr = std::numeric_limits<double>::quiet_NaN();
  double reward_global = 0.0;
  std::vector<double> reward_local;
  uint64_t mem_bytes = 0;  // own accounting of parameter + buffer bytes
  double wall_s = 0.0;     // diagnostics; written to timing.log only
};

/// One run's results: config echo, seed, code version and per-episode metric
/// rows. Everything serialized from here is deterministic for a fixed
/// (scenario, seed); wall-clock timings are kept out of the JSON/CSV outputs.
struct RunReport {
  std::string version{kVersion};
  std::string scenario_name;
  std::string scenario_hash;
  std::string policy_label;
  uint64_t seed = 0;
  int n_zones = 1;
  MetricWeights weights_echo;
  TrainConfig config_echo;
  FeatureScale scale_echo;
  std::vector<EpisodeRow> episodes;
};

namespace detail_report {

inline std::string weights_json(const MetricWeights& w) {
  std::ostringstream os;
  os << "{\"alpha\": " << fmt17(w.alpha) << ", \"beta\": " << fmt17(w.beta)
     << ", \"gamma\": " << fmt17(w.gamma) << ", \"local_alpha\": " << fmt17(w.local_alpha)
     << ", \"local_beta\": " << fmt17(w.local_beta)
     << ", \"local_gamma\": " << fmt17(w.local_gamma) << ", \"delta1\": " << fmt17(w.delta1)
     << ", \"delta2\": " << fmt17(w.delta2) << ", \"lambda\": " << fmt17(w.lambda_g)
     << ", \"mu\": [";
  for (size_t i = 0; i < w.mu.size(); ++i) os << (i ? "," : "") << fmt17(w.mu[i]);
  os << "]}";
  return os.str();
}

inline std::string config_json_echo(const TrainConfig& c) {
  std::ostringstream os;
  os << "{\"learning_rate\": " << fmt17(c.learning_rate)
     << ", \"discount\": " << fmt17(c.discount)
     << ", \"episodes_phase1\": " << c.episodes_phase1
     << ", \"episodes_phase2\": " << c.episodes_phase2
     << ", \"batch_size\": " << c.batch_size
     << ", \"entropy_weight\": " << fmt17(c.entropy_weight)
     << ", \"replay_mix\": " << fmt17(c.replay_mix)
     << ", \"grad_clip_norm\": " << fmt17(c.grad_clip_norm)
     << ", \"replay_capacity\": " << c.replay_capacity
     << ", \"infeasible_penalty\": " << fmt17(c.infeasible_penalty)
     << ", \"seed\": " << c.seed << "}";
  return os.str();
}

inline std::string scale_json(const FeatureScale& s) {
  std::ostringstream os;
  os << "{\"app\": [";
  for (int i = 0; i < 6; ++i) os << (i ? "," : "") << fmt17(s.app[i]);
  os << "], \"res\": [";
  for (int i = 0; i < 6; ++i) os << (i ? "," : "") << fmt17(s.res[i]);
  os << "]}";
  return os.str();
}

}  // namespace detail_report

inline std::string report_to_json(const RunReport& r) {
  std::ostringstream os;
  os << "{\n\"version\": " << json_str(r.version)
     << ",\n\"scenario_name\": " << json_str(r.scenario_name)
     << ",\n\"scenario_hash\": " << json_str(r.scenario_hash)
     << ",\n\"policy\": " << json_str(r.policy_label) << ",\n\"seed\": " << r.seed
     << ",\n\"n_zones\": " << r.n_zones
     << ",\n\"weights\": " << detail_report::weights_json(r.weights_echo)
     << ",\n\"config\": " << detail_report::config_json_echo(r.config_echo)
     << ",\n\"feature_scale\": " << detail_report::scale_json(r.scale_echo)
     << ",\n\"episodes\": [";
  for (size_t i = 0; i < r.episodes.size(); ++i) {
    const EpisodeRow& e = r.episodes[i];
    if (i) os << ",";
    os << "\n{\"episode\": " << e.episode
       << ", \"feasible\": " << (e.feasible ? "true" : "false")
       << ", \"objective\": " << fmt17(e.objective) << ", \"ru\": " << fmt17(e.ru)
       << ", \"ct_app\": " << fmt17(e.ct_app) << ", \"svr\": " << fmt17(e.svr)
       << ", \"reward_global\": " << fmt17(e.reward_global) << ", \"reward_local\": [";
    for (size_t z = 0; z < e.reward_local.size(); ++z)
      os << (z ? "," : "") << fmt17(e.reward_local[z]);
    os << "], \"mem_bytes\": " << e.mem_bytes << "}";
  }
  os << "\n]\n}\n";
  return os.str();
}

/// Writes report.json plus one CSV per metric stream. All floats use 17
/// significant digits; infeasible episodes serialize as nan / null. `format`
/// restricts the output set to "csv" or "json" ("both" writes everything).
inline Outcome<bool> write_report_files(const std::string& dir, const RunReport& r,
                                        const std::string& format = "both") {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) return Error{"io", "cannot create output directory '" + dir + "'"};

  if (format != "csv") {
    std::ofstream out(dir + "/report.json", std::ios::binary);
    if (!out) return Error{"io", "cannot write " + dir + "/report.json"};
    out << report_to_json(r);
  }
  auto write_csv = [&](const std::string& name, auto get) -> bool {
    std::ofstream out(dir + "/" + name, std::ios::binary);
    if (!out) return false;
    out << "episode,value\n";
    for (const EpisodeRow& e : r.episodes) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%.17g", get(e));
      out << e.episode << "," << buf << "\n";
    }
    return true;
  };
  if (format != "json") {
    bool ok = write_csv("objective.csv", [](const EpisodeRow& e) { return e.objective; }) &&
              write_csv("ru.csv", [](const EpisodeRow& e) { return e.ru; }) &&
              write_csv("ct_app.csv", [](const EpisodeRow& e) { return e.ct_app; }) &&
              write_csv("svr.csv", [](const EpisodeRow& e) { return e.svr; }) &&
              write_csv("reward_global.csv",
                        [](const EpisodeRow& e) { return e.reward_global; }) &&
              write_csv("feasible.csv",
                        [](const EpisodeRow& e) { return e.feasible ? 1.0 : 0.0; });
    for (int z = 0; z < r.n_zones; ++z)
      ok = ok && write_csv("reward_local_" + std::to_string(z) + ".csv",
                           [z](const EpisodeRow& e) {
                             return z < static_cast<int>(e.reward_local.size())
                                        ? e.reward_local[z]
                                        : std::numeric_limits<double>::quiet_NaN();
                           });
    if (!ok) return Error{"io", "failed writing CSV streams under '" + dir + "'"};
  }

  // Wall-clock diagnostics live outside the deterministic outputs.
  std::ofstream tl(dir + "/timing.log", std::ios::binary);
  for (const EpisodeRow& e : r.episodes)
    tl << "episode " << e.episode << " wall_s " << e.wall_s << "\n";
  return true;
}

inline Outcome<RunReport> read_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Error{"io", "cannot open report '" + path + "'"};
  std::ostringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    return Error{"parse", std::string("report parse error: ") + e.what()};
  }
  RunReport r;
  try {
    r.version = j.value("version", "");
    r.scenario_name = j.value("scenario_name", "");
    r.scenario_hash = j.value("scenario_hash", "");
    r.policy_label = j.value("policy", "");
    r.seed = j.value("seed", uint64_t{0});
    r.n_zones = j.value("n_zones", 1);
    for (const auto& ej : j.at("episodes")) {
      EpisodeRow e;
      e.episode = ej.value("episode", 0);
      e.feasible = ej.value("feasible", false);
      auto num = [&](const char* k) {
        return ej.contains(k) && ej[k].is_number()
                   ? ej[k].get<double>()
                   : std::numeric_limits<double>::quiet_NaN();
      };
      e.objective = num("objective");
      e.ru = num("ru");
      e.ct_app = num("ct_app");
      e.svr = num("svr");
      e.reward_global = num("reward_global");
      if (ej.contains("reward_local"))
        for (const auto& x : ej["reward_local"])
          e.reward_local.push_back(x.is_number()
                                       ? x.get<double>()
                                       : std::numeric_limits<double>::quiet_NaN());
      e.mem_bytes = ej.value("mem_bytes", uint64_t{0});
      r.episodes.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    return Error{"parse", std::string("report structure error: ") + e.what()};
  }
  return r;
}

// ---------------------------------------------------------------------------
// Comparison

struct MeanSd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
  int n = 0;
};

inline MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd m;
  for (double x : xs)
    if (std::isfinite(x)) ++m.n;
  if (m.n == 0) return m;
  double s = 0.0;
  for (double x : xs)
    if (std::isfinite(x)) s += x;
  m.mean = s / m.n;
  if (m.n > 1) {
    double q = 0.0;
    for (double x : xs)
      if (std::isfinite(x)) q += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(q / (m.n - 1));
  } else {
    m.sd = 0.0;
  }
  return m;
}

struct PolicySummary {
  std::string policy;
  int episodes = 0;
  int feasible = 0;
  MeanSd objective, ru, ct_app, svr;
  double gap = std::numeric_limits<double>::quiet_NaN();  // oracle − mean objective
};

struct ComparisonTable {
  std::string scenario_name;
  std::string scenario_hash;
  uint64_t seed = 0;
  bool has_oracle = false;
  double oracle_objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<PolicySummary> rows;
};

/// Aligns >= 2 reports over the same scenario and seed into mean±sd rows per
/// policy, with optimality gaps when an oracle report is among them.
inline Outcome<ComparisonTable> compare_reports(const std::vector<RunReport>& reports) {
  if (reports.size() < 2)
    return Error{"compare", "need at least two reports to compare"};
  ComparisonTable t;
  t.scenario_name = reports.front().scenario_name;
  t.scenario_hash = reports.front().scenario_hash;
  t.seed = reports.front().seed;
  for (const RunReport& r : reports) {
    if (r.scenario_hash != t.scenario_hash)
      return Error{"compare", "mismatched scenarios: '" + r.scenario_name +
                                  "' was produced from different scenario bytes"};
    if (r.seed != t.seed)
      return Error{"compare", "mismatched seeds: " + std::to_string(r.seed) + " vs " +
                                  std::to_string(t.seed)};
  }
  for (const RunReport& r : reports) {
    if (r.policy_label != "oracle") continue;
    for (const EpisodeRow& e : r.episodes)
      if (e.feasible) {
        t.has_oracle = true;
        t.oracle_objective = e.objective;
      }
  }
  for (const RunReport& r : reports) {
    PolicySummary s;
    s.policy = r.policy_label;
    s.episodes = static_cast<int>(r.episodes.size());
    std::vector<double> obj, ru, ct, svr;
    for (const EpisodeRow& e : r.episodes) {
      if (e.feasible) ++s.feasible;
      obj.push_back(e.objective);
      ru.push_back(e.ru);
      ct.push_back(e.ct_app);
      svr.push_back(e.svr);
    }
    s.objective = mean_sd(obj);
    s.ru = mean_sd(ru);
    s.ct_app = mean_sd(ct);
    s.svr = mean_sd(svr);
    if (t.has_oracle && s.objective.n > 0) s.gap = t.oracle_objective - s.objective.mean;
    t.rows.push_back(std::move(s));
  }
  return t;
}

inline std::string render_table(const ComparisonTable& t) {
  std::ostringstream os;
  os << "scenario " << t.scenario_name << " (hash " << t.scenario_hash << ", seed "
     << t.seed << ")\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-14s %5s %5s %22s %22s %22s %22s %12s\n", "policy",
                "eps", "feas", "objective", "ru", "ct_app", "svr", "gap");
  os << line;
  auto cell = [](const MeanSd& m) {
    char buf[64];
    if (m.n == 0) {
      std::snprintf(buf, sizeof(buf), "%22s", "-");
    } else {
      std::snprintf(buf, sizeof(buf), "%12.6g ±%8.3g", m.mean, m.sd);
    }
    return std::string(buf);
  };
  for (const PolicySummary& s : t.rows) {
    char gapbuf[32];
    if (std::isfinite(s.gap))
      std::snprintf(gapbuf, sizeof(gapbuf), "%12.6g", s.gap);
    else
      std::snprintf(gapbuf, sizeof(gapbuf), "%12s", "-");
    std::snprintf(line, sizeof(line), "%-14s %5d %5d %22s %22s %22s %22s %12s\n",
                  s.policy.c_str(), s.episodes, s.feasible, cell(s.objective).c_str(),
                  cell(s.ru).c_str(), cell(s.ct_app).c_str(), cell(s.svr).c_str(), gapbuf);
    os << line;
  }
  return os.str();
}

inline std::string comparison_to_csv(const ComparisonTable& t) {
  std::ostringstream os;
  os << "policy,episodes,feasible,objective_mean,objective_sd,ru_mean,ru_sd,ct_app_mean,"
        "ct_app_sd,svr_mean,svr_sd,gap\n";
  auto f = [](double x) { return fmt17(x) == "null" ? std::string("nan") : fmt17(x); };
  for (const PolicySummary& s : t.rows) {
    os << s.policy << "," << s.episodes << "," << s.feasible << "," << f(s.objective.mean)
       << "," << f(s.objective.sd) << "," << f(s.ru.mean) << "," << f(s.ru.sd) << ","
       << f(s.ct_app.mean) << "," << f(s.ct_app.sd) << "," << f(s.svr.mean) << ","
       << f(s.svr.sd) << "," << f(s.gap) << "\n";
  }
  return os.str();
}

inline std::string comparison_to_json(const ComparisonTable& t) {
  std::ostringstream os;
  os << "{\n\"scenario_name\": " << json_str(t.scenario_name)
     << ",\n\"scenario_hash\": " << json_str(t.scenario_hash) << ",\n\"seed\": " << t.seed
     << ",\n\"oracle_objective\": "
     << (t.has_oracle ? fmt17(t.oracle_objective) : "null") << ",\n\"policies\": [";
  for (size_t i = 0; i < t.rows.size(); ++i) {
    const PolicySummary& s = t.rows[i];
    if (i) os << ",";
    os << "\n{\"policy\": " << json_str(s.policy) << ", \"episodes\": " << s.episodes
       << ", \"feasible\": " << s.feasible
       << ", \"objective_mean\": " << fmt17(s.objective.mean)
       << ", \"objective_sd\": " << fmt17(s.objective.sd)
       << ", \"ru_mean\": " << fmt17(s.ru.mean) << ", \"ct_app_mean\": "
       << fmt17(s.ct_app.mean) << ", \"svr_mean\": " << fmt17(s.svr.mean)
       << ", \"gap\": " << fmt17(s.gap) << "}";
  }
  os << "\n]\n}\n";
  return os.str();
}

}  // namespace edgeplace
