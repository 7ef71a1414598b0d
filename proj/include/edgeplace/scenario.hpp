#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeplace/config.hpp"
#include "edgeplace/metrics.hpp"
#include "edgeplace/model.hpp"
#include "edgeplace/outcome.hpp"
#include "edgeplace/placement.hpp"
#include "edgeplace/rng.hpp"

namespace edgeplace {

struct DynamicsEvent {
  int step = 0;
  int node = 0;
  bool aval = false;
};

/// Availability dynamics: scheduled flips plus an optional per-step random
/// toggle rate. Nodes hosting placed components never flip off.
struct DynamicsSpec {
  std::vector<DynamicsEvent> schedule;
  double flip_rate = 0.0;
};

struct PartitionSpec {
  int n_local = 1;
  uint64_t seed = 0;
};

/// A reproducible experiment description. (scenario file, master seed) fully
/// determines every single-worker run.
struct Scenario {
  int schema_version = 1;
  std::string name;
  uint64_t master_seed = 0;
  ResourceGraph resources;
  std::vector<ApplicationGraph> applications;  // arrival order
  PartitionSpec partition;
  double masked_node_pct = 0.0;
  DynamicsSpec dynamics;
  MetricWeights weights;
  TrainConfig training;
  std::string source_hash;  // FNV-1a of the file bytes
};

inline std::string fnv1a_hex(const std::string& bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail_json {

using nlohmann::json;

inline void check_keys(const json& o, std::initializer_list<const char*> allowed,
                       const std::string& where, std::vector<std::string>& errs) {
  for (const auto& [key, value] : o.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) errs.push_back("unknown field '" + key + "' in " + where);
  }
}

inline double num_or(const json& o, const char* key, double def, const std::string& where,
                     std::vector<std::string>& errs) {
  if (!o.contains(key)) return def;
  if (!o[key].is_number()) {
    errs.push_back(where + "." + key + " must be a number");
    return def;
  }
  return o[key].get<double>();
}

inline double num_req(const json& o, const char* key, const std::string& where,
                      std::vector<std::string>& errs) {
  if (!o.contains(key)) {
    errs.push_back(where + " is missing required field '" + std::string(key) + "'");
    return 0.0;
  }
  return num_or(o, key, 0.0, where, errs);
}

inline int int_or(const json& o, const char* key, int def, const std::string& where,
                  std::vector<std::string>& errs) {
  if (!o.contains(key)) return def;
  if (!o[key].is_number_integer()) {
    errs.push_back(where + "." + key + " must be an integer");
    return def;
  }
  return o[key].get<int>();
}

inline uint64_t seed_or(const json& o, const char* key, uint64_t def,
                        const std::string& where, std::vector<std::string>& errs) {
  if (!o.contains(key)) return def;
  if (!o[key].is_number_integer()) {
    errs.push_back(where + "." + key + " must be an integer seed");
    return def;
  }
  return o[key].get<uint64_t>();
}

inline bool bool_or(const json& o, const char* key, bool def, const std::string& where,
                    std::vector<std::string>& errs) {
  if (!o.contains(key)) return def;
  if (!o[key].is_boolean()) {
    errs.push_back(where + "." + key + " must be a boolean");
    return def;
  }
  return o[key].get<bool>();
}

}  // namespace detail_json

/// Parses and fully validates a scenario from JSON text. Unknown fields are
/// rejected and every problem found is reported, not just the first.
inline Outcome<Scenario> scenario_from_json_text(const std::string& text,
                                                 std::optional<uint64_t> seed_override = {},
                                                 const std::string& name_hint = "") {
  using nlohmann::json;
  using namespace detail_json;

  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    return Error{"parse", std::string("scenario parse error: ") + e.what()};
  }
  if (!root.is_object()) return Error{"parse", "scenario root must be a JSON object"};

  std::vector<std::string> errs;
  Scenario sc;
  sc.source_hash = fnv1a_hex(text);

  check_keys(root,
             {"schema_version", "name", "seed", "resources", "applications", "partition",
              "masked_node_pct", "dynamics", "weights", "training"},
             "scenario", errs);

  sc.schema_version = int_or(root, "schema_version", 0, "scenario", errs);
  if (sc.schema_version != 1)
    errs.push_back("schema_version must be 1 (got " + std::to_string(sc.schema_version) +
                   ")");
  if (root.contains("name") && root["name"].is_string())
    sc.name = root["name"].get<std::string>();
  else if (root.contains("name"))
    errs.push_back("scenario.name must be a string");
  else
    sc.name = name_hint;
  sc.master_seed = seed_or(root, "seed", 0, "scenario", errs);

  // resources
  if (!root.contains("resources") || !root["resources"].is_object()) {
    errs.push_back("scenario is missing the 'resources' object");
  } else {
    const json& r = root["resources"];
    check_keys(r, {"nodes", "links"}, "resources", errs);
    if (r.contains("nodes") && r["nodes"].is_array()) {
      for (size_t i = 0; i < r["nodes"].size(); ++i) {
        const json& n = r["nodes"][i];
        const std::string where = "resources.nodes[" + std::to_string(i) + "]";
        check_keys(n, {"id", "cpu", "gpu", "ram", "stor", "pt", "speed", "aval"}, where,
                   errs);
        ResourceNodeSpec v;
        v.id = int_or(n, "id", static_cast<int>(i), where, errs);
        v.cpu = num_or(n, "cpu", 0, where, errs);
        v.gpu = num_or(n, "gpu", 0, where, errs);
        v.ram = num_or(n, "ram", 0, where, errs);
        v.stor = num_or(n, "stor", 0, where, errs);
        v.pt = num_or(n, "pt", 0, where, errs);
        v.speed = num_req(n, "speed", where, errs);
        v.aval = bool_or(n, "aval", true, where, errs);
        sc.resources.nodes.push_back(v);
      }
    } else {
      errs.push_back("resources.nodes must be an array");
    }
    if (r.contains("links")) {
      if (!r["links"].is_array()) {
        errs.push_back("resources.links must be an array");
      } else {
        for (size_t i = 0; i < r["links"].size(); ++i) {
          const json& l = r["links"][i];
          const std::string where = "resources.links[" + std::to_string(i) + "]";
          check_keys(l, {"a", "b", "latency", "bandwidth"}, where, errs);
          ResourceLinkSpec link;
          link.a = int_or(l, "a", -1, where, errs);
          link.b = int_or(l, "b", -1, where, errs);
          link.latency = num_or(l, "latency", 0, where, errs);
          link.bandwidth = num_req(l, "bandwidth", where, errs);
          sc.resources.links.push_back(link);
        }
      }
    }
  }

  // applications
  if (!root.contains("applications") || !root["applications"].is_array() ||
      root["applications"].empty()) {
    errs.push_back("scenario needs a non-empty 'applications' array");
  } else {
    for (size_t a = 0; a < root["applications"].size(); ++a) {
      const json& aj = root["applications"][a];
      const std::string awhere = "applications[" + std::to_string(a) + "]";
      check_keys(aj, {"name", "components", "edges"}, awhere, errs);
      ApplicationGraph app;
      app.name = aj.contains("name") && aj["name"].is_string()
                     ? aj["name"].get<std::string>()
                     : "app" + std::to_string(a);
      if (aj.contains("components") && aj["components"].is_array()) {
        for (size_t i = 0; i < aj["components"].size(); ++i) {
          const json& c = aj["components"][i];
          const std::string where = awhere + ".components[" + std::to_string(i) + "]";
          check_keys(c, {"id", "cpu", "gpu", "ram", "stor", "work", "ddl"}, where, errs);
          ComponentSpec cs;
          cs.id = int_or(c, "id", static_cast<int>(i), where, errs);
          cs.cpu = num_or(c, "cpu", 0, where, errs);
          cs.gpu = num_or(c, "gpu", 0, where, errs);
          cs.ram = num_or(c, "ram", 0, where, errs);
          cs.stor = num_or(c, "stor", 0, where, errs);
          cs.work = num_or(c, "work", 0, where, errs);
          cs.ddl = num_req(c, "ddl", where, errs);
          app.components.push_back(cs);
        }
      } else {
        errs.push_back(awhere + ".components must be an array");
      }
      if (aj.contains("edges")) {
        if (!aj["edges"].is_array()) {
          errs.push_back(awhere + ".edges must be an array");
        } else {
          for (size_t i = 0; i < aj["edges"].size(); ++i) {
            const json& e = aj["edges"][i];
            const std::string where = awhere + ".edges[" + std::to_string(i) + "]";
            check_keys(e, {"a", "b", "max_latency", "msg_size", "min_bandwidth"}, where,
                       errs);
            AppEdgeSpec es;
            es.a = int_or(e, "a", -1, where, errs);
            es.b = int_or(e, "b", -1, where, errs);
            es.max_latency = num_req(e, "max_latency", where, errs);
            es.msg_size = num_or(e, "msg_size", 0, where, errs);
            es.min_bandwidth = num_req(e, "min_bandwidth", where, errs);
            app.edges.push_back(es);
          }
        }
      }
      sc.applications.push_back(std::move(app));
    }
  }

  // partition
  if (root.contains("partition")) {
    const json& p = root["partition"];
    check_keys(p, {"n_local", "seed"}, "partition", errs);
    sc.partition.n_local = int_or(p, "n_local", 1, "partition", errs);
    sc.partition.seed = seed_or(p, "seed", 0, "partition", errs);
  }

  sc.masked_node_pct = num_or(root, "masked_node_pct", 0.0, "scenario", errs);
  if (sc.masked_node_pct < 0 || sc.masked_node_pct > 100)
    errs.push_back("masked_node_pct must be in [0,100]");

  // dynamics
  if (root.contains("dynamics")) {
    const json& dj = root["dynamics"];
    check_keys(dj, {"schedule", "flip_rate"}, "dynamics", errs);
    sc.dynamics.flip_rate = num_or(dj, "flip_rate", 0.0, "dynamics", errs);
    if (sc.dynamics.flip_rate < 0 || sc.dynamics.flip_rate > 1)
      errs.push_back("dynamics.flip_rate must be in [0,1]");
    if (dj.contains("schedule")) {
      if (!dj["schedule"].is_array()) {
        errs.push_back("dynamics.schedule must be an array");
      } else {
        for (size_t i = 0; i < dj["schedule"].size(); ++i) {
          const json& ev = dj["schedule"][i];
          const std::string where = "dynamics.schedule[" + std::to_string(i) + "]";
          check_keys(ev, {"step", "node", "aval"}, where, errs);
          DynamicsEvent e;
          e.step = int_or(ev, "step", 0, where, errs);
          e.node = int_or(ev, "node", -1, where, errs);
          e.aval = bool_or(ev, "aval", false, where, errs);
          if (e.step < 0) errs.push_back(where + ".step must be >= 0");
          if (e.node < 0 || e.node >= static_cast<int>(sc.resources.nodes.size()))
            errs.push_back(where + " references unknown node " + std::to_string(e.node));
          sc.dynamics.schedule.push_back(e);
        }
        for (size_t i = 1; i < sc.dynamics.schedule.size(); ++i)
          if (sc.dynamics.schedule[i].step < sc.dynamics.schedule[i - 1].step)
            errs.push_back("dynamics.schedule steps must be nondecreasing");
      }
    }
  }

  // weights
  if (root.contains("weights")) {
    const json& wj = root["weights"];
    check_keys(wj,
               {"alpha", "beta", "gamma", "local_alpha", "local_beta", "local_gamma",
                "delta1", "delta2", "lambda", "mu"},
               "weights", errs);
    MetricWeights& w = sc.weights;
    w.alpha = num_or(wj, "alpha", w.alpha, "weights", errs);
    w.beta = num_or(wj, "beta", w.beta, "weights", errs);
    w.gamma = num_or(wj, "gamma", w.gamma, "weights", errs);
    w.local_alpha = num_or(wj, "local_alpha", w.local_alpha, "weights", errs);
    w.local_beta = num_or(wj, "local_beta", w.local_beta, "weights", errs);
    w.local_gamma = num_or(wj, "local_gamma", w.local_gamma, "weights", errs);
    w.delta1 = num_or(wj, "delta1", w.delta1, "weights", errs);
    w.delta2 = num_or(wj, "delta2", w.delta2, "weights", errs);
    w.lambda_g = num_or(wj, "lambda", w.lambda_g, "weights", errs);
    if (wj.contains("mu")) {
      if (!wj["mu"].is_array()) {
        errs.push_back("weights.mu must be an array");
      } else {
        for (const auto& x : wj["mu"]) {
          if (!x.is_number()) {
            errs.push_back("weights.mu entries must be numbers");
            break;
          }
          w.mu.push_back(x.get<double>());
        }
      }
    }
    for (double x : {w.alpha, w.beta, w.gamma, w.local_alpha, w.local_beta, w.local_gamma,
                     w.delta1, w.delta2, w.lambda_g})
      if (x < 0) {
        errs.push_back("weights must be nonnegative");
        break;
      }
    for (double x : w.mu)
      if (x < 0) {
        errs.push_back("weights.mu entries must be nonnegative");
        break;
      }
  }

  // training
  if (root.contains("training")) {
    const json& tj = root["training"];
    check_keys(tj,
               {"learning_rate", "discount", "episodes_phase1", "episodes_phase2",
                "batch_size", "entropy_weight", "replay_mix", "grad_clip_norm",
                "replay_capacity", "infeasible_penalty", "seed"},
               "training", errs);
    TrainConfig& t = sc.training;
    t.learning_rate = num_or(tj, "learning_rate", t.learning_rate, "training", errs);
    t.discount = num_or(tj, "discount", t.discount, "training", errs);
    t.episodes_phase1 = int_or(tj, "episodes_phase1", t.episodes_phase1, "training", errs);
    t.episodes_phase2 = int_or(tj, "episodes_phase2", t.episodes_phase2, "training", errs);
    t.batch_size = int_or(tj, "batch_size", t.batch_size, "training", errs);
    t.entropy_weight = num_or(tj, "entropy_weight", t.entropy_weight, "training", errs);
    t.replay_mix = num_or(tj, "replay_mix", t.replay_mix, "training", errs);
    t.grad_clip_norm = num_or(tj, "grad_clip_norm", t.grad_clip_norm, "training", errs);
    t.replay_capacity = int_or(tj, "replay_capacity", t.replay_capacity, "training", errs);
    t.infeasible_penalty =
        num_or(tj, "infeasible_penalty", t.infeasible_penalty, "training", errs);
    t.seed = seed_or(tj, "seed", t.seed, "training", errs);
    if (!(t.learning_rate > 0)) errs.push_back("training.learning_rate must be > 0");
    if (t.discount < 0 || t.discount > 1)
      errs.push_back("training.discount must be in [0,1]");
    if (t.replay_mix < 0 || t.replay_mix > 1)
      errs.push_back("training.replay_mix must be in [0,1]");
    if (t.batch_size < 1) errs.push_back("training.batch_size must be >= 1");
    if (t.replay_capacity < 1) errs.push_back("training.replay_capacity must be >= 1");
    if (!(t.grad_clip_norm > 0)) errs.push_back("training.grad_clip_norm must be > 0");
  }

  if (seed_override) sc.master_seed = *seed_override;

  // Structural validation of the graphs.
  if (errs.empty()) {
    for (const std::string& e : validate_resources(sc.resources)) errs.push_back(e);
    for (size_t a = 0; a < sc.applications.size(); ++a)
      for (const std::string& e : validate_application(sc.applications[a]))
        errs.push_back("applications[" + std::to_string(a) + "]: " + e);
    const int n = static_cast<int>(sc.resources.nodes.size());
    if (sc.partition.n_local < 1 || sc.partition.n_local > n)
      errs.push_back("partition.n_local must be in [1, node count]");
  }

  if (errs.empty()) {
    if (sc.weights.mu.empty())
      sc.weights.mu.assign(sc.partition.n_local, 1.0 / sc.partition.n_local);
    else if (static_cast<int>(sc.weights.mu.size()) != sc.partition.n_local)
      errs.push_back("weights.mu length must equal partition.n_local");
  }

  // Reserve a seeded share of nodes as initially unavailable; they stay in
  // the graph (and in embeddings) so dynamics can bring them online later.
  if (errs.empty() && sc.masked_node_pct > 0) {
    const int n = static_cast<int>(sc.resources.nodes.size());
    int k = static_cast<int>(sc.masked_node_pct / 100.0 * n + 0.5);
    std::vector<int> candidates;
    for (int i = 0; i < n; ++i)
      if (sc.resources.nodes[i].aval) candidates.push_back(i);
    k = std::min<int>(k, static_cast<int>(candidates.size()));
    Rng rng(mix_seed(sc.master_seed, 0x4d41534bULL));  // "MASK"
    for (int i = 0; i < k; ++i) {
      int j = i + rng.uniform_int(static_cast<int>(candidates.size()) - i);
      std::swap(candidates[i], candidates[j]);
      sc.resources.nodes[candidates[i]].aval = false;
    }
    for (const std::string& e : validate_resources(sc.resources))
      errs.push_back("after masking: " + e);
  }

  if (!errs.empty()) {
    std::string joined;
    for (const std::string& e : errs) {
      if (!joined.empty()) joined += "; ";
      joined += e;
    }
    return Error{"validation", joined};
  }
  return sc;
}

/// Loads and validates a scenario file. A seed override replaces the file's
/// master seed before seed-derived setup (node masking) happens.
inline Outcome<Scenario> load_scenario(const std::string& path,
                                       std::optional<uint64_t> seed_override = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Error{"io", "cannot open scenario file '" + path + "'"};
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string name_hint = path;
  if (auto slash = name_hint.find_last_of('/'); slash != std::string::npos)
    name_hint = name_hint.substr(slash + 1);
  if (auto dot = name_hint.find_last_of('.'); dot != std::string::npos)
    name_hint = name_hint.substr(0, dot);
  return scenario_from_json_text(buf.str(), seed_override, name_hint);
}

/// Applies this step's availability dynamics: scheduled flips first, then
/// independent random toggles at `flip_rate`. One uniform draw per node per
/// step when the random mode is active, so the stream length is fixed.
/// Nodes hosting placed components are exempt from flipping off.
inline void apply_dynamics(PlacementState& s, const Scenario& sc, int step, Rng& rng) {
  for (const DynamicsEvent& ev : sc.dynamics.schedule) {
    if (ev.step != step) continue;
    if (!ev.aval && s.node_hosts_any(ev.node)) continue;
    s.avail[ev.node] = ev.aval ? 1 : 0;
  }
  if (sc.dynamics.flip_rate > 0) {
    for (size_t v = 0; v < s.avail.size(); ++v) {
      const double u = rng.uniform();
      if (u >= sc.dynamics.flip_rate) continue;
      if (s.avail[v] && s.node_hosts_any(static_cast<int>(v))) continue;
      s.avail[v] = s.avail[v] ? 0 : 1;
    }
  }
}

}  // namespace edgeplace
