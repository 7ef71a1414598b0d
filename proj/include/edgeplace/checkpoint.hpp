#pragma once

#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeplace/config.hpp"
#include "edgeplace/jsonout.hpp"
#include "edgeplace/outcome.hpp"
#include "edgeplace/policy.hpp"
#include "edgeplace/version.hpp"

namespace edgeplace {

namespace detail_ckpt {

struct TensorRef {
  std::string name;
  std::vector<int> shape;
  Vec* data;
};

inline void encoder_refs(EncoderParams& p, const std::string& prefix,
                         std::vector<TensorRef>& out) {
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const std::string lp = prefix + ".layer" + std::to_string(l);
    EncoderLayer& layer = p.layers[l];
    out.push_back({lp + ".w_self", {layer.w_self.rows, layer.w_self.cols}, &layer.w_self.a});
    out.push_back({lp + ".w_nbr", {layer.w_nbr.rows, layer.w_nbr.cols}, &layer.w_nbr.a});
    out.push_back({lp + ".b", {static_cast<int>(layer.b.size())}, &layer.b});
  }
}

inline void head_refs(MlpHead& h, const std::string& prefix, std::vector<TensorRef>& out) {
  out.push_back({prefix + ".w1", {h.w1.rows, h.w1.cols}, &h.w1.a});
  out.push_back({prefix + ".b1", {static_cast<int>(h.b1.size())}, &h.b1});
  out.push_back({prefix + ".w2", {h.w2.rows, h.w2.cols}, &h.w2.a});
  out.push_back({prefix + ".b2", {static_cast<int>(h.b2.size())}, &h.b2});
}

inline std::vector<TensorRef> tensor_refs(LocalPolicy& p) {
  std::vector<TensorRef> out;
  encoder_refs(p.app_enc, "app_enc", out);
  encoder_refs(p.res_enc, "res_enc", out);
  head_refs(p.head, "head", out);
  return out;
}

inline std::vector<TensorRef> tensor_refs(GlobalPolicy& p) {
  std::vector<TensorRef> out;
  encoder_refs(p.app_enc, "app_enc", out);
  encoder_refs(p.res_enc, "res_enc", out);
  head_refs(p.head, "head", out);
  return out;
}

inline void write_tensors(std::ostringstream& os, std::vector<TensorRef> refs,
                          const std::string& indent) {
  os << "{";
  for (size_t i = 0; i < refs.size(); ++i) {
    if (i) os << ",";
    os << "\n" << indent << json_str(refs[i].name) << ": {\"shape\": [";
    for (size_t k = 0; k < refs[i].shape.size(); ++k)
      os << (k ? ", " : "") << refs[i].shape[k];
    os << "], \"data\": [";
    const Vec& v = *refs[i].data;
    for (size_t k = 0; k < v.size(); ++k) os << (k ? "," : "") << fmt17(v[k]);
    os << "]}";
  }
  os << "\n" << indent << "}";
}

inline std::string config_json(const TrainConfig& c) {
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

inline Outcome<TrainConfig> config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.learning_rate = j.at("learning_rate").get<double>();
    c.discount = j.at("discount").get<double>();
    c.episodes_phase1 = j.at("episodes_phase1").get<int>();
    c.episodes_phase2 = j.at("episodes_phase2").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.entropy_weight = j.at("entropy_weight").get<double>();
    c.replay_mix = j.at("replay_mix").get<double>();
    c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
    c.replay_capacity = j.at("replay_capacity").get<int>();
    c.infeasible_penalty = j.at("infeasible_penalty").get<double>();
    c.seed = j.at("seed").get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    return Error{"checkpoint", std::string("bad config block: ") + e.what()};
  }
  return c;
}

inline Outcome<bool> load_tensors(const nlohmann::json& j, std::vector<TensorRef> refs,
                                  const std::string& where) {
  if (!j.is_object()) return Error{"checkpoint", where + ".tensors must be an object"};
  size_t matched = 0;
  for (TensorRef& r : refs) {
    if (!j.contains(r.name))
      return Error{"checkpoint", where + " is missing tensor '" + r.name + "'"};
    const nlohmann::json& t = j[r.name];
    if (!t.contains("shape") || !t.contains("data"))
      return Error{"checkpoint", where + "." + r.name + " needs shape and data"};
    std::vector<int> shape = t["shape"].get<std::vector<int>>();
    if (shape != r.shape) {
      std::string want, got;
      for (int s : r.shape) want += std::to_string(s) + " ";
      for (int s : shape) got += std::to_string(s) + " ";
      return Error{"checkpoint", where + "." + r.name + " shape mismatch: expected [" +
                                     want + "] got [" + got + "]"};
    }
    Vec data = t["data"].get<Vec>();
    if (data.size() != r.data->size())
      return Error{"checkpoint", where + "." + r.name + " data length mismatch"};
    *r.data = std::move(data);
    ++matched;
  }
  if (j.size() != matched)
    return Error{"checkpoint", where + " carries unknown tensors"};
  return true;
}

}  // namespace detail_ckpt

struct Checkpoint {
  std::vector<LocalPolicy> locals;
  std::optional<GlobalPolicy> global;
  TrainConfig config;
  std::string scenario_name;
  std::string scenario_hash;
};

/// Versioned structured-text dump of every parameter tensor with shape
/// headers plus the TrainConfig that produced them. Deterministic bytes for
/// identical inputs.
inline std::string checkpoint_to_json(std::span<const LocalPolicy> locals,
                                      const GlobalPolicy* global, const TrainConfig& cfg,
                                      const std::string& scenario_name,
                                      const std::string& scenario_hash) {
  std::ostringstream os;
  os << "{\n\"version\": 1,\n\"tool\": " << json_str(std::string(kVersion))
     << ",\n\"scenario_name\": " << json_str(scenario_name)
     << ",\n\"scenario_hash\": " << json_str(scenario_hash)
     << ",\n\"n_local\": " << locals.size()
     << ",\n\"config\": " << detail_ckpt::config_json(cfg) << ",\n\"locals\": [";
  for (size_t z = 0; z < locals.size(); ++z) {
    LocalPolicy copy = locals[z];
    if (z) os << ",";
    os << "\n{\"zone\": " << copy.zone_id << ", \"tensors\": ";
    detail_ckpt::write_tensors(os, detail_ckpt::tensor_refs(copy), "  ");
    os << "}";
  }
  os << "\n],\n\"global\": ";
  if (global) {
    GlobalPolicy copy = *global;
    os << "{\"n_zones\": " << copy.n_zones << ", \"tensors\": ";
    detail_ckpt::write_tensors(os, detail_ckpt::tensor_refs(copy), "  ");
    os << "}";
  } else {
    os << "null";
  }
  os << "\n}\n";
  return os.str();
}

inline Outcome<bool> save_checkpoint(const std::string& path,
                                     std::span<const LocalPolicy> locals,
                                     const GlobalPolicy* global, const TrainConfig& cfg,
                                     const std::string& scenario_name,
                                     const std::string& scenario_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return Error{"io", "cannot write checkpoint '" + path + "'"};
  out << checkpoint_to_json(locals, global, cfg, scenario_name, scenario_hash);
  return true;
}

/// Loads a checkpoint, validating version and every tensor shape.
inline Outcome<Checkpoint> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Error{"io", "cannot open checkpoint '" + path + "'"};
  std::ostringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    return Error{"parse", std::string("checkpoint parse error: ") + e.what()};
  }
  if (!j.is_object() || j.value("version", 0) != 1)
    return Error{"checkpoint", "unsupported checkpoint version"};

  Checkpoint ck;
  ck.scenario_name = j.value("scenario_name", "");
  ck.scenario_hash = j.value("scenario_hash", "");
  auto cfg = detail_ckpt::config_from_json(j.value("config", nlohmann::json::object()));
  if (!cfg) return cfg.error();
  ck.config = *cfg;

  const int n_local = j.value("n_local", 0);
  if (n_local < 1) return Error{"checkpoint", "n_local must be >= 1"};
  if (!j.contains("locals") || !j["locals"].is_array() ||
      static_cast<int>(j["locals"].size()) != n_local)
    return Error{"checkpoint", "locals array does not match n_local"};

  for (int z = 0; z < n_local; ++z) {
    const nlohmann::json& lz = j["locals"][z];
    LocalPolicy p = LocalPolicy::init(lz.value("zone", z), 0);
    auto ld = detail_ckpt::load_tensors(lz.value("tensors", nlohmann::json::object()),
                                        detail_ckpt::tensor_refs(p),
                                        "locals[" + std::to_string(z) + "]");
    if (!ld) return ld.error();
    ck.locals.push_back(std::move(p));
  }

  if (j.contains("global") && !j["global"].is_null()) {
    const nlohmann::json& gj = j["global"];
    const int n_zones = gj.value("n_zones", 0);
    if (n_zones != n_local)
      return Error{"checkpoint", "global n_zones does not match n_local"};
    GlobalPolicy g = GlobalPolicy::init(n_zones, 0);
    auto ld = detail_ckpt::load_tensors(gj.value("tensors", nlohmann::json::object()),
                                        detail_ckpt::tensor_refs(g), "global");
    if (!ld) return ld.error();
    ck.global = std::move(g);
  }
  return ck;
}

}  // namespace edgeplace
