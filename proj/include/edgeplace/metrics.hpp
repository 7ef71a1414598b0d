#pragma once

#include <cassert>
#include <span>
#include <vector>

#include "edgeplace/model.hpp"
#include "edgeplace/outcome.hpp"

namespace edgeplace {

/// Weighting factors for the objective, the zone reward, the non-local reward
/// and the global combination. The objective triple and the zone-reward
/// triple are kept separate so each can use its own scale.
struct MetricWeights {
  double alpha = 1.0, beta = 0.01, gamma = 0.02;                  // objective
  double local_alpha = 1.0, local_beta = 1.0, local_gamma = 1.0;  // zone reward
  double delta1 = 1.0, delta2 = 1.0;                              // non-local reward
  double lambda_g = 1.0;
  std::vector<double> mu;  // per-zone combination weights, |mu| == n_local
};

/// Cost summary of a placement: per-component completion times, their sum,
/// mean resource utilization in [0,1], SLA violation rate in [0,100] and the
/// weighted objective.
struct CostReport {
  std::vector<double> per_component_ct;
  double ct_app = 0;
  double ru = 0;
  double svr = 0;
  double objective = 0;
};

/// Computation time of component c on node v: device response time plus
/// work / speed.
inline double comp_time(const ComponentSpec& c, const ResourceNodeSpec& v) {
  assert(v.speed > 0);
  return v.pt + c.work / v.speed;
}

/// Communication time of one message over a routed path: per link, latency
/// plus transfer time msg_size / bandwidth. Empty path (co-location) is 0.
inline double comm_time(const AppEdgeSpec& e, std::span<const ResourceLinkSpec> path) {
  double t = 0.0;
  for (const ResourceLinkSpec& l : path) t += l.latency + e.msg_size / l.bandwidth;
  return t;
}

/// alpha·RU − beta·CT_app − gamma·SVR, the quantity every policy is scored by.
inline double objective_value(const CostReport& r, const MetricWeights& w) {
  return w.alpha * r.ru - w.beta * r.ct_app - w.gamma * r.svr;
}

/// Zone-scope reward. The reciprocal terms are smoothed as 1/(1+x) so the
/// reward stays bounded and defined at the ideal operating point x = 0.
inline double local_reward(const CostReport& zone_report, const MetricWeights& w) {
  return w.local_alpha * zone_report.ru + w.local_beta / (1.0 + zone_report.ct_app) +
         w.local_gamma / (1.0 + zone_report.svr);
}

/// System-scope reward component, same smoothing as local_reward.
inline double non_local_reward(const CostReport& global_report, const MetricWeights& w) {
  return w.delta1 / (1.0 + global_report.svr) + w.delta2 / (1.0 + global_report.ct_app);
}

/// lambda·non_local + Σ mu_i·locals[i].
inline Outcome<double> global_reward(double non_local, std::span<const double> locals,
                                     const MetricWeights& w) {
  if (locals.size() != w.mu.size())
    return Error{"weights", "mu length " + std::to_string(w.mu.size()) +
                                " does not match " + std::to_string(locals.size()) +
                                " local rewards"};
  double r = w.lambda_g * non_local;
  for (size_t i = 0; i < locals.size(); ++i) r += w.mu[i] * locals[i];
  return r;
}

}  // namespace edgeplace
