#pragma once

#include <cstdint>

namespace edgeplace {

/// Hyperparameters for both training phases. Defaults are tuned for the
/// bundled fixtures and are overridable per scenario.
struct TrainConfig {
  double learning_rate = 0.01;
  double discount = 1.0;  // within-episode; rewards are terminal-only
  int episodes_phase1 = 200;
  int episodes_phase2 = 300;
  int batch_size = 8;
  double entropy_weight = 0.01;
  double replay_mix = 0.25;      // fraction of joint-phase local updates from replay
  double grad_clip_norm = 5.0;
  int replay_capacity = 256;     // trajectories per zone
  double infeasible_penalty = -1.0;
  uint64_t seed = 42;
};

}  // namespace edgeplace
