#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "laser/envs/env.hpp"
#include "laser/latent/train.hpp"
#include "laser/rl/sac.hpp"

namespace laser::rl {

struct EpisodeRecord {
  std::size_t env_steps = 0;  // cumulative env steps when the episode ended
  double episode_return = 0.0;
  std::size_t episode_len = 0;
  std::uint64_t seed = 0;
};

struct EvalRecord {
  std::size_t env_steps = 0;
  double mean_return = 0.0;
  double success_rate = 0.0;
};

struct UpdateRecord {
  std::size_t update = 0;
  std::size_t env_steps = 0;
  SacLosses sac;
  std::optional<latent::LaserLossRecord> laser;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> episodes;
  std::vector<EvalRecord> evals;
  std::vector<UpdateRecord> updates;
  std::size_t policy_updates = 0;
  std::size_t laser_updates = 0;
};

struct TrainPolicyOptions {
  std::size_t total_steps = 200'000;
  std::size_t pool_size = 16;
  std::size_t warmup_steps = 1000;
  std::size_t eval_every = 5000;
  std::size_t eval_episodes = 10;
  // Evaluation episodes reset with seeds eval_seed_base + k.
  std::uint64_t eval_seed_base = 1'000'000;
  bool eval_at_start = true;
  // Where to dump the agent if training diverges; empty to skip.
  std::string divergence_checkpoint;
  // Called after every evaluation; returning false ends training early.
  std::function<bool(const EvalRecord&)> on_eval;

  void validate() const;
};

// Joint LASER training: one LASER update on a fresh replay batch after every
// policy update.
struct OnlineLaser {
  latent::LaserTrainer* trainer = nullptr;
  std::size_t batch_size = 256;
  // Fit the state normaliser on the warmup data before the first update.
  bool fit_normalizer = true;
};

// Steps a pool of env copies in lockstep, one action per env per iteration,
// with one gradient update per iteration once warmup is over. Warmup actions
// are uniform over the policy's action box.
RunRecord train_policy(SacAgent& agent, const envs::Env& prototype, const TrainPolicyOptions& options,
                       std::uint64_t seed, const OnlineLaser* online = nullptr);

// Deterministic-policy episodes run side by side.
EvalRecord evaluate_policy(const SacAgent& agent, const envs::Env& prototype, std::size_t episodes,
                           std::uint64_t seed_base);

}  // namespace laser::rl
