#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "laser/diffcore/adam.hpp"
#include "laser/diffcore/mlp.hpp"
#include "laser/envs/env.hpp"
#include "laser/latent/model.hpp"
#include "laser/rl/replay.hpp"

namespace laser::rl {

struct SacConfig {
  double gamma = 0.99;
  double tau = 0.005;
  double lr = 3e-4;
  std::size_t batch_size = 256;
  std::size_t buffer_capacity = 1'000'000;
  std::vector<std::size_t> hidden{256, 256};
  bool auto_alpha = true;
  double initial_alpha = 1.0;
  // Defaults to minus the policy output dimension.
  std::optional<double> target_entropy;

  void validate() const;
};

enum class ActionMode { original, latent };

struct SacLosses {
  double q1 = 0.0;
  double q2 = 0.0;
  double actor = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double log_prob = 0.0;  // batch mean of log pi
};

// Policy output for a batch of states.
// Policy-space actions are bound * tanh(u): latent actions in latent mode,
// offsets from the action-range midpoint in original mode.
struct PolicyAction {
  diff::Tensor policy;  // [n, policy_dim]
  diff::Tensor env;     // action sent to the env, [n, action_dim]
};

// Soft actor-critic with twin critics over env actions. In latent mode the
// policy emits a latent action in [-latent_bound, latent_bound]^d that a LASER
// decoder maps to the env action; the critics still score decoded actions, so
// actor gradients reach the decoder whenever it is trainable.
class SacAgent {
 public:
  SacAgent(const envs::EnvSpec& spec, const SacConfig& config, std::uint64_t seed);
  SacAgent(const envs::EnvSpec& spec, const SacConfig& config, std::shared_ptr<latent::LaserModel> laser,
           bool decoder_trainable, std::uint64_t seed);
  // Optimisers hold parameter addresses, so agents stay put.
  SacAgent(const SacAgent&) = delete;
  SacAgent& operator=(const SacAgent&) = delete;

  ActionMode mode() const { return mode_; }
  const envs::EnvSpec& spec() const { return spec_; }
  const SacConfig& config() const { return config_; }
  std::size_t policy_dim() const;
  // Half-width of the policy's output box per dimension.
  double policy_bound(std::size_t dim) const;
  bool decoder_trainable() const { return decoder_trainable_; }

  // Batched action selection; `deterministic` uses tanh(mu).
  PolicyAction act(const diff::Tensor& states, bool deterministic, std::mt19937_64& rng) const;
  std::vector<double> select_action(const envs::EnvState& s, bool deterministic, std::mt19937_64& rng) const;
  // Maps policy-space actions to env actions.
  diff::Tensor to_env_action(const diff::Tensor& states, const diff::Tensor& policy_actions) const;

  // Soft Bellman targets y = r + gamma (1 - done) (min Q'(s', a') - alpha log pi(a'|s')).
  diff::Tensor critic_targets(const ReplayBatch& batch, std::mt19937_64& rng) const;

  SacLosses update(const ReplayBatch& batch, std::mt19937_64& rng);
  // Skips and returns nullopt while the buffer holds fewer than batch_size items.
  std::optional<SacLosses> update(const ReplayBuffer& buffer, std::mt19937_64& rng);

  double alpha() const;
  std::size_t updates() const { return updates_; }

  diff::Mlp& policy() { return policy_; }
  diff::Mlp& q1() { return q1_; }
  diff::Mlp& q2() { return q2_; }
  const diff::Mlp& policy() const { return policy_; }
  const diff::Mlp& q1() const { return q1_; }
  const diff::Mlp& q2() const { return q2_; }
  const diff::Mlp& q1_target() const { return q1_target_; }
  const diff::Mlp& q2_target() const { return q2_target_; }
  std::shared_ptr<latent::LaserModel> laser() const { return laser_; }

  void soft_update_targets(double tau);

  void save(const std::string& path) const;
  // Restores network weights and temperature saved by save().
  void load(const std::string& path);

 private:
  void init(std::uint64_t seed);
  diff::Tensor critic_input(const diff::Tensor& states, const diff::Tensor& env_actions) const;
  diff::Var critic_input(diff::Tape& tape, diff::Var states, diff::Var env_actions) const;
  diff::Tensor robot_rows(const diff::Tensor& states) const;
  double target_entropy() const;

  envs::EnvSpec spec_;
  SacConfig config_;
  ActionMode mode_ = ActionMode::original;
  std::shared_ptr<latent::LaserModel> laser_;
  bool decoder_trainable_ = false;

  diff::Mlp policy_;
  diff::Mlp q1_;
  diff::Mlp q2_;
  diff::Mlp q1_target_;
  diff::Mlp q2_target_;
  diff::Parameter log_alpha_;
  diff::Adam critic_opt_;
  diff::Adam actor_opt_;
  diff::Adam alpha_opt_;
  std::size_t updates_ = 0;
};

}  // namespace laser::rl
