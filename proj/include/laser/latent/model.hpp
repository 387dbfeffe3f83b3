#pragma once

#include <cstddef>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "laser/diffcore/mlp.hpp"
#include "laser/envs/env.hpp"

namespace laser::latent {

struct LaserConfig {
  std::size_t latent_dim = 4;
  bool flag_c = true;    // encoder and decoder see the robot state
  bool flag_d = true;    // latent dynamics loss
  bool flag_vae = true;  // KL regularisation and sampled latents
  double beta_rec = 1.0;
  double beta_dyn = 1.0;
  double beta_kl = 0.01;
  std::vector<std::size_t> hidden{128, 128};
  // Box the policy's latent actions are squashed into.
  double latent_bound = 3.0;

  void validate() const;
  double effective_beta_kl() const { return flag_vae ? beta_kl : 0.0; }

  nlohmann::json to_json() const;
  static LaserConfig from_json(const nlohmann::json& j);
};

// Fixed affine map applied to robot states before they enter a network.
struct StateNormalizer {
  std::vector<double> mean;
  std::vector<double> scale;
};

// Encoder E(a, s_r) -> (mu, log_sigma), decoder D(s_r, z) -> a_hat inside the
// action bounds, dynamics T(s_r, z) -> predicted next robot state. When
// flag_c is off the encoder and decoder ignore s_r entirely.
class LaserModel {
 public:
  LaserModel() = default;
  LaserModel(const LaserConfig& config, const envs::EnvSpec& spec, std::uint64_t seed);

  const LaserConfig& config() const { return config_; }
  const envs::EnvSpec& spec() const { return spec_; }
  std::size_t latent_dim() const { return config_.latent_dim; }
  std::size_t action_dim() const { return spec_.action_dim; }
  std::size_t robot_state_dim() const { return spec_.robot_state_dim; }

  diff::Mlp& encoder() { return encoder_; }
  diff::Mlp& decoder() { return decoder_; }
  diff::Mlp& dynamics() { return dynamics_; }
  const diff::Mlp& encoder() const { return encoder_; }
  const diff::Mlp& decoder() const { return decoder_; }
  const diff::Mlp& dynamics() const { return dynamics_; }

  const StateNormalizer& normalizer() const { return normalizer_; }
  void set_normalizer(StateNormalizer normalizer);
  // Mean and standard deviation of the given robot-state rows.
  void fit_normalizer(const diff::Tensor& robot_states);

  std::vector<diff::Parameter*> parameters();
  std::vector<const diff::Parameter*> parameters() const;
  bool all_finite() const;

  // Constant rows used to map actions to [-1, 1] and back.
  const diff::Tensor& action_mid() const { return action_mid_; }
  const diff::Tensor& action_half() const { return action_half_; }

 private:
  LaserConfig config_;
  envs::EnvSpec spec_;
  diff::Mlp encoder_;
  diff::Mlp decoder_;
  diff::Mlp dynamics_;
  StateNormalizer normalizer_;
  diff::Tensor action_mid_;
  diff::Tensor action_half_;
};

struct Encoding {
  diff::Var mu;
  diff::Var log_sigma;
};

// Batched graph versions. Rows are samples.
Encoding encode(const LaserModel& model, diff::Var a, diff::Var s_r, diff::ParamMode mode = diff::ParamMode::track);
diff::Var decode(const LaserModel& model, diff::Var s_r, diff::Var a_bar, diff::ParamMode mode = diff::ParamMode::track);
diff::Var predict_next(const LaserModel& model, diff::Var s_r, diff::Var a_bar,
                       diff::ParamMode mode = diff::ParamMode::track);

// Tape-free versions for rollouts and analysis.
struct EncodingValue {
  diff::Tensor mu;
  diff::Tensor log_sigma;
};
EncodingValue encode(const LaserModel& model, const diff::Tensor& a, const diff::Tensor& s_r);
diff::Tensor decode(const LaserModel& model, const diff::Tensor& s_r, const diff::Tensor& a_bar);
diff::Tensor predict_next(const LaserModel& model, const diff::Tensor& s_r, const diff::Tensor& a_bar);

// A minibatch of (s_r, a, s_r') rows.
struct LaserBatch {
  diff::Tensor s_r;
  diff::Tensor a;
  diff::Tensor s_r_next;
};

// Mean over rows of the squared L2 distance.
diff::Var mean_squared_norm(diff::Var target, diff::Var prediction);

// Mean over rows of sum_i 0.5 (mu^2 + sigma^2 - 1 - 2 log sigma).
diff::Var loss_kl(diff::Var mu, diff::Var log_sigma);

// beta_rec * rec + beta_dyn * dyn + beta_kl * kl with the ablation gates applied.
double weighted_total(const LaserConfig& config, double rec, double dyn, double kl);

struct LossTerms {
  diff::Var total;
  diff::Var rec;
  diff::Var dyn;
  diff::Var kl;
  std::map<std::string, double> components;  // unweighted rec, dyn, kl plus total
};

// `noise` drives the reparameterised latent sample; pass nullptr for
// evaluation mode, which decodes the encoder mean. The latent is always the
// mean when flag_vae is off.
LossTerms total_loss(const LaserModel& model, diff::Tape& tape, const LaserBatch& batch, const diff::Tensor* noise);

// Evaluation-mode components on a batch, without gradients.
std::map<std::string, double> evaluate_losses(const LaserModel& model, const LaserBatch& batch);

// Writes and reads a model with its config and env spec as checkpoint metadata.
void save_laser(const std::string& path, const LaserModel& model);
LaserModel load_laser(const std::string& path);

nlohmann::json spec_to_json(const envs::EnvSpec& spec);
envs::EnvSpec spec_from_json(const nlohmann::json& j);

}  // namespace laser::latent
