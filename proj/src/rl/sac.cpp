#include "laser/rl/sac.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "laser/diffcore/checkpoint.hpp"
#include "laser/diffcore/gaussian.hpp"
#include "laser/diffcore/ops.hpp"
#include "laser/error.hpp"

namespace laser::rl {

using diff::Activation;
using diff::Mlp;
using diff::ParamMode;
using diff::Tape;
using diff::Tensor;
using diff::Var;

namespace {

std::vector<std::size_t> dims(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> d{in};
  d.insert(d.end(), hidden.begin(), hidden.end());
  d.push_back(out);
  return d;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor out({a.rows(), a.cols() + b.cols()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::copy_n(a.raw() + r * a.cols(), a.cols(), out.raw() + r * out.cols());
    std::copy_n(b.raw() + r * b.cols(), b.cols(), out.raw() + r * out.cols() + a.cols());
  }
  return out;
}

Tensor row_tensor(const std::vector<double>& v) { return Tensor({1, v.size()}, v); }

// Gaussian head output split into mu and clamped log sigma.
struct Head {
  Tensor mu;
  Tensor log_sigma;
};

Head split_head(const Tensor& out, std::size_t d) {
  Head h{Tensor({out.rows(), d}), Tensor({out.rows(), d})};
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      h.mu(r, c) = out(r, c);
      h.log_sigma(r, c) = std::clamp(out(r, d + c), diff::kLogSigmaMin, diff::kLogSigmaMax);
    }
  }
  return h;
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw AgentError(std::string("SAC: non-finite ") + what);
}

}  // namespace

void SacConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("sac: gamma must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("sac: tau must lie in (0, 1]");
  if (!(lr >= 0.0)) throw ConfigError("sac: learning rate must be non-negative");
  if (batch_size == 0) throw ConfigError("sac: batch size must be positive");
  if (buffer_capacity < batch_size) throw ConfigError("sac: buffer capacity smaller than batch size");
  if (hidden.empty()) throw ConfigError("sac: need at least one hidden layer");
  if (!(initial_alpha > 0.0)) throw ConfigError("sac: initial alpha must be positive");
}

SacAgent::SacAgent(const envs::EnvSpec& spec, const SacConfig& config, std::uint64_t seed)
    : spec_(spec), config_(config), mode_(ActionMode::original) {
  init(seed);
}

SacAgent::SacAgent(const envs::EnvSpec& spec, const SacConfig& config, std::shared_ptr<latent::LaserModel> laser,
                   bool decoder_trainable, std::uint64_t seed)
    : spec_(spec), config_(config), mode_(ActionMode::latent), laser_(std::move(laser)),
      decoder_trainable_(decoder_trainable) {
  if (!laser_) throw ContractError("sac: latent mode needs a LASER model");
  if (laser_->action_dim() != spec_.action_dim || laser_->robot_state_dim() != spec_.robot_state_dim ||
      laser_->spec().action_low != spec_.action_low || laser_->spec().action_high != spec_.action_high) {
    throw DimensionError("sac: LASER model does not match the env spec");
  }
  init(seed);
}

void SacAgent::init(std::uint64_t seed) {
  config_.validate();
  spec_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = policy_dim();
  policy_ = Mlp("policy", dims(spec_.state_dim, config_.hidden, 2 * d), Activation::relu, Activation::identity, rng);
  policy_.zero_output_layer();
  const std::size_t critic_in = spec_.state_dim + spec_.action_dim;
  q1_ = Mlp("q1", dims(critic_in, config_.hidden, 1), Activation::relu, Activation::identity, rng);
  q2_ = Mlp("q2", dims(critic_in, config_.hidden, 1), Activation::relu, Activation::identity, rng);
  q1_target_ = q1_;
  q2_target_ = q2_;
  log_alpha_ = {"log_alpha", Tensor::scalar(std::log(config_.initial_alpha))};

  const diff::AdamConfig adam{config_.lr};
  std::vector<diff::Parameter*> critic_params = q1_.parameters();
  for (auto* p : q2_.parameters()) critic_params.push_back(p);
  critic_opt_ = diff::Adam(critic_params, adam);
  std::vector<diff::Parameter*> actor_params = policy_.parameters();
  if (mode_ == ActionMode::latent && decoder_trainable_) {
    for (auto* p : laser_->decoder().parameters()) actor_params.push_back(p);
  }
  actor_opt_ = diff::Adam(actor_params, adam);
  alpha_opt_ = diff::Adam({&log_alpha_}, adam);
}

std::size_t SacAgent::policy_dim() const {
  return mode_ == ActionMode::latent ? laser_->latent_dim() : spec_.action_dim;
}

double SacAgent::policy_bound(std::size_t dim) const {
  if (mode_ == ActionMode::latent) return laser_->config().latent_bound;
  return 0.5 * (spec_.action_high[dim] - spec_.action_low[dim]);
}

double SacAgent::target_entropy() const {
  return config_.target_entropy.value_or(-static_cast<double>(policy_dim()));
}

double SacAgent::alpha() const { return std::exp(log_alpha_.value.item()); }

Tensor SacAgent::robot_rows(const Tensor& states) const {
  const std::size_t sr = spec_.robot_state_dim;
  Tensor out({states.rows(), sr});
  for (std::size_t r = 0; r < states.rows(); ++r) std::copy_n(states.raw() + r * states.cols(), sr, out.raw() + r * sr);
  return out;
}

Tensor SacAgent::to_env_action(const Tensor& states, const Tensor& policy_actions) const {
  if (mode_ == ActionMode::latent) return latent::decode(*laser_, robot_rows(states), policy_actions);
  Tensor out = policy_actions;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      const double mid = 0.5 * (spec_.action_low[c] + spec_.action_high[c]);
      out(r, c) = std::clamp(mid + out(r, c), spec_.action_low[c], spec_.action_high[c]);
    }
  }
  return out;
}

PolicyAction SacAgent::act(const Tensor& states, bool deterministic, std::mt19937_64& rng) const {
  if (states.rank() != 2 || states.cols() != spec_.state_dim) throw DimensionError("sac: state width mismatch");
  const std::size_t d = policy_dim();
  Tensor head;
  try {
    head = diff::forward_mlp(policy_, states);
  } catch (const NumericError& e) {
    throw AgentError(std::string("SAC: ") + e.what());
  }
  const Head h = split_head(head, d);
  PolicyAction out{Tensor({states.rows(), d}), Tensor()};
  for (std::size_t r = 0; r < states.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      double u = h.mu(r, c);
      if (!deterministic) {
        std::normal_distribution<double> n(0.0, 1.0);
        u += std::exp(h.log_sigma(r, c)) * n(rng);
      }
      out.policy(r, c) = policy_bound(c) * std::tanh(u);
    }
  }
  require_finite(out.policy, "policy output");
  out.env = to_env_action(states, out.policy);
  require_finite(out.env, "action");
  return out;
}

std::vector<double> SacAgent::select_action(const envs::EnvState& s, bool deterministic, std::mt19937_64& rng) const {
  const PolicyAction a = act(Tensor({1, s.full.size()}, s.full), deterministic, rng);
  return {a.env.data().begin(), a.env.data().end()};
}

Tensor SacAgent::critic_input(const Tensor& states, const Tensor& env_actions) const {
  Tensor a = env_actions;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      const double mid = 0.5 * (spec_.action_low[c] + spec_.action_high[c]);
      const double half = 0.5 * (spec_.action_high[c] - spec_.action_low[c]);
      a(r, c) = (a(r, c) - mid) / half;
    }
  }
  return concat(states, a);
}

Var SacAgent::critic_input(Tape& tape, Var states, Var env_actions) const {
  std::vector<double> mid(spec_.action_dim);
  std::vector<double> inv_half(spec_.action_dim);
  for (std::size_t c = 0; c < spec_.action_dim; ++c) {
    mid[c] = 0.5 * (spec_.action_low[c] + spec_.action_high[c]);
    inv_half[c] = 2.0 / (spec_.action_high[c] - spec_.action_low[c]);
  }
  Var a = diff::mul(diff::sub(env_actions, tape.constant(row_tensor(mid))), tape.constant(row_tensor(inv_half)));
  const std::array<Var, 2> parts{states, a};
  return diff::concat_cols(parts);
}

Tensor SacAgent::critic_targets(const ReplayBatch& batch, std::mt19937_64& rng) const {
  const std::size_t n = batch.s.rows();
  const std::size_t d = policy_dim();
  const Head h = split_head(diff::forward_mlp(policy_, batch.s_next), d);
  Tensor next_policy({n, d});
  std::vector<double> log_prob(n, 0.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double eps = normal(rng);
      const double y = std::tanh(h.mu(r, c) + std::exp(h.log_sigma(r, c)) * eps);
      log_prob[r] += -0.5 * eps * eps - h.log_sigma(r, c) - log_norm - std::log(1.0 - y * y + diff::kSquashEpsilon);
      next_policy(r, c) = policy_bound(c) * y;
    }
  }
  const Tensor next_env = to_env_action(batch.s_next, next_policy);
  const Tensor in = critic_input(batch.s_next, next_env);
  const Tensor t1 = diff::forward_mlp(q1_target_, in);
  const Tensor t2 = diff::forward_mlp(q2_target_, in);
  const double a = alpha();
  Tensor y({n, 1});
  for (std::size_t r = 0; r < n; ++r) {
    const double soft_value = std::min(t1[r], t2[r]) - a * log_prob[r];
    y[r] = batch.r[r] + config_.gamma * (1.0 - batch.done[r]) * soft_value;
  }
  require_finite(y, "critic target");
  return y;
}

SacLosses SacAgent::update(const ReplayBatch& batch, std::mt19937_64& rng) {
  const std::size_t n = batch.s.rows();
  const std::size_t d = policy_dim();
  SacLosses out;
  try {
    // Critics.
    const Tensor y = critic_targets(batch, rng);
    {
      Tape tape;
      Var in = tape.constant(critic_input(batch.s, batch.a));
      Var target = tape.constant(y);
      Var l1 = diff::mean(diff::square(diff::sub(diff::forward_mlp(q1_, in), target)));
      Var l2 = diff::mean(diff::square(diff::sub(diff::forward_mlp(q2_, in), target)));
      Var loss = diff::add(l1, l2);
      out.q1 = l1.value().item();
      out.q2 = l2.value().item();
      critic_opt_.step(tape.backward(loss));
    }

    // Actor, through the decoder in latent mode.
    const double a = alpha();
    {
      Tape tape;
      Var s = tape.constant(batch.s);
      Var head = diff::forward_mlp(policy_, s);
      Var mu = diff::slice_cols(head, 0, d);
      Var log_sigma = diff::clamp(diff::slice_cols(head, d, 2 * d), diff::kLogSigmaMin, diff::kLogSigmaMax);
      Var u = diff::gaussian_reparam_sample(mu, log_sigma, tape.constant(diff::standard_normal({n, d}, rng)));
      Var squashed = diff::tanh(u);
      Var log_prob = diff::tanh_gaussian_logprob(mu, log_sigma, u);
      Var env_action;
      if (mode_ == ActionMode::latent) {
        Var s_r = tape.constant(robot_rows(batch.s));
        Var z = diff::scale(squashed, laser_->config().latent_bound);
        env_action = latent::decode(*laser_, s_r, z, decoder_trainable_ ? ParamMode::track : ParamMode::constant);
      } else {
        std::vector<double> mid(d);
        std::vector<double> half(d);
        for (std::size_t c = 0; c < d; ++c) {
          mid[c] = 0.5 * (spec_.action_low[c] + spec_.action_high[c]);
          half[c] = 0.5 * (spec_.action_high[c] - spec_.action_low[c]);
        }
        env_action = diff::add(diff::mul(squashed, tape.constant(row_tensor(half))), tape.constant(row_tensor(mid)));
      }
      Var in = critic_input(tape, s, env_action);
      Var q = diff::minimum(diff::forward_mlp(q1_, in, ParamMode::constant),
                            diff::forward_mlp(q2_, in, ParamMode::constant));
      Var loss = diff::mean(diff::sub(diff::scale(log_prob, a), q));
      out.actor = loss.value().item();
      const Tensor lp = log_prob.value();
      double mean_lp = 0.0;
      for (double v : lp.data()) mean_lp += v;
      out.log_prob = mean_lp / static_cast<double>(n);
      actor_opt_.step(tape.backward(loss));
    }

    // Temperature.
    if (config_.auto_alpha) {
      const double gap = out.log_prob + target_entropy();
      out.alpha_loss = -log_alpha_.value.item() * gap;
      diff::GradientMap g;
      g.emplace(&log_alpha_, Tensor::scalar(-gap));
      alpha_opt_.step(g);
    }
    out.alpha = alpha();
  } catch (const NumericError& e) {
    throw DivergenceError(std::string("SAC update diverged: ") + e.what());
  } catch (const OptimizerError& e) {
    throw DivergenceError(std::string("SAC update diverged: ") + e.what());
  } catch (const AgentError& e) {
    throw DivergenceError(std::string("SAC update diverged: ") + e.what());
  }
  for (double v : {out.q1, out.q2, out.actor, out.alpha}) {
    if (!std::isfinite(v)) throw DivergenceError("SAC update produced a non-finite loss");
  }
  soft_update_targets(config_.tau);
  ++updates_;
  return out;
}

std::optional<SacLosses> SacAgent::update(const ReplayBuffer& buffer, std::mt19937_64& rng) {
  if (buffer.size() < config_.batch_size) return std::nullopt;
  return update(buffer.sample(config_.batch_size, rng), rng);
}

void SacAgent::soft_update_targets(double tau) {
  q1_target_.soft_update_from(q1_, tau);
  q2_target_.soft_update_from(q2_, tau);
}

void SacAgent::save(const std::string& path) const {
  diff::Checkpoint ckpt;
  ckpt.meta = {{"kind", "sac"},
               {"mode", mode_ == ActionMode::latent ? "latent" : "original"},
               {"updates", updates_},
               {"env", spec_.name}};
  std::vector<const diff::Parameter*> params;
  for (const Mlp* net : {&policy_, &q1_, &q2_}) {
    for (const auto* p : net->parameters()) params.push_back(p);
  }
  diff::store_parameters(ckpt, params);
  // Target nets share names with the online nets, so store them with a prefix.
  for (const Mlp* net : {&q1_target_, &q2_target_}) {
    for (const auto* p : net->parameters()) ckpt.tensors["target." + p->name] = p->value;
  }
  ckpt.tensors[log_alpha_.name] = log_alpha_.value;
  if (laser_) {
    const auto lp = laser_->parameters();
    diff::store_parameters(ckpt, lp);
  }
  diff::write_checkpoint(path, ckpt);
}

void SacAgent::load(const std::string& path) {
  const diff::Checkpoint ckpt = diff::read_checkpoint(path);
  if (!ckpt.meta.contains("kind") || ckpt.meta["kind"] != "sac") throw LoadError(path + ": not a SAC checkpoint");
  const std::string mode = ckpt.meta.value("mode", "");
  if ((mode == "latent") != (mode_ == ActionMode::latent)) throw LoadError(path + ": action mode mismatch");
  std::vector<diff::Parameter*> params;
  for (Mlp* net : {&policy_, &q1_, &q2_}) {
    for (auto* p : net->parameters()) params.push_back(p);
  }
  diff::restore_parameters(ckpt, params);
  for (Mlp* net : {&q1_target_, &q2_target_}) {
    for (auto* p : net->parameters()) {
      const auto it = ckpt.tensors.find("target." + p->name);
      if (it == ckpt.tensors.end() || it->second.shape() != p->value.shape()) {
        throw LoadError(path + ": missing or malformed target." + p->name);
      }
      p->value = it->second;
    }
  }
  const auto it = ckpt.tensors.find(log_alpha_.name);
  if (it == ckpt.tensors.end()) throw LoadError(path + ": missing log_alpha");
  log_alpha_.value = it->second;
  if (laser_) {
    const auto lp = laser_->parameters();
    diff::restore_parameters(ckpt, lp);
  }
}

}  // namespace laser::rl
