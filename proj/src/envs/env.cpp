#include "laser/envs/env.hpp"

#include <algorithm>
#include <cmath>

#include "laser/envs/mini_door.hpp"
#include "laser/envs/mini_wipe.hpp"
#include "laser/error.hpp"

namespace laser::envs {

void EnvSpec::validate() const {
  if (robot_state_dim > state_dim) throw ContractError(name + ": robot state larger than full state");
  if (action_low.size() != action_dim || action_high.size() != action_dim) {
    throw ContractError(name + ": action bounds do not match action_dim");
  }
  for (std::size_t i = 0; i < action_dim; ++i) {
    if (!(action_low[i] < action_high[i])) throw ContractError(name + ": empty action interval");
  }
  if (max_episode_steps == 0) throw ContractError(name + ": max_episode_steps must be positive");
}

std::vector<double> robot_state(const EnvState& s, std::size_t robot_state_dim) {
  if (robot_state_dim > s.full.size()) throw ContractError("robot_state: state shorter than robot_state_dim");
  return {s.full.begin(), s.full.begin() + static_cast<std::ptrdiff_t>(robot_state_dim)};
}

std::vector<double> nonrobot_state(const EnvState& s, std::size_t robot_state_dim) {
  if (robot_state_dim > s.full.size()) throw ContractError("nonrobot_state: state shorter than robot_state_dim");
  return {s.full.begin() + static_cast<std::ptrdiff_t>(robot_state_dim), s.full.end()};
}

std::vector<double> clip_action(std::span<const double> action, const EnvSpec& spec) {
  std::vector<double> out(action.begin(), action.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], spec.action_low[i], spec.action_high[i]);
  return out;
}

void require_finite_action(std::span<const double> action, const EnvSpec& spec) {
  if (action.size() != spec.action_dim) {
    throw ContractError(spec.name + ": action has " + std::to_string(action.size()) + " entries, expected " +
                        std::to_string(spec.action_dim));
  }
  for (double v : action) {
    if (!std::isfinite(v)) throw ContractError(spec.name + ": non-finite action");
  }
}

std::unique_ptr<Env> make_variant(const Env& env, const VariantConfig& variant) {
  std::unique_ptr<Env> copy = env.clone();
  for (const auto& [key, value] : variant) copy->apply_variant(key, value);
  return copy;
}

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "mini_door") return std::make_unique<MiniDoor>();
  if (name == "mini_wipe") return std::make_unique<MiniWipe>();
  throw ConfigError("unknown environment '" + name + "' (expected mini_door or mini_wipe)");
}

}  // namespace laser::envs
