#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace laser::envs {

struct EnvSpec {
  std::string name;
  std::size_t state_dim = 0;
  std::size_t robot_state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<double> action_low;
  std::vector<double> action_high;
  std::size_t max_episode_steps = 0;
  // Every per-step reward satisfies |r| <= reward_bound.
  double reward_bound = 0.0;

  // Throws ContractError if the declared dims or bounds are inconsistent.
  void validate() const;
};

// Full state vector. The first robot_state_dim entries are the robot's own
// kinematic quantities; the rest describe the task.
struct EnvState {
  std::vector<double> full;

  bool operator==(const EnvState&) const = default;
};

std::vector<double> robot_state(const EnvState& s, std::size_t robot_state_dim);
std::vector<double> nonrobot_state(const EnvState& s, std::size_t robot_state_dim);

struct Transition {
  EnvState s;
  std::vector<double> a;
  double r = 0.0;
  EnvState s_next;
  // True only for task termination; time-limit truncation is not terminal.
  bool done = false;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;        // terminated || truncated
  bool terminated = false;  // task success
  bool truncated = false;   // step limit reached
  std::map<std::string, double> info;
};

// Variant knobs: "damping_scale" (MiniDoor) and "spot_mode" (MiniWipe).
using VariantConfig = std::map<std::string, std::string>;

class Env {
 public:
  virtual ~Env() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual EnvState reset(std::uint64_t seed) = 0;
  // Clips the action to bounds, integrates one control period.
  virtual StepResult step(std::span<const double> action) = 0;
  virtual std::unique_ptr<Env> clone() const = 0;

  virtual EnvState state() const = 0;
  virtual std::array<double, 2> end_effector() const = 0;
  virtual std::size_t steps_taken() const = 0;

 protected:
  friend std::unique_ptr<Env> make_variant(const Env& env, const VariantConfig& variant);
  virtual void apply_variant(const std::string& key, const std::string& value) = 0;
};

// Copy of `env` with modified parameters; `env` itself is untouched.
std::unique_ptr<Env> make_variant(const Env& env, const VariantConfig& variant);

// "mini_door" or "mini_wipe", with default parameters.
std::unique_ptr<Env> make_env(const std::string& name);

std::vector<double> clip_action(std::span<const double> action, const EnvSpec& spec);
// Throws ContractError when any entry is NaN or infinite.
void require_finite_action(std::span<const double> action, const EnvSpec& spec);

}  // namespace laser::envs
