#pragma once

// One-dimensional bandit-like env with reward -(a - target)^2, used where the
// optimum must be known in closed form.

#include <algorithm>
#include <memory>
#include <vector>

#include "laser/envs/env.hpp"

namespace laser::testing {

class QuadraticToy final : public envs::Env {
 public:
  QuadraticToy(double low, double high, std::size_t horizon, double target = 0.0)
      : target_(target), log_(std::make_shared<std::vector<double>>()) {
    spec_.name = "quadratic_toy";
    spec_.state_dim = 1;
    spec_.robot_state_dim = 1;
    spec_.action_dim = 1;
    spec_.action_low = {low};
    spec_.action_high = {high};
    spec_.max_episode_steps = horizon;
    spec_.reward_bound = std::max((low - target) * (low - target), (high - target) * (high - target));
  }

  const envs::EnvSpec& spec() const override { return spec_; }
  envs::EnvState reset(std::uint64_t) override {
    steps_ = 0;
    return state();
  }
  envs::StepResult step(std::span<const double> action) override {
    envs::require_finite_action(action, spec_);
    const double a = envs::clip_action(action, spec_)[0];
    log_->push_back(a);
    ++steps_;
    envs::StepResult r;
    r.reward = -(a - target_) * (a - target_);
    r.truncated = steps_ >= spec_.max_episode_steps;
    r.done = r.truncated;
    r.next = state();
    return r;
  }
  std::unique_ptr<envs::Env> clone() const override { return std::make_unique<QuadraticToy>(*this); }
  envs::EnvState state() const override { return {{1.0}}; }
  std::array<double, 2> end_effector() const override { return {0.0, 0.0}; }
  std::size_t steps_taken() const override { return steps_; }

  // Every clipped action stepped by this env or any of its clones.
  const std::vector<double>& action_log() const { return *log_; }

 protected:
  void apply_variant(const std::string&, const std::string&) override {}

 private:
  envs::EnvSpec spec_;
  double target_;
  std::size_t steps_ = 0;
  std::shared_ptr<std::vector<double>> log_;
};

}  // namespace laser::testing
