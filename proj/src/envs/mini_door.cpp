#include "laser/envs/mini_door.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "laser/error.hpp"

namespace laser::envs {

namespace {

constexpr double kDoorMinAngle = 0.0;
constexpr double kDoorMaxAngle = 1.6;

double cross(const Vec2& a, const Vec2& b) { return a[0] * b[1] - a[1] * b[0]; }

double distance(const Vec2& a, const Vec2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

}  // namespace

void MiniDoorParams::validate() const {
  if (!(damping > 0.0)) throw ConfigError("mini_door: damping must be positive");
  if (!(spring_stiffness >= 0.0)) throw ConfigError("mini_door: spring stiffness must be non-negative");
  if (!(dt > 0.0 && dt <= 0.05)) throw ConfigError("mini_door: dt must lie in (0, 0.05]");
  if (!(door_inertia > 0.0 && door_width > 0.0)) throw ConfigError("mini_door: door inertia and width must be positive");
  if (!(target_min <= target_max)) throw ConfigError("mini_door: empty target range");
}

MiniDoor::MiniDoor(MiniDoorParams params) : params_(std::move(params)) {
  params_.validate();
  arm_.params = params_.arm;
  spec_.name = "mini_door";
  spec_.state_dim = 12;
  spec_.robot_state_dim = 8;
  spec_.action_dim = 2;
  spec_.action_low = {-params_.max_torque, -params_.max_torque};
  spec_.action_high = {params_.max_torque, params_.max_torque};
  spec_.max_episode_steps = params_.max_episode_steps;
  spec_.reward_bound = params_.reward_bound;
  spec_.validate();
}

Vec2 MiniDoor::handle() const {
  const double heading = params_.closed_heading + door_angle_;
  return {params_.hinge[0] + params_.door_width * std::cos(heading),
          params_.hinge[1] + params_.door_width * std::sin(heading)};
}

Vec2 MiniDoor::grip_force() const {
  if (!attached_) return {0.0, 0.0};
  const Vec2 h = handle();
  const Vec2 ee = arm_.end_effector();
  const Vec2 ee_vel = arm_.end_effector_velocity();
  const double heading = params_.closed_heading + door_angle_;
  const Vec2 handle_vel{-params_.door_width * std::sin(heading) * door_velocity_,
                        params_.door_width * std::cos(heading) * door_velocity_};
  Vec2 f;
  for (int i = 0; i < 2; ++i) {
    const double stretch = h[i] - ee[i] - grip_offset_[i];
    f[i] = params_.grip_stiffness * stretch + params_.grip_damping * (handle_vel[i] - ee_vel[i]);
  }
  return f;
}

EnvState MiniDoor::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> shoulder(-1.0, -0.2);
  std::uniform_real_distribution<double> elbow(0.5, 1.5);
  std::uniform_real_distribution<double> target(params_.target_min, params_.target_max);
  arm_.q = {shoulder(rng), elbow(rng)};
  arm_.qd = {0.0, 0.0};
  target_ = target(rng);
  door_angle_ = 0.0;
  door_velocity_ = 0.0;
  attached_ = false;
  grip_offset_ = {0.0, 0.0};
  steps_ = 0;
  return state();
}

StepResult MiniDoor::step(std::span<const double> action) {
  require_finite_action(action, spec_);
  const std::vector<double> a = clip_action(action, spec_);

  const bool was_attached = attached_;
  const double reach_before = distance(arm_.end_effector(), handle());
  const double error_before = std::abs(door_angle_ - target_);

  // Grip force acts on the end effector; its reaction acts on the handle.
  const Vec2 force = grip_force();
  const Vec2 grip_torque = arm_.joint_torque_from_force(force);
  const Vec2 lever{handle()[0] - params_.hinge[0], handle()[1] - params_.hinge[1]};
  const double door_torque = cross(lever, {-force[0], -force[1]}) - params_.spring_stiffness * door_angle_;

  arm_.integrate({a[0] + grip_torque[0], a[1] + grip_torque[1]}, params_.dt);

  const double dt = params_.dt;
  door_velocity_ = (params_.door_inertia * door_velocity_ + dt * door_torque) /
                   (params_.door_inertia + dt * params_.damping);
  door_angle_ += dt * door_velocity_;
  if (door_angle_ < kDoorMinAngle || door_angle_ > kDoorMaxAngle) {
    door_angle_ = std::clamp(door_angle_, kDoorMinAngle, kDoorMaxAngle);
    door_velocity_ = 0.0;
  }

  if (!attached_ && params_.capture_radius > 0.0) {
    const Vec2 ee = arm_.end_effector();
    const Vec2 h = handle();
    if (distance(ee, h) <= params_.capture_radius) {
      attached_ = true;
      grip_offset_ = {h[0] - ee[0], h[1] - ee[1]};
    }
  }

  double reward = 0.0;
  if (!was_attached) {
    reward += params_.reach_reward_scale * (reach_before - distance(arm_.end_effector(), handle()));
  }
  const double error_after = std::abs(door_angle_ - target_);
  if (attached_) reward += params_.door_reward_scale * (error_before - error_after);

  StepResult result;
  result.terminated = attached_ && error_after < params_.success_tolerance;
  if (result.terminated) reward += params_.success_bonus;
  result.reward = std::clamp(reward, -params_.reward_bound, params_.reward_bound);
  ++steps_;
  result.truncated = !result.terminated && steps_ >= params_.max_episode_steps;
  result.done = result.terminated || result.truncated;
  result.next = state();
  result.info["door_angle"] = door_angle_;
  result.info["attached"] = attached_ ? 1.0 : 0.0;
  result.info["success"] = result.terminated ? 1.0 : 0.0;
  return result;
}

EnvState MiniDoor::state() const {
  const Vec2 ee = arm_.end_effector();
  const Vec2 ee_vel = arm_.end_effector_velocity();
  return EnvState{{arm_.q[0], arm_.q[1], arm_.qd[0], arm_.qd[1], ee[0], ee[1], ee_vel[0], ee_vel[1], door_angle_,
                   door_velocity_, target_, attached_ ? 1.0 : 0.0}};
}

double MiniDoor::kinetic_energy() const {
  return arm_.kinetic_energy() + 0.5 * params_.door_inertia * door_velocity_ * door_velocity_;
}

double MiniDoor::mechanical_energy() const {
  double energy = kinetic_energy() + 0.5 * params_.spring_stiffness * door_angle_ * door_angle_;
  if (attached_) {
    const Vec2 h = handle();
    const Vec2 ee = arm_.end_effector();
    for (int i = 0; i < 2; ++i) {
      const double stretch = h[i] - ee[i] - grip_offset_[i];
      energy += 0.5 * params_.grip_stiffness * stretch * stretch;
    }
  }
  return energy;
}

void MiniDoor::set_physical_state(const Vec2& q, const Vec2& qd, double door_angle, double door_velocity) {
  arm_.q = q;
  arm_.qd = qd;
  door_angle_ = door_angle;
  door_velocity_ = door_velocity;
}

void MiniDoor::apply_variant(const std::string& key, const std::string& value) {
  if (key == "damping_scale") {
    double scale = 0.0;
    try {
      scale = std::stod(value);
    } catch (const std::exception&) {
      throw ConfigError("mini_door: damping_scale must be a number, got '" + value + "'");
    }
    if (!(scale > 0.0)) throw ConfigError("mini_door: damping_scale must be positive");
    params_.damping *= scale;
    params_.validate();
    return;
  }
  throw ConfigError("mini_door: unsupported variant key '" + key + "'");
}

}  // namespace laser::envs
