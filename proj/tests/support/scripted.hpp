#pragma once

// Hand-written controllers used to drive the environments into interesting
// regimes (grasped door, table contact) in tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "laser/envs/mini_door.hpp"
#include "laser/envs/mini_wipe.hpp"

namespace laser::testing {

// Cartesian PD to the handle, then a constant tangential push.
inline std::vector<double> door_push_torque(const envs::MiniDoor& env, double push) {
  const auto ee = env.end_effector();
  const auto h = env.handle();
  const auto v = env.arm().end_effector_velocity();
  envs::Vec2 force;
  if (!env.attached()) {
    force = {30.0 * (h[0] - ee[0]) - 4.0 * v[0], 30.0 * (h[1] - ee[1]) - 4.0 * v[1]};
  } else {
    const double phi = env.params().closed_heading + env.door_angle();
    force = {-std::sin(phi) * push, std::cos(phi) * push};
  }
  const auto tau = env.arm().joint_torque_from_force(force);
  return {tau[0], tau[1]};
}

// Same approach phase, then a door-angle servo toward the target.
inline std::vector<double> door_expert_torque(const envs::MiniDoor& env) {
  if (!env.attached()) return door_push_torque(env, 0.0);
  const double err = env.target_angle() - env.door_angle();
  const double push = std::clamp(40.0 * err - 4.0 * env.door_velocity(), -10.0, 10.0);
  return door_push_torque(env, push);
}

// Joint targets sweeping the end effector across the table at wiping depth.
inline std::vector<double> wipe_sweep_target(std::size_t t, std::size_t horizon) {
  const double f = static_cast<double>(t) / static_cast<double>(horizon);
  return {-1.9 + 1.2 * f, 2.2 - 1.5 * f};
}

}  // namespace laser::testing
