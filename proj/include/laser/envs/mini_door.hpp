#pragma once

#include "laser/envs/arm.hpp"
#include "laser/envs/env.hpp"

namespace laser::envs {

struct MiniDoorParams {
  ArmParams arm{};
  Vec2 hinge{0.75, 0.35};
  double door_width = 0.3;
  // Direction of the closed door, measured from the hinge to the handle.
  double closed_heading = 3.14159265358979323846;
  double door_inertia = 0.05;
  double spring_stiffness = 0.5;  // k
  double damping = 0.3;           // c, the transfer knob
  double target_min = 0.6;
  double target_max = 1.1;
  double success_tolerance = 0.05;
  // The end effector latches onto the handle inside this radius.
  double capture_radius = 0.06;
  double grip_stiffness = 300.0;
  double grip_damping = 15.0;
  double max_torque = 3.0;
  double reach_reward_scale = 2.0;
  double door_reward_scale = 10.0;
  double success_bonus = 5.0;
  double reward_bound = 10.0;
  std::size_t max_episode_steps = 200;
  double dt = 0.01;

  void validate() const;
};

// Torque-controlled arm opening a hinged door against a torsion spring and a
// viscous damper.
//
// State: [q1, q2, qd1, qd2, ee_x, ee_y, ee_vx, ee_vy | door_angle,
//         door_velocity, target_angle, attached]
class MiniDoor final : public Env {
 public:
  explicit MiniDoor(MiniDoorParams params = {});

  const EnvSpec& spec() const override { return spec_; }
  EnvState reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<MiniDoor>(*this); }
  EnvState state() const override;
  std::array<double, 2> end_effector() const override { return arm_.end_effector(); }
  std::size_t steps_taken() const override { return steps_; }

  const MiniDoorParams& params() const { return params_; }
  const TwoLinkArm& arm() const { return arm_; }
  double door_angle() const { return door_angle_; }
  double door_velocity() const { return door_velocity_; }
  double target_angle() const { return target_; }
  bool attached() const { return attached_; }
  Vec2 handle() const;

  // Arm + door kinetic energy, plus spring and grip potential energy.
  double kinetic_energy() const;
  double mechanical_energy() const;

  // Overrides the physical state (tests and analysis).
  void set_physical_state(const Vec2& q, const Vec2& qd, double door_angle, double door_velocity);

 protected:
  void apply_variant(const std::string& key, const std::string& value) override;

 private:
  Vec2 grip_force() const;

  MiniDoorParams params_;
  EnvSpec spec_;
  TwoLinkArm arm_;
  double door_angle_ = 0.0;
  double door_velocity_ = 0.0;
  double target_ = 0.8;
  bool attached_ = false;
  // Handle minus end effector at the moment of capture; the grip spring rests there.
  Vec2 grip_offset_{0.0, 0.0};
  std::size_t steps_ = 0;
};

}  // namespace laser::envs
