#pragma once

#include <random>
#include <vector>

#include "laser/envs/arm.hpp"
#include "laser/envs/env.hpp"

namespace laser::envs {

enum class SpotLayout { line, circles };

struct DirtSpot {
  Vec2 center;  // (x, table height)
  double radius = 0.0;
};

struct MiniWipeParams {
  ArmParams arm{};
  double table_height = -0.35;
  double table_x_min = 0.3;
  double table_x_max = 0.9;
  std::size_t spot_count = 4;
  double spot_radius = 0.04;
  double line_spacing = 0.1;
  SpotLayout layout = SpotLayout::line;
  // Normal force window in which the eraser counts as wiping.
  double contact_force_min = 0.5;
  double contact_force_max = 25.0;
  double table_stiffness = 500.0;
  double table_damping = 10.0;
  double kp = 40.0;
  double kd = 4.0;
  Vec2 target_low{-2.4, 0.0};
  Vec2 target_high{0.6, 2.8};
  double spot_reward = 1.0;
  double contact_bonus = 0.02;
  double overpress_penalty = 0.02;
  double command_penalty = 0.001;
  double reward_bound = 5.0;
  // Initial tool height above the table.
  double start_lift_min = 0.03;
  double start_lift_max = 0.08;
  std::size_t max_episode_steps = 200;
  double dt = 0.01;

  void validate() const;
  // Vertical extent from the table plane to the top of the arm's reach.
  double workspace_height() const;
};

// Arm in the vertical plane wiping dirt spots on a table. Actions are joint
// position targets tracked by a PD loop; the table pushes back with a
// unilateral spring-damper contact.
//
// State: [q1, q2, qd1, qd2, ee_x, ee_z, ee_vx, ee_vz | x of each unwiped spot
//         packed first then zero padding, followed by a matching 0/1 mask]
class MiniWipe final : public Env {
 public:
  explicit MiniWipe(MiniWipeParams params = {});

  const EnvSpec& spec() const override { return spec_; }
  EnvState reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<MiniWipe>(*this); }
  EnvState state() const override;
  std::array<double, 2> end_effector() const override { return arm_.end_effector(); }
  std::size_t steps_taken() const override { return steps_; }

  const MiniWipeParams& params() const { return params_; }
  const TwoLinkArm& arm() const { return arm_; }
  const std::vector<DirtSpot>& spots() const { return spots_; }
  const std::vector<bool>& wiped() const { return wiped_; }
  double last_normal_force() const { return normal_force_; }

  void set_physical_state(const Vec2& q, const Vec2& qd);

 protected:
  void apply_variant(const std::string& key, const std::string& value) override;

 private:
  double contact_force() const;

  MiniWipeParams params_;
  EnvSpec spec_;
  TwoLinkArm arm_;
  std::vector<DirtSpot> spots_;
  std::vector<bool> wiped_;
  double normal_force_ = 0.0;
  std::size_t steps_ = 0;
};

// Spot layout drawn for a reset seed. The initial tool position is drawn from
// the same generator afterwards.
std::vector<DirtSpot> generate_spots(const MiniWipeParams& params, std::mt19937_64& rng);

}  // namespace laser::envs
