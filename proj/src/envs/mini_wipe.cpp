#include "laser/envs/mini_wipe.hpp"

#include <algorithm>
#include <cmath>

#include "laser/error.hpp"

namespace laser::envs {

void MiniWipeParams::validate() const {
  if (!(dt > 0.0 && dt <= 0.05)) throw ConfigError("mini_wipe: dt must lie in (0, 0.05]");
  if (spot_count == 0) throw ConfigError("mini_wipe: need at least one dirt spot");
  if (!(spot_radius > 0.0)) throw ConfigError("mini_wipe: spot radius must be positive");
  const double usable = table_x_max - table_x_min - 2.0 * spot_radius;
  if (!(usable > 0.0)) throw ConfigError("mini_wipe: table too narrow for its spots");
  if (layout == SpotLayout::line && line_spacing * static_cast<double>(spot_count - 1) > usable) {
    throw ConfigError("mini_wipe: line layout does not fit on the table");
  }
  if (!(contact_force_min < contact_force_max)) throw ConfigError("mini_wipe: empty contact force band");
  if (!(0.0 < start_lift_min && start_lift_min <= start_lift_max)) throw ConfigError("mini_wipe: bad start lift range");
}

double MiniWipeParams::workspace_height() const { return arm.base[1] + arm.l1 + arm.l2 - table_height; }

std::vector<DirtSpot> generate_spots(const MiniWipeParams& params, std::mt19937_64& rng) {
  const double lo = params.table_x_min + params.spot_radius;
  const double hi = params.table_x_max - params.spot_radius;
  std::vector<DirtSpot> spots;
  spots.reserve(params.spot_count);
  if (params.layout == SpotLayout::line) {
    const double span = params.line_spacing * static_cast<double>(params.spot_count - 1);
    std::uniform_real_distribution<double> start(lo, hi - span);
    const double x0 = start(rng);
    for (std::size_t i = 0; i < params.spot_count; ++i) {
      spots.push_back({{x0 + params.line_spacing * static_cast<double>(i), params.table_height}, params.spot_radius});
    }
  } else {
    std::uniform_real_distribution<double> x(lo, hi);
    for (std::size_t i = 0; i < params.spot_count; ++i) {
      spots.push_back({{x(rng), params.table_height}, params.spot_radius});
    }
  }
  return spots;
}

MiniWipe::MiniWipe(MiniWipeParams params) : params_(std::move(params)) {
  params_.validate();
  arm_.params = params_.arm;
  spec_.name = "mini_wipe";
  spec_.robot_state_dim = 8;
  spec_.state_dim = 8 + 2 * params_.spot_count;
  spec_.action_dim = 2;
  spec_.action_low = {params_.target_low[0], params_.target_low[1]};
  spec_.action_high = {params_.target_high[0], params_.target_high[1]};
  spec_.max_episode_steps = params_.max_episode_steps;
  spec_.reward_bound = params_.reward_bound;
  spec_.validate();
  spots_ = std::vector<DirtSpot>(params_.spot_count, DirtSpot{{0.0, params_.table_height}, params_.spot_radius});
  wiped_.assign(params_.spot_count, false);
}

double MiniWipe::contact_force() const {
  const Vec2 ee = arm_.end_effector();
  const double penetration = params_.table_height - ee[1];
  if (penetration <= 0.0) return 0.0;
  const double vz = arm_.end_effector_velocity()[1];
  return std::max(0.0, params_.table_stiffness * penetration - params_.table_damping * vz);
}

EnvState MiniWipe::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  spots_ = generate_spots(params_, rng);
  wiped_.assign(params_.spot_count, false);
  // The tool starts hovering just above the table, elbow up.
  std::uniform_real_distribution<double> x(params_.table_x_min, params_.table_x_max);
  std::uniform_real_distribution<double> lift(params_.start_lift_min, params_.start_lift_max);
  const double ex = x(rng) - params_.arm.base[0];
  const double ez = params_.table_height + lift(rng) - params_.arm.base[1];
  const double l1 = params_.arm.l1;
  const double l2 = params_.arm.l2;
  const double c2 = std::clamp((ex * ex + ez * ez - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0);
  const double q2 = std::acos(c2);
  const double q1 = std::atan2(ez, ex) - std::atan2(l2 * std::sin(q2), l1 + l2 * std::cos(q2));
  arm_.q = {q1, q2};
  arm_.qd = {0.0, 0.0};
  normal_force_ = contact_force();
  steps_ = 0;
  return state();
}

StepResult MiniWipe::step(std::span<const double> action) {
  require_finite_action(action, spec_);
  const std::vector<double> target = clip_action(action, spec_);

  Vec2 tau{params_.kp * (target[0] - arm_.q[0]) - params_.kd * arm_.qd[0],
           params_.kp * (target[1] - arm_.q[1]) - params_.kd * arm_.qd[1]};
  const Vec2 table_push = arm_.joint_torque_from_force({0.0, contact_force()});
  tau[0] += table_push[0];
  tau[1] += table_push[1];
  const double command_sq = (target[0] - arm_.q[0]) * (target[0] - arm_.q[0]) +
                            (target[1] - arm_.q[1]) * (target[1] - arm_.q[1]);

  const double x_before = arm_.end_effector()[0];
  arm_.integrate(tau, params_.dt);
  const double x_after = arm_.end_effector()[0];
  normal_force_ = contact_force();
  const bool wiping = normal_force_ >= params_.contact_force_min && normal_force_ <= params_.contact_force_max;

  double reward = -params_.command_penalty * command_sq;
  if (wiping) {
    reward += params_.contact_bonus;
    const double lo = std::min(x_before, x_after);
    const double hi = std::max(x_before, x_after);
    for (std::size_t i = 0; i < spots_.size(); ++i) {
      if (wiped_[i]) continue;
      const double cx = spots_[i].center[0];
      if (hi >= cx - spots_[i].radius && lo <= cx + spots_[i].radius) {
        wiped_[i] = true;
        reward += params_.spot_reward;
      }
    }
  } else if (normal_force_ > params_.contact_force_max) {
    reward -= params_.overpress_penalty;
  }

  StepResult result;
  result.terminated = std::all_of(wiped_.begin(), wiped_.end(), [](bool w) { return w; });
  result.reward = std::clamp(reward, -params_.reward_bound, params_.reward_bound);
  ++steps_;
  result.truncated = !result.terminated && steps_ >= params_.max_episode_steps;
  result.done = result.terminated || result.truncated;
  result.next = state();
  result.info["normal_force"] = normal_force_;
  result.info["wiped"] = static_cast<double>(std::count(wiped_.begin(), wiped_.end(), true));
  result.info["success"] = result.terminated ? 1.0 : 0.0;
  return result;
}

EnvState MiniWipe::state() const {
  const Vec2 ee = arm_.end_effector();
  const Vec2 ee_vel = arm_.end_effector_velocity();
  std::vector<double> s{arm_.q[0], arm_.q[1], arm_.qd[0], arm_.qd[1], ee[0], ee[1], ee_vel[0], ee_vel[1]};
  const std::size_t k = params_.spot_count;
  std::vector<double> xs(k, 0.0);
  std::vector<double> mask(k, 0.0);
  std::size_t slot = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (wiped_[i]) continue;
    xs[slot] = spots_[i].center[0];
    mask[slot] = 1.0;
    ++slot;
  }
  s.insert(s.end(), xs.begin(), xs.end());
  s.insert(s.end(), mask.begin(), mask.end());
  return EnvState{std::move(s)};
}

void MiniWipe::set_physical_state(const Vec2& q, const Vec2& qd) {
  arm_.q = q;
  arm_.qd = qd;
  normal_force_ = contact_force();
}

void MiniWipe::apply_variant(const std::string& key, const std::string& value) {
  if (key == "spot_mode") {
    if (value == "line") {
      params_.layout = SpotLayout::line;
    } else if (value == "circles") {
      params_.layout = SpotLayout::circles;
    } else {
      throw ConfigError("mini_wipe: spot_mode must be 'line' or 'circles', got '" + value + "'");
    }
    params_.validate();
    return;
  }
  throw ConfigError("mini_wipe: unsupported variant key '" + key + "'");
}

}  // namespace laser::envs
