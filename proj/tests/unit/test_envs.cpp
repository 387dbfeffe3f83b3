#include <cmath>
#include <random>

#include "doctest.h"
#include "laser/envs/env.hpp"
#include "laser/envs/mini_door.hpp"
#include "laser/envs/mini_wipe.hpp"
#include "laser/error.hpp"
#include "../support/scripted.hpp"

using namespace laser;
using namespace laser::envs;

namespace {

std::vector<double> random_action(const EnvSpec& spec, std::mt19937_64& rng, double overshoot = 0.0) {
  std::vector<double> a(spec.action_dim);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double span = spec.action_high[i] - spec.action_low[i];
    std::uniform_real_distribution<double> u(spec.action_low[i] - overshoot * span,
                                             spec.action_high[i] + overshoot * span);
    a[i] = u(rng);
  }
  return a;
}

}  // namespace

TEST_CASE("specs follow the state layout contract") {
  for (const char* name : {"mini_door", "mini_wipe"}) {
    auto env = make_env(name);
    const EnvSpec& spec = env->spec();
    CHECK(spec.robot_state_dim == 8);
    CHECK(spec.robot_state_dim <= spec.state_dim);
    CHECK(env->reset(0).full.size() == spec.state_dim);
  }
  CHECK(make_env("mini_door")->spec().state_dim == 12);
  CHECK_THROWS_AS(make_env("cartpole"), ConfigError);
}

TEST_CASE("reset is deterministic per seed") {
  for (const char* name : {"mini_door", "mini_wipe"}) {
    auto env = make_env(name);
    const EnvState a = env->reset(17);
    const EnvState b = env->reset(17);
    CHECK(a == b);
    CHECK_FALSE(env->reset(18) == a);
    CHECK(env->steps_taken() == 0);
  }
}

TEST_CASE("line layout places spot centers on one line") {
  MiniWipe env;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    env.reset(seed);
    const auto& spots = env.spots();
    REQUIRE(spots.size() >= 3);
    const auto& c0 = spots[0].center;
    const auto& c1 = spots[1].center;
    for (const auto& s : spots) {
      const double cross = (c1[0] - c0[0]) * (s.center[1] - c0[1]) - (c1[1] - c0[1]) * (s.center[0] - c0[0]);
      CHECK(std::abs(cross) < 1e-9);
    }
  }
}

TEST_CASE("circle layout replays the seeded uniform generator") {
  MiniWipeParams params;
  params.layout = SpotLayout::circles;
  MiniWipe env(params);
  for (std::uint64_t seed : {3ULL, 99ULL, 123456789ULL}) {
    env.reset(seed);
    // Independent replay: one uniform draw per spot on the usable table span.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> x(params.table_x_min + params.spot_radius,
                                             params.table_x_max - params.spot_radius);
    for (const auto& spot : env.spots()) {
      CHECK(spot.center[0] == x(rng));
      CHECK(spot.center[1] == params.table_height);
      CHECK(spot.center[0] >= params.table_x_min);
      CHECK(spot.center[0] <= params.table_x_max);
    }
  }
}

TEST_CASE("door at rest with zero torque stays put") {
  MiniDoor env;
  const EnvState before = env.reset(5);
  const std::vector<double> zero{0.0, 0.0};
  StepResult r = env.step(zero);
  for (std::size_t i = 0; i < before.full.size(); ++i) CHECK(std::abs(r.next.full[i] - before.full[i]) < 1e-12);
  CHECK(r.reward == 0.0);
}

TEST_CASE("five-fold damping opens the door less under the same torques") {
  MiniDoor base;
  auto variant = make_variant(base, {{"damping_scale", "5"}});
  base.reset(11);
  variant->reset(11);
  std::vector<std::vector<double>> torques;
  for (int t = 0; t < 150; ++t) {
    torques.push_back(laser::testing::door_push_torque(base, 4.0));
    base.step(torques.back());
  }
  for (const auto& tau : torques) variant->step(tau);
  const auto& damped = static_cast<const MiniDoor&>(*variant);
  CHECK(base.door_angle() > 0.1);
  CHECK(damped.door_angle() < base.door_angle());
}

TEST_CASE("scripted door controller succeeds on base and damped doors") {
  MiniDoor base;
  auto variant = make_variant(base, {{"damping_scale", "5"}});
  for (Env* env : {static_cast<Env*>(&base), variant.get()}) {
    auto& door = static_cast<MiniDoor&>(*env);
    door.reset(1);
    bool success = false;
    for (std::size_t t = 0; t < door.spec().max_episode_steps && !success; ++t) {
      success = door.step(laser::testing::door_expert_torque(door)).terminated;
    }
    CHECK(success);
  }
}

TEST_CASE("crossing a spot while pressing on the table wipes it") {
  MiniWipe env;
  env.reset(3);
  const std::size_t horizon = 200;
  int wipes = 0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const double x_before = env.end_effector()[0];
    const auto before = env.wiped();
    StepResult r = env.step(laser::testing::wipe_sweep_target(t, horizon));
    for (std::size_t i = 0; i < before.size(); ++i) {
      if (!before[i] && env.wiped()[i]) {
        ++wipes;
        CHECK(r.reward > 0.0);
        const double f = env.last_normal_force();
        CHECK(f >= env.params().contact_force_min);
        CHECK(f <= env.params().contact_force_max);
        const double cx = env.spots()[i].center[0];
        const double lo = std::min(x_before, env.end_effector()[0]);
        const double hi = std::max(x_before, env.end_effector()[0]);
        CHECK(hi >= cx - env.spots()[i].radius);
        CHECK(lo <= cx + env.spots()[i].radius);
      }
    }
    if (r.done) {
      CHECK(r.terminated);
      break;
    }
  }
  CHECK(wipes == static_cast<int>(env.params().spot_count));
}

TEST_CASE("hovering above the table never wipes") {
  MiniWipe env;
  env.reset(4);
  for (int t = 0; t < 100; ++t) {
    StepResult r = env.step(std::vector<double>{-0.6, 1.2});
    CHECK(r.info.at("wiped") == 0.0);
  }
}

TEST_CASE("robot_state is the prefix and partitions the state") {
  EnvState s{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};
  const auto r = robot_state(s, 8);
  CHECK(r == std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7});
  auto joined = r;
  const auto nr = nonrobot_state(s, 8);
  joined.insert(joined.end(), nr.begin(), nr.end());
  CHECK(joined == s.full);

  EnvState changed = s;
  for (std::size_t i = 8; i < changed.full.size(); ++i) changed.full[i] = -42.0;
  CHECK(robot_state(changed, 8) == r);
  CHECK_THROWS_AS(robot_state(s, 13), ContractError);
}

TEST_CASE("wiping a spot changes only the non-robot part of the layout") {
  MiniWipe env;
  env.reset(3);
  StepResult r;
  for (std::size_t t = 0; t < 200; ++t) {
    r = env.step(laser::testing::wipe_sweep_target(t, 200));
    if (r.info.at("wiped") > 0.0) break;
  }
  const auto s = r.next.full;
  const std::size_t k = env.params().spot_count;
  // Unwiped spots are packed first, padding follows, the mask mirrors it.
  CHECK(s[8 + k - 1] == 0.0);
  CHECK(s[8 + 2 * k - 1] == 0.0);
  CHECK(s[8 + k] == 1.0);
}

TEST_CASE("make_variant edits a copy") {
  MiniDoor base;
  auto damped = make_variant(base, {{"damping_scale", "5"}});
  CHECK(static_cast<MiniDoor&>(*damped).params().damping == doctest::Approx(5.0 * base.params().damping));
  CHECK(base.params().damping == doctest::Approx(MiniDoorParams{}.damping));

  MiniWipe wipe;
  auto circles = make_variant(wipe, {{"spot_mode", "circles"}});
  CHECK(static_cast<MiniWipe&>(*circles).params().layout == SpotLayout::circles);
  CHECK(wipe.params().layout == SpotLayout::line);

  CHECK_THROWS_AS(make_variant(base, {{"gravity", "1"}}), ConfigError);
  CHECK_THROWS_AS(make_variant(base, {{"spot_mode", "circles"}}), ConfigError);
  CHECK_THROWS_AS(make_variant(wipe, {{"spot_mode", "zigzag"}}), ConfigError);
  CHECK_THROWS_AS(make_variant(base, {{"damping_scale", "-1"}}), ConfigError);
}

TEST_CASE("identity damping variant reproduces trajectories exactly") {
  MiniDoor base;
  auto same = make_variant(base, {{"damping_scale", "1"}});
  base.reset(8);
  same->reset(8);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    const auto a = random_action(base.spec(), rng);
    CHECK(base.step(a).next == same->step(a).next);
  }
}

TEST_CASE("step is bit-exact deterministic, bounded, and clips actions") {
  for (const char* name : {"mini_door", "mini_wipe"}) {
    auto one = make_env(name);
    auto two = make_env(name);
    auto three = make_env(name);
    one->reset(21);
    two->reset(21);
    three->reset(21);
    std::mt19937_64 rng(21);
    double episode_return = 0.0;
    for (std::size_t t = 0; t < one->spec().max_episode_steps; ++t) {
      const auto wild = random_action(one->spec(), rng, 0.5);
      const auto clipped = clip_action(wild, one->spec());
      const StepResult a = one->step(wild);
      const StepResult b = two->step(wild);
      const StepResult c = three->step(clipped);
      CHECK(a.next == b.next);
      CHECK(a.next == c.next);
      CHECK(a.reward == c.reward);
      CHECK(std::abs(a.reward) <= one->spec().reward_bound);
      episode_return += a.reward;
      if (a.done) break;
    }
    CHECK(std::isfinite(episode_return));
  }
}

TEST_CASE("episodes truncate at the step limit") {
  MiniDoor env;
  env.reset(2);
  StepResult r;
  for (std::size_t t = 0; t < env.spec().max_episode_steps; ++t) r = env.step(std::vector<double>{0.0, 0.0});
  CHECK(r.done);
  CHECK(r.truncated);
  CHECK_FALSE(r.terminated);
}

TEST_CASE("non-finite or mis-sized actions are contract errors") {
  MiniDoor env;
  env.reset(0);
  CHECK_THROWS_AS(env.step(std::vector<double>{std::nan(""), 0.0}), ContractError);
  CHECK_THROWS_AS(env.step(std::vector<double>{0.0}), ContractError);
}

TEST_CASE("wiped spots stay wiped") {
  MiniWipe env;
  std::mt19937_64 rng(30);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    env.reset(seed);
    auto previous = env.wiped();
    for (std::size_t t = 0; t < env.spec().max_episode_steps; ++t) {
      // Mix scripted sweeps with noise so contact actually happens.
      auto a = laser::testing::wipe_sweep_target(t, env.spec().max_episode_steps);
      std::normal_distribution<double> noise(0.0, 0.2);
      for (double& v : a) v += noise(rng);
      const bool done = env.step(a).done;
      for (std::size_t i = 0; i < previous.size(); ++i) CHECK((!previous[i] || env.wiped()[i]));
      previous = env.wiped();
      if (done) break;
    }
  }
}

TEST_CASE("kinetic energy never grows without torque or spring") {
  MiniDoorParams params;
  params.spring_stiffness = 0.0;
  params.capture_radius = 0.0;
  MiniDoor env(params);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> speed(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    env.reset(static_cast<std::uint64_t>(trial));
    env.set_physical_state(env.arm().q, {speed(rng), speed(rng)}, 0.4, speed(rng));
    double energy = env.kinetic_energy();
    for (int t = 0; t < 200; ++t) {
      env.step(std::vector<double>{0.0, 0.0});
      const double next = env.kinetic_energy();
      CHECK(next <= energy);
      energy = next;
    }
  }
}
