#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "laser/envs/mini_door.hpp"
#include "laser/envs/mini_wipe.hpp"
#include "laser/error.hpp"
#include "laser/rl/replay.hpp"
#include "laser/rl/sac.hpp"
#include "laser/rl/train.hpp"
#include "../support/toy_env.hpp"

using namespace laser;
using namespace laser::rl;
using diff::Tensor;

namespace {

SacConfig small_sac() {
  SacConfig c;
  c.hidden = {16, 16};
  c.batch_size = 32;
  c.buffer_capacity = 10'000;
  return c;
}

Tensor random_states(const envs::EnvSpec& spec, std::size_t rows, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t({rows, spec.state_dim});
  for (auto& v : t.data()) v = n(rng);
  return t;
}

void perturb(diff::Mlp& net, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto* p : net.parameters()) {
    for (auto& v : p->value.data()) v += n(rng);
  }
}

// A buffer of random in-bounds transitions.
ReplayBuffer random_buffer(const envs::EnvSpec& spec, std::size_t count, std::mt19937_64& rng) {
  ReplayBuffer buf(count, spec.state_dim, spec.action_dim);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> s(spec.state_dim);
    std::vector<double> s2(spec.state_dim);
    std::vector<double> a(spec.action_dim);
    for (auto& v : s) v = n(rng);
    for (auto& v : s2) v = n(rng);
    for (std::size_t c = 0; c < a.size(); ++c) {
      a[c] = std::uniform_real_distribution<double>(spec.action_low[c], spec.action_high[c])(rng);
    }
    buf.push(s, a, n(rng), s2, i % 7 == 0);
  }
  return buf;
}

std::vector<Tensor> snapshot(const std::vector<diff::Parameter*>& params) {
  std::vector<Tensor> out;
  for (const auto* p : params) out.push_back(p->value);
  return out;
}

std::shared_ptr<latent::LaserModel> random_laser(const envs::EnvSpec& spec, std::uint64_t seed) {
  latent::LaserConfig cfg;
  cfg.hidden = {16};
  auto model = std::make_shared<latent::LaserModel>(cfg, spec, seed);
  std::mt19937_64 rng(seed + 1);
  perturb(model->decoder(), rng, 0.2);
  return model;
}

}  // namespace

TEST_CASE("replay buffer is a FIFO ring") {
  ReplayBuffer buf(5, 1, 1);
  for (int i = 0; i < 8; ++i) {
    const double v = i;
    buf.push(std::vector<double>{v}, std::vector<double>{v}, v, std::vector<double>{v + 0.5}, false);
  }
  CHECK(buf.size() == 5);
  CHECK(buf.capacity() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    const envs::Transition t = buf.at(k);
    CHECK(t.r == static_cast<double>(k + 3));
    CHECK(t.s.full[0] == static_cast<double>(k + 3));
    CHECK(t.s_next.full[0] == static_cast<double>(k + 3) + 0.5);
  }
  CHECK_THROWS_AS(buf.at(5), ContractError);
  CHECK_THROWS_AS(buf.push(std::vector<double>{1.0, 2.0}, std::vector<double>{0.0}, 0.0, std::vector<double>{0.0}, false),
                  DimensionError);
}

TEST_CASE("replay sampling draws distinct transitions") {
  ReplayBuffer buf(100, 2, 1);
  for (int i = 0; i < 60; ++i) {
    const double v = i;
    buf.push(std::vector<double>{v, -v}, std::vector<double>{0.1 * v}, v, std::vector<double>{v + 1, 0.0}, i % 2);
  }
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const ReplayBatch b = buf.sample(60, rng);
    std::set<double> seen;
    for (std::size_t r = 0; r < 60; ++r) {
      seen.insert(b.r(r, 0));
      const double v = b.r(r, 0);
      CHECK(b.s(r, 0) == v);
      CHECK(b.s(r, 1) == -v);
      CHECK(b.a(r, 0) == 0.1 * v);
      CHECK(b.s_next(r, 0) == v + 1);
      CHECK(b.done(r, 0) == static_cast<double>(static_cast<int>(v) % 2));
    }
    CHECK(seen.size() == 60);
  }
  CHECK_THROWS_AS(buf.sample(61, rng), ContractError);

  const std::vector<std::size_t> ages{0, 59, 7};
  const ReplayBatch g = buf.gather(ages);
  CHECK(g.r(0, 0) == 0.0);
  CHECK(g.r(1, 0) == 59.0);
  CHECK(g.r(2, 0) == 7.0);

  const latent::LaserBatch lb = to_laser_batch(g, 1);
  CHECK(lb.s_r.shape() == diff::Shape{3, 1});
  CHECK(lb.s_r(1, 0) == 59.0);
  CHECK(lb.s_r_next(1, 0) == 60.0);
  CHECK(lb.a(2, 0) == 0.1 * 7.0);
}

TEST_CASE("SAC config validation") {
  SacConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SacConfig{};
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SacConfig{};
  c.tau = 1.0;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("soft target updates") {
  const auto spec = envs::MiniDoor().spec();
  SacAgent agent(spec, small_sac(), 3);
  std::mt19937_64 rng(4);
  perturb(agent.q1(), rng, 0.5);
  perturb(agent.q2(), rng, 0.5);

  SUBCASE("linear blend, element-wise exact") {
    const double tau = 0.3;
    const auto before1 = snapshot(const_cast<diff::Mlp&>(agent.q1_target()).parameters());
    agent.soft_update_targets(tau);
    const auto after = agent.q1_target().parameters();
    const auto online = agent.q1().parameters();
    for (std::size_t k = 0; k < after.size(); ++k) {
      for (std::size_t i = 0; i < after[k]->value.size(); ++i) {
        CHECK(after[k]->value[i] == tau * online[k]->value[i] + (1.0 - tau) * before1[k][i]);
      }
    }
  }
  SUBCASE("tau = 1 copies the online nets") {
    agent.soft_update_targets(1.0);
    const auto t1 = agent.q1_target().parameters();
    const auto o1 = agent.q1().parameters();
    const auto t2 = agent.q2_target().parameters();
    const auto o2 = agent.q2().parameters();
    for (std::size_t k = 0; k < t1.size(); ++k) {
      CHECK(t1[k]->value == o1[k]->value);
      CHECK(t2[k]->value == o2[k]->value);
    }
  }
  CHECK(agent.q1_target().same_architecture(agent.q1()));
}

TEST_CASE("critic targets") {
  const auto spec = envs::MiniWipe().spec();
  std::mt19937_64 rng(5);
  ReplayBuffer buf = random_buffer(spec, 64, rng);
  const ReplayBatch batch = buf.sample(32, rng);

  SacConfig cfg = small_sac();
  cfg.gamma = 0.0;
  SacAgent agent(spec, cfg, 6);
  perturb(agent.q1(), rng, 0.5);
  agent.soft_update_targets(1.0);
  const Tensor y = agent.critic_targets(batch, rng);
  for (std::size_t r = 0; r < 32; ++r) CHECK(y(r, 0) == batch.r(r, 0));

  // Terminal transitions never bootstrap.
  SacAgent discounted(spec, small_sac(), 7);
  perturb(discounted.q1(), rng, 0.5);
  perturb(discounted.q2(), rng, 0.5);
  discounted.soft_update_targets(1.0);
  const Tensor y2 = discounted.critic_targets(batch, rng);
  bool bootstrapped = false;
  for (std::size_t r = 0; r < 32; ++r) {
    if (batch.done(r, 0) == 1.0) {
      CHECK(y2(r, 0) == batch.r(r, 0));
    } else {
      bootstrapped = bootstrapped || y2(r, 0) != batch.r(r, 0);
    }
  }
  CHECK(bootstrapped);
}

TEST_CASE("action selection") {
  std::mt19937_64 rng(8);
  SUBCASE("original mode stays in bounds and eval mode is deterministic") {
    const auto spec = envs::MiniWipe().spec();
    SacAgent agent(spec, small_sac(), 9);
    perturb(agent.policy(), rng, 3.0);
    const Tensor states = random_states(spec, 1000, rng, 5.0);
    for (bool det : {true, false}) {
      const PolicyAction a = agent.act(states, det, rng);
      bool inside = true;
      for (std::size_t r = 0; r < 1000; ++r) {
        for (std::size_t c = 0; c < 2; ++c) {
          inside = inside && a.env(r, c) >= spec.action_low[c] && a.env(r, c) <= spec.action_high[c];
          inside = inside && std::abs(a.policy(r, c)) <= agent.policy_bound(c);
        }
      }
      CHECK(inside);
    }
    std::mt19937_64 r1(1);
    std::mt19937_64 r2(2);
    CHECK(agent.act(states, true, r1).env == agent.act(states, true, r2).env);
    envs::MiniWipe env;
    const envs::EnvState s = env.reset(4);
    CHECK(agent.select_action(s, true, r1) == agent.select_action(s, true, r2));
    SacAgent fresh(spec, small_sac(), 9);
    CHECK(fresh.select_action(s, false, r1) != fresh.select_action(s, false, r2));
  }
  SUBCASE("untrained original-mode policy acts at the action midpoint") {
    const auto spec = envs::MiniWipe().spec();
    SacAgent agent(spec, small_sac(), 10);
    const PolicyAction a = agent.act(random_states(spec, 3, rng), true, rng);
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(a.env(r, 0) == doctest::Approx(-0.9));
      CHECK(a.env(r, 1) == doctest::Approx(1.4));
    }
  }
  SUBCASE("latent mode composes the policy with the decoder") {
    const auto spec = envs::MiniDoor().spec();
    auto model = random_laser(spec, 11);
    SacAgent agent(spec, small_sac(), model, false, 12);
    CHECK(agent.policy_dim() == 4);
    CHECK(agent.policy_bound(0) == 3.0);
    perturb(agent.policy(), rng, 1.0);
    const Tensor states = random_states(spec, 50, rng);
    const PolicyAction a = agent.act(states, false, rng);
    Tensor s_r({50, 8});
    for (std::size_t r = 0; r < 50; ++r) {
      for (std::size_t c = 0; c < 8; ++c) s_r(r, c) = states(r, c);
    }
    CHECK(a.env == latent::decode(*model, s_r, a.policy));
  }
  SUBCASE("mismatched or non-finite inputs") {
    const auto spec = envs::MiniDoor().spec();
    SacAgent agent(spec, small_sac(), 13);
    CHECK_THROWS_AS(agent.act(Tensor({2, 5}), true, rng), DimensionError);
    agent.policy().weight(0).value[0] = std::nan("");
    CHECK_THROWS_AS(agent.act(random_states(spec, 2, rng), true, rng), AgentError);
    auto wipe_model = random_laser(envs::MiniWipe().spec(), 1);
    CHECK_THROWS_AS(SacAgent(spec, small_sac(), wipe_model, false, 0), DimensionError);
  }
}

TEST_CASE("decoder gradient gate in latent mode") {
  const auto spec = envs::MiniDoor().spec();
  std::mt19937_64 rng(14);
  ReplayBuffer buf = random_buffer(spec, 200, rng);

  SUBCASE("frozen decoder is untouched by 100 updates") {
    auto model = random_laser(spec, 15);
    const auto before = snapshot(model->parameters());
    SacAgent agent(spec, small_sac(), model, false, 16);
    for (int i = 0; i < 100; ++i) agent.update(buf.sample(32, rng), rng);
    const auto after = model->parameters();
    for (std::size_t k = 0; k < after.size(); ++k) CHECK(after[k]->value == before[k]);
    CHECK(agent.updates() == 100);
  }
  SUBCASE("trainable decoder moves after one update, encoder and dynamics do not") {
    auto model = random_laser(spec, 17);
    const auto dec_before = snapshot(model->decoder().parameters());
    const auto enc_before = snapshot(model->encoder().parameters());
    const auto dyn_before = snapshot(model->dynamics().parameters());
    SacAgent agent(spec, small_sac(), model, true, 18);
    perturb(agent.q1(), rng, 0.5);
    perturb(agent.q2(), rng, 0.5);
    const SacLosses l = agent.update(buf.sample(32, rng), rng);
    CHECK(l.actor != 0.0);
    bool moved = false;
    const auto dec = model->decoder().parameters();
    for (std::size_t k = 0; k < dec.size(); ++k) moved = moved || !(dec[k]->value == dec_before[k]);
    CHECK(moved);
    const auto enc = model->encoder().parameters();
    const auto dyn = model->dynamics().parameters();
    for (std::size_t k = 0; k < enc.size(); ++k) CHECK(enc[k]->value == enc_before[k]);
    for (std::size_t k = 0; k < dyn.size(); ++k) CHECK(dyn[k]->value == dyn_before[k]);
  }
}

TEST_CASE("updates from a buffer that is too small are skipped") {
  const auto spec = envs::MiniDoor().spec();
  std::mt19937_64 rng(19);
  SacAgent agent(spec, small_sac(), 20);
  ReplayBuffer buf = random_buffer(spec, 31, rng);
  CHECK_FALSE(agent.update(buf, rng).has_value());
  CHECK(agent.updates() == 0);
  ReplayBuffer full = random_buffer(spec, 32, rng);
  CHECK(agent.update(full, rng).has_value());
  CHECK(agent.updates() == 1);
}

TEST_CASE("agent checkpoint round trip") {
  const auto spec = envs::MiniDoor().spec();
  std::mt19937_64 rng(21);
  auto model = random_laser(spec, 22);
  SacAgent agent(spec, small_sac(), model, true, 23);
  ReplayBuffer buf = random_buffer(spec, 100, rng);
  for (int i = 0; i < 5; ++i) agent.update(buf.sample(32, rng), rng);
  const auto path = std::filesystem::temp_directory_path() / "laser_test_agent.ckpt";
  agent.save(path.string());

  SacAgent other(spec, small_sac(), random_laser(spec, 99), true, 24);
  other.load(path.string());
  std::filesystem::remove(path);
  const Tensor states = random_states(spec, 10, rng);
  CHECK(other.act(states, true, rng).env == agent.act(states, true, rng).env);
  CHECK(other.alpha() == agent.alpha());
  const auto a = agent.q2_target().parameters();
  const auto b = other.q2_target().parameters();
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k]->value == b[k]->value);
}

TEST_CASE("train_policy bookkeeping") {
  testing::QuadraticToy toy(-1.0, 1.0, 10);
  TrainPolicyOptions opt;
  opt.pool_size = 4;
  opt.eval_every = 200;
  opt.eval_episodes = 2;

  SUBCASE("zero steps is a no-op") {
    SacAgent agent(toy.spec(), small_sac(), 0);
    opt.total_steps = 0;
    const RunRecord r = train_policy(agent, toy, opt, 1);
    CHECK(r.episodes.empty());
    CHECK(r.evals.empty());
    CHECK(r.updates.empty());
    CHECK(agent.updates() == 0);
  }
  SUBCASE("episodes, evaluations and updates") {
    SacAgent agent(toy.spec(), small_sac(), 0);
    opt.total_steps = 1000;
    opt.warmup_steps = 100;
    const RunRecord r = train_policy(agent, toy, opt, 1);
    CHECK(r.episodes.size() == 100);
    for (std::size_t i = 1; i < r.episodes.size(); ++i) CHECK(r.episodes[i].env_steps > r.episodes[i - 1].env_steps);
    for (const auto& e : r.episodes) CHECK(e.episode_len == 10);
    REQUIRE(r.evals.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(r.evals[i].env_steps == 200 * i);
    // One update per pool iteration from the iteration that completes warmup.
    CHECK(r.policy_updates == (1000 - 100) / 4 + 1);
    CHECK(r.updates.size() == r.policy_updates);
    CHECK(r.laser_updates == 0);
  }
  SUBCASE("runs are deterministic per seed") {
    opt.total_steps = 600;
    opt.warmup_steps = 100;
    SacAgent a(toy.spec(), small_sac(), 5);
    SacAgent b(toy.spec(), small_sac(), 5);
    const RunRecord ra = train_policy(a, toy, opt, 9);
    const RunRecord rb = train_policy(b, toy, opt, 9);
    REQUIRE(ra.updates.size() == rb.updates.size());
    for (std::size_t i = 0; i < ra.updates.size(); ++i) {
      CHECK(ra.updates[i].sac.q1 == rb.updates[i].sac.q1);
      CHECK(ra.updates[i].sac.actor == rb.updates[i].sac.actor);
    }
    for (std::size_t i = 0; i < ra.evals.size(); ++i) CHECK(ra.evals[i].mean_return == rb.evals[i].mean_return);
  }
  SUBCASE("early stop from the eval hook") {
    SacAgent agent(toy.spec(), small_sac(), 0);
    opt.total_steps = 1000;
    opt.on_eval = [](const EvalRecord& e) { return e.env_steps < 400; };
    const RunRecord r = train_policy(agent, toy, opt, 1);
    CHECK(r.evals.back().env_steps == 400);
    CHECK(r.episodes.back().env_steps == 400);
  }
}

TEST_CASE("warmup actions are uniform over the action box") {
  testing::QuadraticToy toy(-2.0, 6.0, 50);
  TrainPolicyOptions opt;
  opt.total_steps = 4000;
  opt.warmup_steps = 4000;
  opt.pool_size = 8;
  opt.eval_at_start = false;
  opt.eval_every = 1'000'000;
  SacAgent agent(toy.spec(), small_sac(), 1);
  const RunRecord r = train_policy(agent, toy, opt, 2);
  CHECK(r.policy_updates <= 1);
  const auto& log = toy.action_log();
  REQUIRE(log.size() == 4000);
  std::vector<int> bins(8, 0);
  double mean = 0.0;
  for (double a : log) {
    REQUIRE(a >= -2.0);
    REQUIRE(a <= 6.0);
    ++bins[std::min(7, static_cast<int>(a + 2.0))];
    mean += a / 4000.0;
  }
  // 500 expected per bin; chi-square with 7 dof stays far below 30.
  double chi2 = 0.0;
  for (int b : bins) chi2 += (b - 500.0) * (b - 500.0) / 500.0;
  CHECK(chi2 < 30.0);
  CHECK(std::abs(mean - 2.0) < 0.2);
}

TEST_CASE("SAC finds the optimum of a quadratic bandit") {
  testing::QuadraticToy toy(-1.0, 1.0, 20, 0.0);
  SacConfig cfg = small_sac();
  cfg.hidden = {32, 32};
  cfg.batch_size = 64;
  cfg.gamma = 0.9;
  cfg.lr = 1e-3;
  TrainPolicyOptions opt;
  opt.total_steps = 20'000;
  opt.pool_size = 4;
  opt.warmup_steps = 1000;
  opt.eval_every = 5000;
  opt.eval_episodes = 1;
  SacAgent agent(toy.spec(), cfg, 3);
  // Start the policy away from the optimum.
  agent.policy().bias(agent.policy().num_layers() - 1).value[0] = 1.0;
  std::mt19937_64 unused(0);
  CHECK(std::abs(agent.select_action({{1.0}}, true, unused)[0]) > 0.5);
  train_policy(agent, toy, opt, 4);
  CHECK(std::abs(agent.select_action({{1.0}}, true, unused)[0]) < 0.05);
}

TEST_CASE("entropy temperature tuning moves log-probabilities toward the target") {
  testing::QuadraticToy toy(-1.0, 1.0, 20, 0.0);
  int closer = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SacConfig cfg = small_sac();
    cfg.batch_size = 64;
    cfg.lr = 1e-3;
    SacAgent agent(toy.spec(), cfg, seed);
    TrainPolicyOptions opt;
    opt.total_steps = 8000;
    opt.pool_size = 4;
    opt.warmup_steps = 500;
    opt.eval_at_start = false;
    opt.eval_every = 1'000'000;
    const RunRecord r = train_policy(agent, toy, opt, seed);
    // Target entropy -1 puts the temperature fixed point at mean log pi = 1.
    const double target = 1.0;
    const std::size_t n = r.updates.size();
    double early = 0.0;
    double late = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
      early += r.updates[i].sac.log_prob / 100.0;
      late += r.updates[n - 100 + i].sac.log_prob / 100.0;
    }
    if (std::abs(late - target) < std::abs(early - target)) ++closer;
  }
  CHECK(closer >= 3);

  // A fixed temperature never moves.
  SacConfig fixed = small_sac();
  fixed.auto_alpha = false;
  fixed.initial_alpha = 0.2;
  SacAgent agent(toy.spec(), fixed, 1);
  std::mt19937_64 rng(2);
  ReplayBuffer buf = random_buffer(toy.spec(), 100, rng);
  for (int i = 0; i < 10; ++i) agent.update(buf.sample(32, rng), rng);
  CHECK(agent.alpha() == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("online LASER alternates one update per policy update") {
  envs::MiniDoor door;
  latent::LaserConfig lc;
  lc.hidden = {16};
  auto model = std::make_shared<latent::LaserModel>(lc, door.spec(), 1);
  latent::LaserTrainer trainer(model, diff::AdamConfig{1e-3});
  SacAgent agent(door.spec(), small_sac(), model, true, 2);
  OnlineLaser online{&trainer, 32, true};
  TrainPolicyOptions opt;
  opt.total_steps = 600;
  opt.warmup_steps = 200;
  opt.pool_size = 4;
  opt.eval_every = 300;
  opt.eval_episodes = 1;
  const RunRecord r = train_policy(agent, door, opt, 3, &online);
  CHECK(r.policy_updates == 101);
  CHECK(r.laser_updates == r.policy_updates);
  CHECK(trainer.updates() == 101);
  for (const auto& u : r.updates) CHECK(u.laser.has_value());
  // The normaliser was fitted from the buffer.
  CHECK(model->normalizer().scale != std::vector<double>(8, 1.0));
}
