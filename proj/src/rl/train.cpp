#include "laser/rl/train.hpp"

#include <memory>

#include "laser/error.hpp"

namespace laser::rl {

using diff::Tensor;

namespace {

Tensor stack_states(const std::vector<envs::EnvState>& states) {
  const std::size_t n = states.size();
  const std::size_t d = states.front().full.size();
  Tensor out({n, d});
  for (std::size_t r = 0; r < n; ++r) std::copy_n(states[r].full.begin(), d, out.raw() + r * d);
  return out;
}

std::vector<double> row(const Tensor& t, std::size_t r) {
  const auto span = t.row_span(r);
  return {span.begin(), span.end()};
}

}  // namespace

void TrainPolicyOptions::validate() const {
  if (pool_size == 0) throw ConfigError("train_policy: pool size must be positive");
  if (eval_every == 0) throw ConfigError("train_policy: eval interval must be positive");
  if (eval_episodes == 0) throw ConfigError("train_policy: need at least one eval episode");
}

EvalRecord evaluate_policy(const SacAgent& agent, const envs::Env& prototype, std::size_t episodes,
                           std::uint64_t seed_base) {
  std::vector<std::unique_ptr<envs::Env>> envs;
  std::vector<envs::EnvState> states;
  std::vector<double> returns(episodes, 0.0);
  std::vector<bool> live(episodes, true);
  std::size_t successes = 0;
  for (std::size_t k = 0; k < episodes; ++k) {
    envs.push_back(prototype.clone());
    states.push_back(envs.back()->reset(seed_base + k));
  }
  std::mt19937_64 unused(0);
  std::size_t remaining = episodes;
  while (remaining > 0) {
    const PolicyAction act = agent.act(stack_states(states), true, unused);
    for (std::size_t k = 0; k < episodes; ++k) {
      if (!live[k]) continue;
      const envs::StepResult r = envs[k]->step(row(act.env, k));
      returns[k] += r.reward;
      states[k] = r.next;
      if (r.done) {
        live[k] = false;
        --remaining;
        if (r.terminated) ++successes;
      }
    }
  }
  double total = 0.0;
  for (double v : returns) total += v;
  return {0, total / static_cast<double>(episodes), static_cast<double>(successes) / static_cast<double>(episodes)};
}

RunRecord train_policy(SacAgent& agent, const envs::Env& prototype, const TrainPolicyOptions& options,
                       std::uint64_t seed, const OnlineLaser* online) {
  options.validate();
  const envs::EnvSpec& spec = prototype.spec();
  if (spec.state_dim != agent.spec().state_dim || spec.action_dim != agent.spec().action_dim) {
    throw DimensionError("train_policy: agent and env dimensions differ");
  }
  if (online != nullptr && online->trainer == nullptr) throw ContractError("train_policy: online LASER without trainer");

  RunRecord record;
  record.seed = seed;
  std::mt19937_64 rng(seed);
  std::mt19937_64 reset_seeds(seed ^ 0x9e3779b97f4a7c15ULL);
  ReplayBuffer buffer(agent.config().buffer_capacity, spec.state_dim, spec.action_dim);

  bool stop = false;
  auto run_eval = [&](std::size_t env_steps) {
    EvalRecord e = evaluate_policy(agent, prototype, options.eval_episodes, options.eval_seed_base);
    e.env_steps = env_steps;
    record.evals.push_back(e);
    if (options.on_eval && !options.on_eval(e)) stop = true;
  };
  if (options.total_steps == 0) return record;
  if (options.eval_at_start) run_eval(0);
  if (stop) return record;

  const std::size_t n = options.pool_size;
  std::vector<std::unique_ptr<envs::Env>> pool;
  std::vector<envs::EnvState> states;
  std::vector<double> returns(n, 0.0);
  std::vector<std::size_t> lengths(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    pool.push_back(prototype.clone());
    states.push_back(pool.back()->reset(reset_seeds()));
  }

  const std::size_t pdim = agent.policy_dim();
  std::size_t env_steps = 0;
  std::size_t next_eval = options.eval_every;
  bool normalizer_fitted = false;
  try {
    while (env_steps < options.total_steps && !stop) {
      const std::size_t active = std::min(n, options.total_steps - env_steps);
      const Tensor batch_states = stack_states(states);
      Tensor env_actions;
      if (env_steps < options.warmup_steps) {
        Tensor random({n, pdim});
        for (std::size_t k = 0; k < n; ++k) {
          for (std::size_t c = 0; c < pdim; ++c) {
            const double b = agent.policy_bound(c);
            random(k, c) = std::uniform_real_distribution<double>(-b, b)(rng);
          }
        }
        env_actions = agent.to_env_action(batch_states, random);
      } else {
        env_actions = agent.act(batch_states, false, rng).env;
      }

      for (std::size_t k = 0; k < active; ++k) {
        const std::vector<double> a = envs::clip_action(row(env_actions, k), spec);
        const envs::StepResult r = pool[k]->step(a);
        // Time-limit truncation is not a terminal state for bootstrapping.
        buffer.push(states[k].full, a, r.reward, r.next.full, r.terminated);
        returns[k] += r.reward;
        ++lengths[k];
        ++env_steps;
        states[k] = r.next;
        if (r.done) {
          record.episodes.push_back({env_steps, returns[k], lengths[k], seed});
          returns[k] = 0.0;
          lengths[k] = 0;
          states[k] = pool[k]->reset(reset_seeds());
        }
      }

      if (env_steps >= options.warmup_steps && buffer.size() >= agent.config().batch_size) {
        UpdateRecord u;
        u.sac = agent.update(buffer.sample(agent.config().batch_size, rng), rng);
        u.update = ++record.policy_updates;
        u.env_steps = env_steps;
        if (online != nullptr && buffer.size() >= online->batch_size) {
          if (online->fit_normalizer && !normalizer_fitted) {
            const ReplayBatch everything = buffer.sample(buffer.size(), rng);
            online->trainer->model().fit_normalizer(to_laser_batch(everything, spec.robot_state_dim).s_r);
            normalizer_fitted = true;
          }
          const ReplayBatch lb = buffer.sample(online->batch_size, rng);
          u.laser = online->trainer->update(to_laser_batch(lb, spec.robot_state_dim), rng);
          ++record.laser_updates;
        }
        record.updates.push_back(u);
      }

      while (env_steps >= next_eval && !stop) {
        run_eval(next_eval);
        next_eval += options.eval_every;
      }
    }
  } catch (const DivergenceError&) {
    if (!options.divergence_checkpoint.empty()) agent.save(options.divergence_checkpoint);
    throw;
  }
  return record;
}

}  // namespace laser::rl
