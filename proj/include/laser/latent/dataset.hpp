#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "laser/envs/env.hpp"
#include "laser/latent/model.hpp"

namespace laser::latent {

// k distinct indices from [0, n), in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::mt19937_64& rng);

// Packed (s, a, s') triplets plus the spec of the env that produced them.
//
// File layout, all integers u64 and all reals f64, little-endian:
//   "LASERDS1", name length, name bytes, state_dim, robot_state_dim,
//   action_dim, max_episode_steps, count, reward_bound, action_low[action_dim],
//   action_high[action_dim], then per transition s, a, s'.
class TransitionDataset {
 public:
  TransitionDataset() = default;
  explicit TransitionDataset(envs::EnvSpec spec);

  const envs::EnvSpec& spec() const { return spec_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  // The action must lie inside the spec bounds.
  void add(const envs::EnvState& s, std::span<const double> a, const envs::EnvState& s_next);

  std::span<const double> state(std::size_t i) const;
  std::span<const double> action(std::size_t i) const;
  std::span<const double> next_state(std::size_t i) const;

  // Robot-state rows for the selected transitions.
  LaserBatch batch(std::span<const std::size_t> indices) const;
  LaserBatch all() const;
  diff::Tensor robot_states() const;

  // First `count` transitions and the rest.
  std::pair<TransitionDataset, TransitionDataset> split(std::size_t count) const;

  void save(const std::string& path) const;
  static TransitionDataset load(const std::string& path);
  // Also checks that the stored spec matches `expected`.
  static TransitionDataset load_for(const std::string& path, const envs::EnvSpec& expected);

 private:
  envs::EnvSpec spec_;
  std::size_t count_ = 0;
  std::vector<double> states_;
  std::vector<double> actions_;
  std::vector<double> next_states_;
};

// Throws LoadError describing the first mismatching field.
void require_same_spec(const envs::EnvSpec& stored, const envs::EnvSpec& expected);

}  // namespace laser::latent
