#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "laser/diffcore/tensor.hpp"
#include "laser/envs/env.hpp"
#include "laser/latent/model.hpp"

namespace laser::rl {

struct ReplayBatch {
  diff::Tensor s;       // [n, state_dim]
  diff::Tensor a;       // [n, action_dim], env actions
  diff::Tensor r;       // [n, 1]
  diff::Tensor s_next;  // [n, state_dim]
  diff::Tensor done;    // [n, 1], 1 for terminal transitions
};

// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim);

  void push(std::span<const double> s, std::span<const double> a, double r, std::span<const double> s_next,
            bool done);
  void push(const envs::Transition& t) { push(t.s.full, t.a, t.r, t.s_next.full, t.done); }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }

  // k-th oldest stored transition.
  envs::Transition at(std::size_t k) const;

  // Uniform draw of distinct transitions.
  ReplayBatch sample(std::size_t n, std::mt19937_64& rng) const;
  ReplayBatch gather(std::span<const std::size_t> ages) const;

 private:
  std::size_t slot(std::size_t age) const;

  std::size_t capacity_;
  std::size_t state_dim_;
  std::size_t action_dim_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;  // next slot to write
  std::vector<double> s_;
  std::vector<double> a_;
  std::vector<double> r_;
  std::vector<double> s_next_;
  std::vector<unsigned char> done_;
};

// Robot-state view of a replay batch for LASER updates.
latent::LaserBatch to_laser_batch(const ReplayBatch& batch, std::size_t robot_state_dim);

}  // namespace laser::rl
