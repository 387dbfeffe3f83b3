#include "laser/rl/replay.hpp"

#include "laser/error.hpp"
#include "laser/latent/dataset.hpp"

namespace laser::rl {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity == 0 || state_dim == 0 || action_dim == 0) throw ConfigError("replay buffer: sizes must be positive");
}

std::size_t ReplayBuffer::slot(std::size_t age) const {
  // Oldest item sits at the cursor once the ring has wrapped.
  return size_ < capacity_ ? age : (cursor_ + age) % capacity_;
}

void ReplayBuffer::push(std::span<const double> s, std::span<const double> a, double r,
                        std::span<const double> s_next, bool done) {
  if (s.size() != state_dim_ || s_next.size() != state_dim_ || a.size() != action_dim_) {
    throw DimensionError("replay buffer: transition does not match buffer dimensions");
  }
  if (!std::isfinite(r)) throw ContractError("replay buffer: non-finite reward");
  // Storage grows lazily so that a large nominal capacity costs nothing up front.
  if (size_ < capacity_) {
    s_.insert(s_.end(), s.begin(), s.end());
    a_.insert(a_.end(), a.begin(), a.end());
    r_.push_back(r);
    s_next_.insert(s_next_.end(), s_next.begin(), s_next.end());
    done_.push_back(done ? 1 : 0);
    ++size_;
    cursor_ = size_ % capacity_;
    return;
  }
  std::copy(s.begin(), s.end(), s_.begin() + static_cast<std::ptrdiff_t>(cursor_ * state_dim_));
  std::copy(a.begin(), a.end(), a_.begin() + static_cast<std::ptrdiff_t>(cursor_ * action_dim_));
  r_[cursor_] = r;
  std::copy(s_next.begin(), s_next.end(), s_next_.begin() + static_cast<std::ptrdiff_t>(cursor_ * state_dim_));
  done_[cursor_] = done ? 1 : 0;
  cursor_ = (cursor_ + 1) % capacity_;
}

envs::Transition ReplayBuffer::at(std::size_t k) const {
  if (k >= size_) throw ContractError("replay buffer: index out of range");
  const std::size_t i = slot(k);
  envs::Transition t;
  t.s.full.assign(s_.begin() + static_cast<std::ptrdiff_t>(i * state_dim_),
                  s_.begin() + static_cast<std::ptrdiff_t>((i + 1) * state_dim_));
  t.a.assign(a_.begin() + static_cast<std::ptrdiff_t>(i * action_dim_),
             a_.begin() + static_cast<std::ptrdiff_t>((i + 1) * action_dim_));
  t.r = r_[i];
  t.s_next.full.assign(s_next_.begin() + static_cast<std::ptrdiff_t>(i * state_dim_),
                       s_next_.begin() + static_cast<std::ptrdiff_t>((i + 1) * state_dim_));
  t.done = done_[i] != 0;
  return t;
}

ReplayBatch ReplayBuffer::gather(std::span<const std::size_t> ages) const {
  const std::size_t n = ages.size();
  ReplayBatch b{diff::Tensor({n, state_dim_}), diff::Tensor({n, action_dim_}), diff::Tensor({n, 1}),
                diff::Tensor({n, state_dim_}), diff::Tensor({n, 1})};
  for (std::size_t row = 0; row < n; ++row) {
    if (ages[row] >= size_) throw ContractError("replay buffer: index out of range");
    const std::size_t i = slot(ages[row]);
    std::copy_n(s_.begin() + static_cast<std::ptrdiff_t>(i * state_dim_), state_dim_, b.s.raw() + row * state_dim_);
    std::copy_n(a_.begin() + static_cast<std::ptrdiff_t>(i * action_dim_), action_dim_,
                b.a.raw() + row * action_dim_);
    std::copy_n(s_next_.begin() + static_cast<std::ptrdiff_t>(i * state_dim_), state_dim_,
                b.s_next.raw() + row * state_dim_);
    b.r[row] = r_[i];
    b.done[row] = done_[i];
  }
  return b;
}

ReplayBatch ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  if (n > size_) throw ContractError("replay buffer: batch larger than stored transitions");
  return gather(latent::sample_without_replacement(size_, n, rng));
}

latent::LaserBatch to_laser_batch(const ReplayBatch& batch, std::size_t robot_state_dim) {
  const std::size_t n = batch.s.rows();
  if (robot_state_dim > batch.s.cols()) throw DimensionError("robot_state_dim exceeds state width");
  latent::LaserBatch out{diff::Tensor({n, robot_state_dim}), batch.a, diff::Tensor({n, robot_state_dim})};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < robot_state_dim; ++c) {
      out.s_r(r, c) = batch.s(r, c);
      out.s_r_next(r, c) = batch.s_next(r, c);
    }
  }
  return out;
}

}  // namespace laser::rl
