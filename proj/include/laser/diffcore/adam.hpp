#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "laser/diffcore/tape.hpp"

namespace laser::diff {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  Tensor m;
  Tensor v;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::unordered_map<const Parameter*, AdamMoments> moments;
};

// One bias-corrected Adam update. Parameters missing from `grads` are treated
// as having a zero gradient. Throws OptimizerError naming the parameter when a
// gradient is non-finite, before anything is modified.
void adam_step(std::span<Parameter* const> params, const GradientMap& grads, AdamState& state);

// Parameter list bundled with its optimizer state.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter*> params, AdamConfig config);

  void step(const GradientMap& grads) { adam_step(params_, grads, state_); }
  const AdamState& state() const { return state_; }
  const std::vector<Parameter*>& params() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  AdamState state_;
};

}  // namespace laser::diff
