#include "laser/diffcore/adam.hpp"

#include <cmath>

#include "laser/error.hpp"

namespace laser::diff {

void adam_step(std::span<Parameter* const> params, const GradientMap& grads, AdamState& state) {
  for (const Parameter* p : params) {
    auto it = grads.find(p);
    if (it == grads.end()) continue;
    if (it->second.shape() != p->value.shape()) {
      throw DimensionError("adam: gradient shape " + shape_string(it->second.shape()) +
                           " does not match parameter '" + p->name + "' " + shape_string(p->value.shape()));
    }
    if (!it->second.all_finite()) throw OptimizerError("adam: non-finite gradient for parameter '" + p->name + "'");
  }

  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  for (Parameter* p : params) {
    auto [slot, inserted] = state.moments.try_emplace(p);
    if (inserted) {
      slot->second.m = Tensor::zeros_like(p->value);
      slot->second.v = Tensor::zeros_like(p->value);
    }
    auto m = slot->second.m.data();
    auto v = slot->second.v.data();
    auto w = p->value.data();
    auto git = grads.find(p);
    const double* g = git == grads.end() ? nullptr : git->second.raw();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g ? g[i] : 0.0;
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : params_(std::move(params)) {
  state_.config = config;
}

}  // namespace laser::diff
