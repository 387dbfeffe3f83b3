#include "laser/latent/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "laser/error.hpp"

namespace laser::latent {

ActiveDims active_dims(const LaserModel& model, const diff::Tensor& actions, const diff::Tensor& robot_states,
                       double threshold) {
  if (!model.all_finite()) throw NumericError("active_dims: model has non-finite parameters");
  if (threshold < 0.0) throw ContractError("active_dims: threshold must be non-negative");
  const EncodingValue enc = encode(model, actions, robot_states);
  const std::size_t n = enc.mu.rows();
  const std::size_t z = model.latent_dim();
  if (n == 0) throw ContractError("active_dims: no samples");
  ActiveDims out{{}, std::vector<double>(z, 0.0), std::vector<double>(z, 0.0)};
  for (std::size_t d = 0; d < z; ++d) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) sum += enc.mu(r, d);
    const double m = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t r = 0; r < n; ++r) sq += (enc.mu(r, d) - m) * (enc.mu(r, d) - m);
    out.mu_mean[d] = m;
    out.mu_std[d] = std::sqrt(sq / static_cast<double>(n));
  }
  const double largest = *std::max_element(out.mu_std.begin(), out.mu_std.end());
  for (std::size_t d = 0; d < z; ++d) {
    if (threshold == 0.0 || out.mu_std[d] > threshold * largest) out.active.push_back(d);
  }
  return out;
}

ActiveDims active_dims(const LaserModel& model, const TransitionDataset& dataset, double threshold) {
  const LaserBatch all = dataset.all();
  return active_dims(model, all.a, all.s_r, threshold);
}

Traversal traverse_latent(const LaserModel& model, envs::Env& env, const std::vector<std::size_t>& dims,
                          double amplitude, double period, std::size_t steps, std::uint64_t seed) {
  if (!(period > 0.0)) throw ContractError("traverse_latent: period must be positive");
  for (std::size_t d : dims) {
    if (d >= model.latent_dim()) throw DimensionError("traverse_latent: latent dimension out of range");
  }
  Traversal run{dims, amplitude, period, seed, {}, false};
  run.end_effector.reserve(steps);
  envs::EnvState s = env.reset(seed);
  const std::size_t sr = model.robot_state_dim();
  diff::Tensor z({1, model.latent_dim()});
  for (std::size_t t = 0; t < steps; ++t) {
    const double value = amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period);
    for (std::size_t d : dims) z[d] = value;
    const diff::Tensor s_r({1, sr}, envs::robot_state(s, sr));
    const diff::Tensor a = decode(model, s_r, z);
    const envs::StepResult r = env.step(a.data());
    run.end_effector.push_back(env.end_effector());
    s = r.next;
    if (r.done && t + 1 < steps) {
      run.truncated = true;
      break;
    }
  }
  return run;
}

double fraction_near_plane(const std::vector<Traversal>& runs, double plane, double band) {
  std::size_t total = 0;
  std::size_t inside = 0;
  for (const auto& run : runs) {
    for (const auto& p : run.end_effector) {
      ++total;
      if (std::abs(p[1] - plane) < band) ++inside;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(total);
}

}  // namespace laser::latent
