#include "laser/diffcore/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "laser/diffcore/ops.hpp"
#include "laser/error.hpp"

namespace laser::diff {

namespace {

void require_same_shape(Var a, Var b, const char* op) {
  if (a.value().shape() != b.value().shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.value().shape()) + " and " +
                         shape_string(b.value().shape()) + " differ");
  }
}

}  // namespace

Var gaussian_reparam_sample(Var mu, Var log_sigma, Var noise) {
  require_same_shape(mu, log_sigma, "gaussian_reparam_sample");
  require_same_shape(mu, noise, "gaussian_reparam_sample");
  return add(mu, mul(exp(log_sigma), noise));
}

Var gaussian_logprob(Var mu, Var log_sigma, Var value) {
  require_same_shape(mu, log_sigma, "gaussian_logprob");
  require_same_shape(mu, value, "gaussian_logprob");
  const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
  Var z = mul(sub(value, mu), exp(neg(log_sigma)));
  Var per_dim = add_scalar(neg(add(scale(square(z), 0.5), log_sigma)), -half_log_two_pi);
  return row_sum(per_dim);
}

Var tanh_gaussian_logprob(Var mu, Var log_sigma, Var raw_action) {
  Var base = gaussian_logprob(mu, log_sigma, raw_action);
  Var t = tanh(raw_action);
  Var correction = row_sum(log(add_scalar(neg(square(t)), 1.0 + kSquashEpsilon)));
  return sub(base, correction);
}

Tensor standard_normal(Shape shape, std::mt19937_64& rng) {
  Tensor out(std::move(shape));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out.data()) v = normal(rng);
  return out;
}

}  // namespace laser::diff
