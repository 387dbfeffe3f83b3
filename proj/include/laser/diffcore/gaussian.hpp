#pragma once

#include <random>

#include "laser/diffcore/tape.hpp"

namespace laser::diff {

inline constexpr double kLogSigmaMin = -5.0;
inline constexpr double kLogSigmaMax = 2.0;
// Keeps log(1 - tanh(u)^2) finite when |u| is large.
inline constexpr double kSquashEpsilon = 1e-6;

// mu + exp(log_sigma) * noise. Noise is supplied by the caller so runs stay
// reproducible; gradients flow into mu and log_sigma.
Var gaussian_reparam_sample(Var mu, Var log_sigma, Var noise);

// Log density of a = tanh(u) where u ~ N(mu, exp(log_sigma)^2), one value per
// row ([rows, 1]).
Var tanh_gaussian_logprob(Var mu, Var log_sigma, Var raw_action);

// Diagonal Gaussian log density of u, one value per row.
Var gaussian_logprob(Var mu, Var log_sigma, Var value);

Tensor standard_normal(Shape shape, std::mt19937_64& rng);

}  // namespace laser::diff
