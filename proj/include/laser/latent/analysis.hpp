#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "laser/envs/env.hpp"
#include "laser/latent/dataset.hpp"
#include "laser/latent/model.hpp"

namespace laser::latent {

struct ActiveDims {
  std::vector<std::size_t> active;
  std::vector<double> mu_mean;
  std::vector<double> mu_std;
};

// A latent dimension is active when the standard deviation of its encoder mean
// over the data exceeds `threshold` times the largest such deviation. A zero
// threshold reports every dimension.
ActiveDims active_dims(const LaserModel& model, const diff::Tensor& actions, const diff::Tensor& robot_states,
                       double threshold = 0.05);
ActiveDims active_dims(const LaserModel& model, const TransitionDataset& dataset, double threshold = 0.05);

struct Traversal {
  std::vector<std::size_t> dims;
  double amplitude = 0.0;
  double period = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::array<double, 2>> end_effector;  // after each step
  bool truncated = false;                            // episode ended early
};

// Latent action z_d(t) = amplitude * sin(2 pi t / period) on each listed
// dimension, zero elsewhere, decoded and applied to `env` after reset(seed).
Traversal traverse_latent(const LaserModel& model, envs::Env& env, const std::vector<std::size_t>& dims,
                          double amplitude, double period, std::size_t steps, std::uint64_t seed);

// Fraction of recorded end-effector samples whose height lies within `band`
// of `plane`.
double fraction_near_plane(const std::vector<Traversal>& runs, double plane, double band);

}  // namespace laser::latent
