#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "laser/diffcore/adam.hpp"
#include "laser/latent/dataset.hpp"
#include "laser/latent/model.hpp"

namespace laser::latent {

struct LaserTrainOptions {
  std::size_t steps = 5000;
  std::size_t batch_size = 256;
  diff::AdamConfig adam{1e-3};
  bool fit_normalizer = true;
};

struct LaserLossRecord {
  std::size_t step = 0;
  double rec = 0.0;
  double dyn = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

// Owns the Adam state for one LaserModel and applies total_loss updates. The
// model is shared so that an online agent can hold the same decoder.
class LaserTrainer {
 public:
  LaserTrainer(std::shared_ptr<LaserModel> model, diff::AdamConfig adam);

  // One reparameterised minibatch step. Throws DivergenceError on NaN.
  LaserLossRecord update(const LaserBatch& batch, std::mt19937_64& rng);

  LaserModel& model() { return *model_; }
  std::shared_ptr<LaserModel> shared_model() const { return model_; }
  std::size_t updates() const { return updates_; }

 private:
  std::shared_ptr<LaserModel> model_;
  diff::Adam adam_;
  std::size_t updates_ = 0;
};

struct LaserTrainResult {
  LaserModel model;
  std::vector<LaserLossRecord> history;  // one record per step
};

// Minibatch Adam on total_loss. Deterministic for a given seed.
LaserTrainResult train_laser(const TransitionDataset& dataset, const LaserConfig& config,
                             const LaserTrainOptions& options, std::uint64_t seed);

}  // namespace laser::latent
