#include "laser/latent/train.hpp"

#include <cmath>

#include "laser/diffcore/gaussian.hpp"
#include "laser/error.hpp"

namespace laser::latent {

LaserTrainer::LaserTrainer(std::shared_ptr<LaserModel> model, diff::AdamConfig adam)
    : model_(std::move(model)), adam_(model_->parameters(), adam) {}

LaserLossRecord LaserTrainer::update(const LaserBatch& batch, std::mt19937_64& rng) {
  const diff::Tensor noise = diff::standard_normal({batch.a.rows(), model_->latent_dim()}, rng);
  diff::Tape tape;
  LossTerms terms;
  diff::GradientMap grads;
  try {
    terms = total_loss(*model_, tape, batch, &noise);
    grads = tape.backward(terms.total);
    adam_.step(grads);
  } catch (const NumericError& e) {
    throw DivergenceError(std::string("LASER update diverged: ") + e.what());
  } catch (const OptimizerError& e) {
    throw DivergenceError(std::string("LASER update diverged: ") + e.what());
  }
  ++updates_;
  return {updates_, terms.components.at("rec"), terms.components.at("dyn"), terms.components.at("kl"),
          terms.components.at("total")};
}

LaserTrainResult train_laser(const TransitionDataset& dataset, const LaserConfig& config,
                             const LaserTrainOptions& options, std::uint64_t seed) {
  if (dataset.empty()) throw TrainingError("train_laser: dataset is empty");
  if (options.batch_size == 0 || options.batch_size > dataset.size()) {
    throw TrainingError("train_laser: batch size " + std::to_string(options.batch_size) + " exceeds dataset size " +
                        std::to_string(dataset.size()));
  }
  std::mt19937_64 rng(seed);
  auto model = std::make_shared<LaserModel>(config, dataset.spec(), rng());
  if (options.fit_normalizer) model->fit_normalizer(dataset.robot_states());
  LaserTrainer trainer(model, options.adam);

  LaserTrainResult result;
  result.history.reserve(options.steps);
  for (std::size_t step = 0; step < options.steps; ++step) {
    const auto idx = sample_without_replacement(dataset.size(), options.batch_size, rng);
    result.history.push_back(trainer.update(dataset.batch(idx), rng));
  }
  result.model = *model;
  return result;
}

}  // namespace laser::latent
