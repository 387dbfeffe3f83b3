#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "laser/harness/config.hpp"
#include "laser/latent/analysis.hpp"
#include "laser/latent/dataset.hpp"
#include "laser/latent/model.hpp"
#include "laser/rl/train.hpp"

namespace laser::harness {

struct ExpertSummary {
  double converged_return = 0.0;  // mean return over the collected episodes
  double success_rate = 0.0;
  double threshold = 0.0;         // threshold_fraction * converged_return
  double best_eval_return = 0.0;
  std::size_t best_eval_steps = 0;
  std::size_t episodes = 0;
  std::size_t transitions = 0;
};

// Trains the original-space expert, keeps its best evaluated snapshot and
// rolls out expert.episodes deterministic episodes into the dataset file.
ExpertSummary run_expert_and_collect(const ExperimentConfig& config);
ExpertSummary read_expert_summary(const ExperimentConfig& config);

// Trains LASER on the collected dataset and saves it; returns the model.
latent::LaserModel run_laser_training(const ExperimentConfig& config);

enum class Arm { original, latent_frozen, latent_online };
std::string arm_name(Arm arm);
Arm parse_arm(const std::string& name);

struct ArmResult {
  Arm arm = Arm::original;
  std::vector<rl::RunRecord> runs;  // one per seed, in config order
  std::vector<std::optional<std::size_t>> steps_to_threshold;
  std::vector<double> zero_shot;  // eval return of the untrained policy
  double median_steps = 0.0;      // infinite when most runs miss the threshold
};

struct Comparison {
  std::string id;
  double threshold = 0.0;
  ArmResult latent;
  ArmResult original;
};

// Trains one arm on every configured seed and writes its per-seed CSVs into
// `dir`. `base` is the LASER model the frozen arm acts through.
ArmResult run_arm(const ExperimentConfig& config, Arm arm, const envs::Env& env, const latent::LaserModel* base,
                  double threshold, const std::filesystem::path& dir);

// Summary table, aggregated curves and the learning-curve plot.
void write_comparison(const Comparison& comparison, const std::filesystem::path& dir);

Comparison run_offline_pipeline(const ExperimentConfig& config);
Comparison run_transfer_pipeline(const ExperimentConfig& config);
Comparison run_online_pipeline(const ExperimentConfig& config);

struct AnalysisResult {
  latent::ActiveDims dims;
  std::size_t samples = 0;
  std::vector<latent::Traversal> traversals;
  // Only for envs with a table plane.
  std::optional<double> near_plane_fraction;
  double plane_band = 0.0;
};

AnalysisResult run_analysis(const ExperimentConfig& config);

// Dims, amplitude and period of the k-th traversal.
struct TraversalPlan {
  std::vector<std::size_t> dims;
  double amplitude = 0.0;
  double period = 0.0;
};
std::vector<TraversalPlan> traversal_plans(const AnalysisSettings& settings, const std::vector<std::size_t>& active,
                                           std::size_t latent_dim);

// Renders a CSV next to itself as .svg: the first column is x, and the
// second column is y, one line per value of a "seed" column when present.
std::filesystem::path plot_csv(const std::filesystem::path& csv);

}  // namespace laser::harness
