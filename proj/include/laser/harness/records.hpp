#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "laser/rl/train.hpp"

namespace laser::harness {

// Creates parent directories as needed.
void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

// Shortest round-trip decimal form, so reruns compare byte for byte.
std::string format_real(double v);

// env_steps,episode_return,episode_len,seed
std::string run_csv(const rl::RunRecord& run);
// update,env_steps,q1,q2,actor,alpha_loss,alpha,log_prob[,laser_rec,laser_dyn,laser_kl,laser_total]
std::string loss_csv(const rl::RunRecord& run);
// env_steps,mean_return,success_rate,seed
std::string eval_csv(const std::vector<rl::RunRecord>& runs);

// First evaluation point whose mean return reaches `threshold`.
std::optional<std::size_t> steps_to_threshold(const rl::RunRecord& run, double threshold);

// Median with runs that never reached the threshold counted as infinite.
double median_steps(const std::vector<std::optional<std::size_t>>& steps);

// Linear-interpolation quantile of unsorted values, q in [0, 1].
double quantile(std::vector<double> values, double q);

struct CurvePoint {
  std::size_t env_steps = 0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

// Per evaluation point, across runs that share the evaluation schedule.
std::vector<CurvePoint> aggregate_evals(const std::vector<rl::RunRecord>& runs);
std::string curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace laser::harness
