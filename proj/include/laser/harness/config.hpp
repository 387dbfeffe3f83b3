#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "laser/envs/env.hpp"
#include "laser/latent/model.hpp"
#include "laser/latent/train.hpp"
#include "laser/rl/sac.hpp"
#include "laser/rl/train.hpp"

namespace laser::harness {

// Parsed "[section]" / "key = value" file. Values are TOML-like scalars
// (numbers, true/false, "strings") or flat arrays of them.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::string& origin = "<string>");
  static ConfigFile load(const std::filesystem::path& path);

  // Raw values keyed by "section.key".
  const std::map<std::string, std::string>& values() const { return values_; }
  void set(const std::string& key, const std::string& raw) { values_[key] = raw; }

 private:
  std::map<std::string, std::string> values_;
};

struct ExpertSettings {
  std::size_t steps = 300'000;
  std::uint64_t seed = 0;
  std::size_t episodes = 1000;
  // Training stops once an evaluation reaches stop_return; the best policy
  // must reach min_return or collection aborts.
  double stop_return = 1e9;
  double min_return = 0.0;
};

struct LaserSettings {
  latent::LaserConfig model;
  latent::LaserTrainOptions train;
  std::uint64_t seed = 0;
};

struct AnalysisSettings {
  std::size_t rollouts = 10;
  std::size_t traversals = 200;
  double amplitude = 2.0;
  double period = 50.0;
  std::size_t steps = 200;
};

struct ExperimentConfig {
  std::string id = "exp1_offline";
  std::string env = "mini_door";
  envs::VariantConfig variant;  // empty: the standard transfer variant of the env
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t steps = 200'000;
  std::string out;  // empty: $LASER_OUT or ./runs
  double threshold_fraction = 0.8;
  // End each policy run at its first evaluation at or above the threshold.
  bool stop_at_threshold = false;

  rl::SacConfig sac;
  rl::TrainPolicyOptions train;
  LaserSettings laser;
  ExpertSettings expert;
  AnalysisSettings analysis;

  std::string dataset_path;
  std::string laser_path;
  std::string expert_path;

  static ExperimentConfig from_file(const ConfigFile& file);
  static ExperimentConfig load(const std::filesystem::path& path);
  std::string to_text() const;
  void validate() const;

  std::filesystem::path out_dir() const;
  std::filesystem::path resolved_dataset() const;
  std::filesystem::path resolved_laser() const;
  std::filesystem::path resolved_expert() const;
  envs::VariantConfig transfer_variant() const;
};

}  // namespace laser::harness
