#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "laser/error.hpp"
#include "laser/harness/config.hpp"
#include "laser/harness/pipelines.hpp"
#include "laser/harness/records.hpp"

namespace {

using laser::harness::ExperimentConfig;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<std::string> out;
  bool print_config = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, const std::string& steps_help) {
  cmd->add_option("-c,--config", o.config, "Experiment config file (defaults when omitted)");
  cmd->add_option("--seed", o.seed, "Run this single seed instead of the configured list");
  cmd->add_option("--steps", o.steps, steps_help);
  cmd->add_option("--out", o.out, "Output directory (default: $LASER_OUT, else ./runs)");
  cmd->add_flag("--print-config", o.print_config, "Print the resolved config and exit");
}

enum class Budget { policy, expert, laser };

ExperimentConfig resolve(const CommonOptions& o, const std::string& id, Budget budget) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(o.config);
  if (!id.empty()) c.id = id;
  if (o.seed) c.seeds = {*o.seed};
  if (o.out) c.out = *o.out;
  if (o.steps) {
    switch (budget) {
      case Budget::policy: c.steps = *o.steps; break;
      case Budget::expert: c.expert.steps = *o.steps; break;
      case Budget::laser: c.laser.train.steps = *o.steps; break;
    }
  }
  c.validate();
  return c;
}

std::string steps_text(double v) {
  return std::isinf(v) ? std::string("not reached") : laser::harness::format_real(v);
}

void report(const laser::harness::Comparison& c) {
  std::cout << c.id << ": threshold " << c.threshold << "\n";
  for (const auto* arm : {&c.latent, &c.original}) {
    std::cout << "  " << laser::harness::arm_name(arm->arm) << ": median steps to threshold "
              << steps_text(arm->median_steps) << ", zero-shot returns";
    for (double z : arm->zero_shot) std::cout << " " << z;
    std::cout << "\n";
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Latent action space learning for reinforcement learning on simulated arms", "laser"};
  app.require_subcommand(1);

  CommonOptions collect_o, laser_o, policy_o, exp_o[4];
  auto* collect = app.add_subcommand("collect", "Train the expert and collect its demonstration dataset");
  add_common(collect, collect_o, "Expert training budget in env steps");
  auto* train_laser = app.add_subcommand("train-laser", "Train a LASER model on the collected dataset");
  add_common(train_laser, laser_o, "LASER gradient steps");
  auto* train_policy = app.add_subcommand("train-policy", "Train SAC in one action space");
  add_common(train_policy, policy_o, "Env steps per run");
  std::string arm = "original";
  train_policy->add_option("--arm", arm, "original, latent (frozen trained LASER) or online")
      ->check(CLI::IsMember({"original", "latent", "online"}));

  const char* exp_help[4] = {"Offline LASER vs original action space", "Transfer to the task variant",
                             "Online LASER trained jointly with the policy", "Latent space analysis"};
  const char* exp_ids[4] = {"exp1_offline", "exp2_transfer", "exp3_online", "exp4_analysis"};
  CLI::App* exps[4];
  for (int k = 0; k < 4; ++k) {
    exps[k] = app.add_subcommand("exp" + std::to_string(k + 1), exp_help[k]);
    add_common(exps[k], exp_o[k], "Env steps per run");
  }

  std::string csv;
  auto* plot = app.add_subcommand("plot", "Render a CSV as an SVG line chart next to it");
  plot->add_option("csv", csv, "CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  auto printed = [](const CommonOptions& o, const ExperimentConfig& c) {
    if (o.print_config) std::cout << c.to_text();
    return o.print_config;
  };

  if (*collect) {
    const auto c = resolve(collect_o, "", Budget::expert);
    if (printed(collect_o, c)) return 0;
    const auto s = laser::harness::run_expert_and_collect(c);
    std::cout << "expert: best eval " << s.best_eval_return << " at " << s.best_eval_steps << " steps; collected "
              << s.episodes << " episodes (" << s.transitions << " transitions), mean return " << s.converged_return
              << ", success " << s.success_rate << ", threshold " << s.threshold << "\n"
              << "dataset: " << c.resolved_dataset().string() << "\n";
  } else if (*train_laser) {
    const auto c = resolve(laser_o, "", Budget::laser);
    if (printed(laser_o, c)) return 0;
    laser::harness::run_laser_training(c);
    std::cout << "LASER model: " << c.resolved_laser().string() << "\n";
  } else if (*train_policy) {
    const auto c = resolve(policy_o, "train_policy", Budget::policy);
    if (printed(policy_o, c)) return 0;
    const auto a = laser::harness::parse_arm(arm);
    const auto env = laser::envs::make_env(c.env);
    std::optional<laser::latent::LaserModel> model;
    if (a == laser::harness::Arm::latent_frozen) model = laser::latent::load_laser(c.resolved_laser().string());
    const double threshold = laser::harness::read_expert_summary(c).threshold;
    const auto r = laser::harness::run_arm(c, a, *env, model ? &*model : nullptr, threshold, c.out_dir() / c.id);
    std::cout << arm << ": median steps to threshold " << steps_text(r.median_steps) << "\n";
  } else if (*plot) {
    std::cout << laser::harness::plot_csv(csv).string() << "\n";
  } else {
    for (int k = 0; k < 4; ++k) {
      if (!*exps[k]) continue;
      const auto c = resolve(exp_o[k], exp_ids[k], Budget::policy);
      if (printed(exp_o[k], c)) return 0;
      if (k == 0) report(laser::harness::run_offline_pipeline(c));
      if (k == 1) report(laser::harness::run_transfer_pipeline(c));
      if (k == 2) report(laser::harness::run_online_pipeline(c));
      if (k == 3) {
        const auto r = laser::harness::run_analysis(c);
        std::cout << "active dims:";
        for (auto d : r.dims.active) std::cout << " " << d;
        std::cout << " of " << r.dims.mu_std.size() << " (" << r.samples << " samples)\n";
        if (r.near_plane_fraction) {
          std::cout << "traversal samples within " << r.plane_band << " of the table: " << *r.near_plane_fraction
                    << "\n";
        }
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const laser::ConfigError& e) {
    std::cerr << "laser: config error: " << e.what() << "\n";
    return 2;
  } catch (const laser::LoadError& e) {
    std::cerr << "laser: " << e.what() << "\n";
    return 3;
  } catch (const laser::TrainingError& e) {
    std::cerr << "laser: " << e.what() << "\n";
    return 4;
  } catch (const laser::DivergenceError& e) {
    std::cerr << "laser: training diverged: " << e.what() << "\n";
    return 4;
  } catch (const laser::Error& e) {
    std::cerr << "laser: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "laser: unexpected error: " << e.what() << "\n";
    return 1;
  }
}
