#include "laser/harness/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "laser/envs/mini_wipe.hpp"
#include "laser/error.hpp"
#include "laser/harness/records.hpp"
#include "laser/harness/svg.hpp"
#include "laser/latent/train.hpp"
#include "laser/rl/sac.hpp"

namespace laser::harness {

namespace fs = std::filesystem;
using diff::Tensor;

namespace {

// Reset seed ranges, disjoint from training and evaluation seeds.
constexpr std::uint64_t kCollectSeedBase = 2'000'000;
constexpr std::uint64_t kRolloutSeedBase = 3'000'000;
constexpr std::uint64_t kTraversalSeedBase = 4'000'000;
constexpr std::uint64_t kOnlineModelSalt = 0x5bd1e995ULL;
constexpr std::size_t kCollectBatch = 50;

Tensor stack_states(const std::vector<envs::EnvState>& states) {
  const std::size_t d = states.front().full.size();
  Tensor out({states.size(), d});
  for (std::size_t r = 0; r < states.size(); ++r) std::copy_n(states[r].full.begin(), d, out.raw() + r * d);
  return out;
}

fs::path expert_summary_path(const ExperimentConfig& config) {
  return config.resolved_dataset().parent_path() / "expert.json";
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw LoadError("missing " + what + " '" + path.string() + "'");
}

std::string seed_stem(Arm arm, std::uint64_t seed) { return arm_name(arm) + "_seed" + std::to_string(seed); }

void write_run_files(const rl::RunRecord& run, const fs::path& dir, const std::string& stem) {
  write_text(dir / (stem + ".csv"), run_csv(run));
  write_text(dir / (stem + "_losses.csv"), loss_csv(run));
  write_text(dir / (stem + "_eval.csv"), eval_csv({run}));
}

const envs::MiniWipe* as_wipe(const envs::Env& env) { return dynamic_cast<const envs::MiniWipe*>(&env); }

}  // namespace

std::string arm_name(Arm arm) {
  switch (arm) {
    case Arm::original: return "original";
    case Arm::latent_frozen: return "latent";
    case Arm::latent_online: return "online";
  }
  return "unknown";
}

Arm parse_arm(const std::string& name) {
  if (name == "original") return Arm::original;
  if (name == "latent") return Arm::latent_frozen;
  if (name == "online") return Arm::latent_online;
  throw ConfigError("unknown policy arm '" + name + "' (expected original, latent or online)");
}

ExpertSummary run_expert_and_collect(const ExperimentConfig& config) {
  config.validate();
  const auto env = envs::make_env(config.env);
  const envs::EnvSpec& spec = env->spec();
  const fs::path ckpt = config.resolved_expert();
  const fs::path dir = ckpt.parent_path();
  fs::create_directories(dir);

  rl::SacAgent agent(spec, config.sac, config.expert.seed);
  ExpertSummary summary;
  summary.best_eval_return = -std::numeric_limits<double>::infinity();
  bool saved = false;
  rl::TrainPolicyOptions options = config.train;
  options.total_steps = config.expert.steps;
  options.divergence_checkpoint = (dir / "expert_diverged.ckpt").string();
  options.on_eval = [&](const rl::EvalRecord& e) {
    if (e.mean_return > summary.best_eval_return) {
      summary.best_eval_return = e.mean_return;
      summary.best_eval_steps = e.env_steps;
      agent.save(ckpt.string());
      saved = true;
    }
    return e.mean_return < config.expert.stop_return;
  };
  const rl::RunRecord run = rl::train_policy(agent, *env, options, config.expert.seed);
  write_run_files(run, dir, "expert_train");

  if (!saved || summary.best_eval_return < config.expert.min_return) {
    std::ostringstream msg;
    msg << "expert failed: best eval return " << summary.best_eval_return << " at " << summary.best_eval_steps
        << " env steps is below the required " << config.expert.min_return << " after "
        << (run.episodes.empty() ? 0 : run.episodes.back().env_steps) << " steps";
    throw TrainingError(msg.str());
  }
  agent.load(ckpt.string());

  latent::TransitionDataset dataset(spec);
  std::mt19937_64 unused(0);
  double return_sum = 0.0;
  std::size_t successes = 0;
  for (std::size_t start = 0; start < config.expert.episodes; start += kCollectBatch) {
    const std::size_t n = std::min(kCollectBatch, config.expert.episodes - start);
    std::vector<std::unique_ptr<envs::Env>> pool;
    std::vector<envs::EnvState> states;
    for (std::size_t k = 0; k < n; ++k) {
      pool.push_back(env->clone());
      states.push_back(pool.back()->reset(kCollectSeedBase + start + k));
    }
    std::vector<bool> live(n, true);
    std::size_t remaining = n;
    while (remaining > 0) {
      const rl::PolicyAction act = agent.act(stack_states(states), true, unused);
      for (std::size_t k = 0; k < n; ++k) {
        if (!live[k]) continue;
        const std::vector<double> a = envs::clip_action(act.env.row_span(k), spec);
        const envs::StepResult r = pool[k]->step(a);
        dataset.add(states[k], a, r.next);
        return_sum += r.reward;
        states[k] = r.next;
        if (r.done) {
          live[k] = false;
          --remaining;
          if (r.terminated) ++successes;
        }
      }
    }
  }
  dataset.save(config.resolved_dataset().string());

  const double episodes = static_cast<double>(config.expert.episodes);
  summary.converged_return = return_sum / episodes;
  summary.success_rate = static_cast<double>(successes) / episodes;
  summary.threshold = config.threshold_fraction * summary.converged_return;
  summary.episodes = config.expert.episodes;
  summary.transitions = dataset.size();

  nlohmann::json j;
  j["converged_return"] = summary.converged_return;
  j["success_rate"] = summary.success_rate;
  j["threshold_fraction"] = config.threshold_fraction;
  j["threshold"] = summary.threshold;
  j["best_eval_return"] = summary.best_eval_return;
  j["best_eval_steps"] = summary.best_eval_steps;
  j["episodes"] = summary.episodes;
  j["transitions"] = summary.transitions;
  write_text(expert_summary_path(config), j.dump(2) + "\n");
  return summary;
}

ExpertSummary read_expert_summary(const ExperimentConfig& config) {
  const fs::path path = expert_summary_path(config);
  require_file(path, "expert summary (run 'collect' first)");
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    ExpertSummary s;
    s.converged_return = j.at("converged_return").get<double>();
    s.success_rate = j.at("success_rate").get<double>();
    s.best_eval_return = j.at("best_eval_return").get<double>();
    s.best_eval_steps = j.at("best_eval_steps").get<std::size_t>();
    s.episodes = j.at("episodes").get<std::size_t>();
    s.transitions = j.at("transitions").get<std::size_t>();
    // The fraction comes from the current config, not the collection run.
    s.threshold = config.threshold_fraction * s.converged_return;
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed expert summary '" + path.string() + "': " + e.what());
  }
}

latent::LaserModel run_laser_training(const ExperimentConfig& config) {
  config.validate();
  const auto env = envs::make_env(config.env);
  const fs::path data_path = config.resolved_dataset();
  require_file(data_path, "dataset (run 'collect' first)");
  const auto dataset = latent::TransitionDataset::load_for(data_path.string(), env->spec());
  auto result = latent::train_laser(dataset, config.laser.model, config.laser.train, config.laser.seed);

  const fs::path out = config.resolved_laser();
  fs::create_directories(out.parent_path());
  latent::save_laser(out.string(), result.model);
  std::string csv = "step,rec,dyn,kl,total\n";
  for (const auto& r : result.history) {
    csv += std::to_string(r.step) + "," + format_real(r.rec) + "," + format_real(r.dyn) + "," + format_real(r.kl) +
           "," + format_real(r.total) + "\n";
  }
  write_text(out.parent_path() / "laser_losses.csv", csv);
  return std::move(result.model);
}

ArmResult run_arm(const ExperimentConfig& config, Arm arm, const envs::Env& env, const latent::LaserModel* base,
                  double threshold, const fs::path& dir) {
  if (arm == Arm::latent_frozen && base == nullptr) throw ContractError("run_arm: frozen latent arm needs a model");
  const envs::EnvSpec& spec = env.spec();
  ArmResult result;
  result.arm = arm;
  for (std::uint64_t seed : config.seeds) {
    std::shared_ptr<latent::LaserModel> model;
    std::unique_ptr<latent::LaserTrainer> trainer;
    std::unique_ptr<rl::SacAgent> agent;
    switch (arm) {
      case Arm::original:
        agent = std::make_unique<rl::SacAgent>(spec, config.sac, seed);
        break;
      case Arm::latent_frozen:
        model = std::make_shared<latent::LaserModel>(*base);
        agent = std::make_unique<rl::SacAgent>(spec, config.sac, model, false, seed);
        break;
      case Arm::latent_online:
        model = std::make_shared<latent::LaserModel>(config.laser.model, spec, seed ^ kOnlineModelSalt);
        trainer = std::make_unique<latent::LaserTrainer>(model, config.laser.train.adam);
        agent = std::make_unique<rl::SacAgent>(spec, config.sac, model, true, seed);
        break;
    }
    rl::TrainPolicyOptions options = config.train;
    options.total_steps = config.steps;
    const std::string stem = seed_stem(arm, seed);
    options.divergence_checkpoint = (dir / (stem + "_diverged.ckpt")).string();
    if (config.stop_at_threshold) {
      options.on_eval = [threshold](const rl::EvalRecord& e) { return e.mean_return < threshold; };
    }
    result.zero_shot.push_back(
        rl::evaluate_policy(*agent, env, options.eval_episodes, options.eval_seed_base).mean_return);

    rl::OnlineLaser online;
    if (trainer) {
      online.trainer = trainer.get();
      online.batch_size = config.laser.train.batch_size;
      online.fit_normalizer = config.laser.train.fit_normalizer;
    }
    fs::create_directories(dir);
    rl::RunRecord run = rl::train_policy(*agent, env, options, seed, trainer ? &online : nullptr);
    write_run_files(run, dir, stem);
    if (model && arm == Arm::latent_online) latent::save_laser((dir / ("laser_seed" + std::to_string(seed) + ".ckpt")).string(), *model);
    result.steps_to_threshold.push_back(steps_to_threshold(run, threshold));
    result.runs.push_back(std::move(run));
  }
  result.median_steps = median_steps(result.steps_to_threshold);
  return result;
}

void write_comparison(const Comparison& comparison, const fs::path& dir) {
  std::string summary = "arm,seed,steps_to_threshold,zero_shot_return\n";
  std::string medians = "arm,median_steps_to_threshold,reached,threshold\n";
  std::vector<Series> series;
  for (const ArmResult* arm : {&comparison.latent, &comparison.original}) {
    const std::string name = arm_name(arm->arm);
    std::size_t reached = 0;
    for (std::size_t k = 0; k < arm->runs.size(); ++k) {
      const auto& steps = arm->steps_to_threshold[k];
      if (steps) ++reached;
      summary += name + "," + std::to_string(arm->runs[k].seed) + "," + (steps ? std::to_string(*steps) : "") + "," +
                 format_real(arm->zero_shot[k]) + "\n";
    }
    medians += name + "," + format_real(arm->median_steps) + "," + std::to_string(reached) + "," +
               format_real(comparison.threshold) + "\n";
    const auto curve = aggregate_evals(arm->runs);
    write_text(dir / (name + "_curve.csv"), curve_csv(curve));
    Series s;
    s.label = name;
    for (const auto& p : curve) {
      s.x.push_back(static_cast<double>(p.env_steps));
      s.y.push_back(p.median);
      s.lower.push_back(p.q25);
      s.upper.push_back(p.q75);
    }
    series.push_back(std::move(s));
  }
  write_text(dir / "summary.csv", summary);
  write_text(dir / "medians.csv", medians);
  ChartOptions options;
  options.title = comparison.id + ": median eval return with interquartile band";
  options.x_label = "env steps";
  options.y_label = "eval return";
  options.reference_y = comparison.threshold;
  write_text(dir / "curves.svg", line_chart(series, options));
}

Comparison run_offline_pipeline(const ExperimentConfig& config) {
  config.validate();
  const auto env = envs::make_env(config.env);
  const ExpertSummary expert = read_expert_summary(config);
  const latent::LaserModel model = run_laser_training(config);
  const fs::path dir = config.out_dir() / config.id;
  Comparison c;
  c.id = config.id;
  c.threshold = expert.threshold;
  c.latent = run_arm(config, Arm::latent_frozen, *env, &model, c.threshold, dir);
  c.original = run_arm(config, Arm::original, *env, nullptr, c.threshold, dir);
  write_comparison(c, dir);
  return c;
}

Comparison run_transfer_pipeline(const ExperimentConfig& config) {
  config.validate();
  const auto base = envs::make_env(config.env);
  const auto env = envs::make_variant(*base, config.variant.empty() ? config.transfer_variant() : config.variant);
  const ExpertSummary expert = read_expert_summary(config);
  const fs::path laser_path = config.resolved_laser();
  require_file(laser_path, "LASER checkpoint (run 'train-laser' or 'exp1' first)");
  const latent::LaserModel model = latent::load_laser(laser_path.string());
  latent::require_same_spec(model.spec(), env->spec());
  const fs::path dir = config.out_dir() / config.id;
  Comparison c;
  c.id = config.id;
  c.threshold = expert.threshold;
  c.latent = run_arm(config, Arm::latent_frozen, *env, &model, c.threshold, dir);
  c.original = run_arm(config, Arm::original, *env, nullptr, c.threshold, dir);
  write_comparison(c, dir);
  return c;
}

Comparison run_online_pipeline(const ExperimentConfig& config) {
  config.validate();
  const auto env = envs::make_env(config.env);
  const ExpertSummary expert = read_expert_summary(config);
  const fs::path dir = config.out_dir() / config.id;
  Comparison c;
  c.id = config.id;
  c.threshold = expert.threshold;
  c.latent = run_arm(config, Arm::latent_online, *env, nullptr, c.threshold, dir);
  c.original = run_arm(config, Arm::original, *env, nullptr, c.threshold, dir);
  write_comparison(c, dir);
  return c;
}

std::vector<TraversalPlan> traversal_plans(const AnalysisSettings& settings, const std::vector<std::size_t>& active,
                                           std::size_t latent_dim) {
  std::vector<std::vector<std::size_t>> combos;
  if (active.size() >= 2) {
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) combos.push_back({active[i], active[j]});
    }
  } else if (active.size() == 1) {
    combos.push_back({active[0]});
  } else {
    for (std::size_t d = 0; d < latent_dim; ++d) combos.push_back({d});
  }
  // Cycle the dim sets first, then five amplitude levels, then four periods.
  std::vector<TraversalPlan> plans;
  const std::size_t n = combos.size();
  for (std::size_t k = 0; k < settings.traversals; ++k) {
    TraversalPlan p;
    p.dims = combos[k % n];
    p.amplitude = settings.amplitude * (0.5 + 0.125 * static_cast<double>((k / n) % 5));
    p.period = settings.period * (1.0 + 0.5 * static_cast<double>((k / (5 * n)) % 4));
    plans.push_back(std::move(p));
  }
  return plans;
}

AnalysisResult run_analysis(const ExperimentConfig& config) {
  config.validate();
  const auto env = envs::make_env(config.env);
  const envs::EnvSpec& spec = env->spec();
  const fs::path laser_path = config.resolved_laser();
  require_file(laser_path, "LASER checkpoint (run 'train-laser' or 'exp1' first)");
  const latent::LaserModel model = latent::load_laser(laser_path.string());
  latent::require_same_spec(model.spec(), spec);
  const fs::path expert_path = config.resolved_expert();
  require_file(expert_path, "expert checkpoint (run 'collect' first)");
  rl::SacAgent expert(spec, config.sac, 0);
  expert.load(expert_path.string());

  const fs::path dir = config.out_dir() / config.id;
  const std::size_t rd = spec.robot_state_dim;
  const std::size_t ad = spec.action_dim;
  const std::size_t L = model.latent_dim();

  // Expert rollouts for the per-dimension encoder traces.
  std::vector<double> actions;
  std::vector<double> robot;
  std::vector<std::pair<std::size_t, std::size_t>> index;  // (rollout, t)
  std::mt19937_64 unused(0);
  for (std::size_t r = 0; r < config.analysis.rollouts; ++r) {
    auto e = env->clone();
    envs::EnvState s = e->reset(kRolloutSeedBase + r);
    for (std::size_t t = 0;; ++t) {
      const std::vector<double> a = envs::clip_action(expert.select_action(s, true, unused), spec);
      const auto sr = envs::robot_state(s, rd);
      actions.insert(actions.end(), a.begin(), a.end());
      robot.insert(robot.end(), sr.begin(), sr.end());
      index.emplace_back(r, t);
      const envs::StepResult res = e->step(a);
      s = res.next;
      if (res.done) break;
    }
  }
  AnalysisResult result;
  result.samples = index.size();
  const Tensor a_t({result.samples, ad}, std::move(actions));
  const Tensor s_t({result.samples, rd}, std::move(robot));
  result.dims = latent::active_dims(model, a_t, s_t);
  const Tensor mu = latent::encode(model, a_t, s_t).mu;

  std::string traces = "rollout,t";
  for (std::size_t d = 0; d < L; ++d) traces += ",mu_" + std::to_string(d);
  traces += "\n";
  std::vector<Series> mu_series(L);
  for (std::size_t d = 0; d < L; ++d) mu_series[d].label = "z" + std::to_string(d);
  for (std::size_t i = 0; i < result.samples; ++i) {
    traces += std::to_string(index[i].first) + "," + std::to_string(index[i].second);
    for (std::size_t d = 0; d < L; ++d) {
      traces += "," + format_real(mu(i, d));
      mu_series[d].x.push_back(static_cast<double>(i));
      mu_series[d].y.push_back(mu(i, d));
    }
    traces += "\n";
  }
  write_text(dir / "mu_traces.csv", traces);
  ChartOptions mu_options;
  mu_options.title = "Encoder means over " + std::to_string(config.analysis.rollouts) + " expert rollouts";
  mu_options.x_label = "sample (rollouts concatenated)";
  mu_options.y_label = "mu";
  write_text(dir / "mu_traces.svg", line_chart(mu_series, mu_options));

  std::string dims_csv = "dim,mu_mean,mu_std,active\n";
  for (std::size_t d = 0; d < L; ++d) {
    const bool on = std::find(result.dims.active.begin(), result.dims.active.end(), d) != result.dims.active.end();
    dims_csv += std::to_string(d) + "," + format_real(result.dims.mu_mean[d]) + "," +
                format_real(result.dims.mu_std[d]) + "," + (on ? "1" : "0") + "\n";
  }
  write_text(dir / "active_dims.csv", dims_csv);

  // Sinusoidal traversals.
  const auto plans = traversal_plans(config.analysis, result.dims.active, L);
  std::string traj = "traversal,t,x,z\n";
  std::string meta = "traversal,dims,amplitude,period,seed,steps,truncated\n";
  std::vector<Series> paths;
  for (std::size_t k = 0; k < plans.size(); ++k) {
    auto e = env->clone();
    latent::Traversal tr = latent::traverse_latent(model, *e, plans[k].dims, plans[k].amplitude, plans[k].period,
                                                   config.analysis.steps, kTraversalSeedBase + k);
    Series s;
    s.label = "traversal " + std::to_string(k);
    for (std::size_t t = 0; t < tr.end_effector.size(); ++t) {
      traj += std::to_string(k) + "," + std::to_string(t) + "," + format_real(tr.end_effector[t][0]) + "," +
              format_real(tr.end_effector[t][1]) + "\n";
      s.x.push_back(tr.end_effector[t][0]);
      s.y.push_back(tr.end_effector[t][1]);
    }
    std::string dims;
    for (std::size_t d : tr.dims) dims += (dims.empty() ? "" : "+") + std::to_string(d);
    meta += std::to_string(k) + "," + dims + "," + format_real(tr.amplitude) + "," + format_real(tr.period) + "," +
            std::to_string(tr.seed) + "," + std::to_string(tr.end_effector.size()) + "," +
            (tr.truncated ? "1" : "0") + "\n";
    paths.push_back(std::move(s));
    result.traversals.push_back(std::move(tr));
  }
  write_text(dir / "trajectories.csv", traj);
  write_text(dir / "traversals.csv", meta);

  ChartOptions traj_options;
  traj_options.title = std::to_string(plans.size()) + " latent traversals: end-effector path";
  traj_options.x_label = "x";
  traj_options.y_label = "height";
  traj_options.legend = false;
  if (const auto* wipe = as_wipe(*env)) {
    const double plane = wipe->params().table_height;
    result.plane_band = 0.1 * wipe->params().workspace_height();
    result.near_plane_fraction = latent::fraction_near_plane(result.traversals, plane, result.plane_band);
    traj_options.reference_y = plane;
  }
  write_text(dir / "trajectories.svg", line_chart(paths, traj_options));

  std::string summary = "metric,value\n";
  summary += "samples," + std::to_string(result.samples) + "\n";
  summary += "active_dims," + std::to_string(result.dims.active.size()) + "\n";
  summary += "traversals," + std::to_string(result.traversals.size()) + "\n";
  if (result.near_plane_fraction) {
    summary += "plane_band," + format_real(result.plane_band) + "\n";
    summary += "near_plane_fraction," + format_real(*result.near_plane_fraction) + "\n";
  }
  write_text(dir / "analysis_summary.csv", summary);
  return result;
}

fs::path plot_csv(const fs::path& csv) {
  std::istringstream in(read_text(csv));
  std::string line;
  if (!std::getline(in, line)) throw LoadError("empty CSV '" + csv.string() + "'");
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(l);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  const auto header = split(line);
  if (header.size() < 2) throw LoadError("CSV '" + csv.string() + "' needs at least two columns");
  std::optional<std::size_t> seed_col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "seed") seed_col = i;
  }
  std::map<std::string, Series> groups;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() < 2) throw LoadError(csv.string() + ":" + std::to_string(line_no) + ": too few columns");
    if (cells[0].empty() || cells[1].empty()) continue;
    const std::string key = seed_col && *seed_col < cells.size() ? "seed " + cells[*seed_col] : header[1];
    Series& s = groups[key];
    s.label = key;
    try {
      s.x.push_back(std::stod(cells[0]));
      s.y.push_back(std::stod(cells[1]));
    } catch (const std::exception&) {
      throw LoadError(csv.string() + ":" + std::to_string(line_no) + ": non-numeric value");
    }
  }
  std::vector<Series> series;
  for (auto& [key, s] : groups) series.push_back(std::move(s));
  ChartOptions options;
  options.title = csv.filename().string();
  options.x_label = header[0];
  options.y_label = header[1];
  fs::path out = csv;
  out.replace_extension(".svg");
  write_text(out, line_chart(series, options));
  return out;
}

}  // namespace laser::harness
