#include "laser/latent/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "laser/diffcore/checkpoint.hpp"
#include "laser/diffcore/gaussian.hpp"
#include "laser/diffcore/ops.hpp"
#include "laser/error.hpp"

namespace laser::latent {

using diff::Activation;
using diff::Mlp;
using diff::ParamMode;
using diff::Tape;
using diff::Tensor;
using diff::Var;

namespace {

std::vector<std::size_t> layer_dims(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

Tensor row_tensor(const std::vector<double>& values) { return Tensor({1, values.size()}, values); }

void require_cols(const Tensor& t, std::size_t cols, const char* what) {
  if (t.rank() != 2 || t.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected [n, " + std::to_string(cols) + "], got " +
                         diff::shape_string(t.shape()));
  }
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw DimensionError("concat: row counts differ");
  Tensor out({a.rows(), a.cols() + b.cols()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
    for (std::size_t c = 0; c < b.cols(); ++c) out(r, a.cols() + c) = b(r, c);
  }
  return out;
}

Tensor normalized_states(const LaserModel& model, const Tensor& s_r) {
  require_cols(s_r, model.robot_state_dim(), "robot state");
  const auto& n = model.normalizer();
  Tensor out = s_r;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - n.mean[c]) / n.scale[c];
  }
  return out;
}

Var normalized_states(const LaserModel& model, Var s_r) {
  require_cols(s_r.value(), model.robot_state_dim(), "robot state");
  Tape& tape = s_r.tape();
  const auto& n = model.normalizer();
  std::vector<double> inv(n.scale.size());
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 / n.scale[i];
  return diff::mul(diff::sub(s_r, tape.constant(row_tensor(n.mean))), tape.constant(row_tensor(inv)));
}

void require_latent(const LaserModel& model, const Tensor& z) { require_cols(z, model.latent_dim(), "latent action"); }

}  // namespace

void LaserConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("laser: latent_dim must be at least 1");
  if (beta_rec < 0.0 || beta_dyn < 0.0 || beta_kl < 0.0) throw ConfigError("laser: loss weights must be non-negative");
  if (hidden.empty()) throw ConfigError("laser: need at least one hidden layer");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("laser: hidden widths must be positive");
  }
  if (!(latent_bound > 0.0)) throw ConfigError("laser: latent_bound must be positive");
}

nlohmann::json LaserConfig::to_json() const {
  return {{"latent_dim", latent_dim}, {"flag_c", flag_c},     {"flag_d", flag_d},
          {"flag_vae", flag_vae},     {"beta_rec", beta_rec}, {"beta_dyn", beta_dyn},
          {"beta_kl", beta_kl},       {"hidden", hidden},     {"latent_bound", latent_bound}};
}

LaserConfig LaserConfig::from_json(const nlohmann::json& j) {
  LaserConfig c;
  try {
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.flag_c = j.at("flag_c").get<bool>();
    c.flag_d = j.at("flag_d").get<bool>();
    c.flag_vae = j.at("flag_vae").get<bool>();
    c.beta_rec = j.at("beta_rec").get<double>();
    c.beta_dyn = j.at("beta_dyn").get<double>();
    c.beta_kl = j.at("beta_kl").get<double>();
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.latent_bound = j.at("latent_bound").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("laser config: ") + e.what());
  }
  c.validate();
  return c;
}

LaserModel::LaserModel(const LaserConfig& config, const envs::EnvSpec& spec, std::uint64_t seed)
    : config_(config), spec_(spec) {
  config_.validate();
  spec_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t a = spec_.action_dim;
  const std::size_t sr = spec_.robot_state_dim;
  const std::size_t z = config_.latent_dim;
  const std::size_t cond = config_.flag_c ? sr : 0;
  encoder_ = Mlp("laser.encoder", layer_dims(a + cond, config_.hidden, 2 * z), Activation::relu,
                 Activation::identity, rng);
  encoder_.zero_output_layer();
  decoder_ = Mlp("laser.decoder", layer_dims(cond + z, config_.hidden, a), Activation::relu, Activation::tanh, rng);
  dynamics_ = Mlp("laser.dynamics", layer_dims(sr + z, config_.hidden, sr), Activation::relu,
                  Activation::identity, rng);
  normalizer_ = {std::vector<double>(sr, 0.0), std::vector<double>(sr, 1.0)};
  std::vector<double> mid(a);
  std::vector<double> half(a);
  for (std::size_t i = 0; i < a; ++i) {
    mid[i] = 0.5 * (spec_.action_low[i] + spec_.action_high[i]);
    half[i] = 0.5 * (spec_.action_high[i] - spec_.action_low[i]);
  }
  action_mid_ = row_tensor(mid);
  action_half_ = row_tensor(half);
}

void LaserModel::set_normalizer(StateNormalizer normalizer) {
  if (normalizer.mean.size() != robot_state_dim() || normalizer.scale.size() != robot_state_dim()) {
    throw DimensionError("laser: normalizer size does not match robot_state_dim");
  }
  for (double s : normalizer.scale) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ContractError("laser: normalizer scales must be positive");
  }
  normalizer_ = std::move(normalizer);
}

void LaserModel::fit_normalizer(const Tensor& robot_states) {
  require_cols(robot_states, robot_state_dim(), "fit_normalizer");
  const std::size_t n = robot_states.rows();
  StateNormalizer out{std::vector<double>(robot_state_dim(), 0.0), std::vector<double>(robot_state_dim(), 1.0)};
  for (std::size_t c = 0; c < robot_state_dim(); ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) sum += robot_states(r, c);
    const double m = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t r = 0; r < n; ++r) sq += (robot_states(r, c) - m) * (robot_states(r, c) - m);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    out.mean[c] = m;
    // Constant features keep unit scale rather than exploding.
    out.scale[c] = sd > 1e-6 ? sd : 1.0;
  }
  set_normalizer(std::move(out));
}

std::vector<diff::Parameter*> LaserModel::parameters() {
  std::vector<diff::Parameter*> out;
  for (Mlp* net : {&encoder_, &decoder_, &dynamics_}) {
    for (auto* p : net->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<const diff::Parameter*> LaserModel::parameters() const {
  std::vector<const diff::Parameter*> out;
  for (const Mlp* net : {&encoder_, &decoder_, &dynamics_}) {
    for (const auto* p : net->parameters()) out.push_back(p);
  }
  return out;
}

bool LaserModel::all_finite() const {
  const auto params = parameters();
  return std::all_of(params.begin(), params.end(), [](const diff::Parameter* p) { return p->value.all_finite(); });
}

Encoding encode(const LaserModel& model, Var a, Var s_r, ParamMode mode) {
  require_cols(a.value(), model.action_dim(), "encode action");
  Tape& tape = a.tape();
  std::vector<double> inv_half(model.action_dim());
  for (std::size_t i = 0; i < inv_half.size(); ++i) inv_half[i] = 1.0 / model.action_half()[i];
  Var a_n = diff::mul(diff::sub(a, tape.constant(model.action_mid())), tape.constant(row_tensor(inv_half)));
  Var input = a_n;
  if (model.config().flag_c) {
    const std::array<Var, 2> parts{a_n, normalized_states(model, s_r)};
    input = diff::concat_cols(parts);
  }
  Var out = diff::forward_mlp(model.encoder(), input, mode);
  const std::size_t z = model.latent_dim();
  return {diff::slice_cols(out, 0, z),
          diff::clamp(diff::slice_cols(out, z, 2 * z), diff::kLogSigmaMin, diff::kLogSigmaMax)};
}

Var decode(const LaserModel& model, Var s_r, Var a_bar, ParamMode mode) {
  require_latent(model, a_bar.value());
  Tape& tape = a_bar.tape();
  Var input = a_bar;
  if (model.config().flag_c) {
    const std::array<Var, 2> parts{normalized_states(model, s_r), a_bar};
    input = diff::concat_cols(parts);
  }
  Var squashed = diff::forward_mlp(model.decoder(), input, mode);
  return diff::add(diff::mul(squashed, tape.constant(model.action_half())), tape.constant(model.action_mid()));
}

Var predict_next(const LaserModel& model, Var s_r, Var a_bar, ParamMode mode) {
  require_latent(model, a_bar.value());
  const std::array<Var, 2> parts{normalized_states(model, s_r), a_bar};
  return diff::forward_mlp(model.dynamics(), diff::concat_cols(parts), mode);
}

EncodingValue encode(const LaserModel& model, const Tensor& a, const Tensor& s_r) {
  require_cols(a, model.action_dim(), "encode action");
  Tensor a_n = a;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      a_n(r, c) = (a(r, c) - model.action_mid()[c]) / model.action_half()[c];
    }
  }
  const Tensor input = model.config().flag_c ? concat(a_n, normalized_states(model, s_r)) : a_n;
  const Tensor out = diff::forward_mlp(model.encoder(), input);
  const std::size_t z = model.latent_dim();
  EncodingValue e{Tensor({out.rows(), z}), Tensor({out.rows(), z})};
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < z; ++c) {
      e.mu(r, c) = out(r, c);
      e.log_sigma(r, c) = std::clamp(out(r, z + c), diff::kLogSigmaMin, diff::kLogSigmaMax);
    }
  }
  return e;
}

Tensor decode(const LaserModel& model, const Tensor& s_r, const Tensor& a_bar) {
  require_latent(model, a_bar);
  const Tensor input = model.config().flag_c ? concat(normalized_states(model, s_r), a_bar) : a_bar;
  Tensor out = diff::forward_mlp(model.decoder(), input);
  const auto& spec = model.spec();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      // mid + half * tanh can round one ulp past a bound when tanh saturates.
      out(r, c) = std::clamp(model.action_mid()[c] + model.action_half()[c] * out(r, c), spec.action_low[c],
                             spec.action_high[c]);
    }
  }
  return out;
}

Tensor predict_next(const LaserModel& model, const Tensor& s_r, const Tensor& a_bar) {
  require_latent(model, a_bar);
  return diff::forward_mlp(model.dynamics(), concat(normalized_states(model, s_r), a_bar));
}

Var mean_squared_norm(Var target, Var prediction) {
  return diff::mean(diff::row_sum(diff::square(diff::sub(target, prediction))));
}

Var loss_kl(Var mu, Var log_sigma) {
  // 0.5 (mu^2 + exp(2 log_sigma) - 1 - 2 log_sigma)
  Var terms = diff::sub(diff::add(diff::square(mu), diff::exp(diff::scale(log_sigma, 2.0))),
                        diff::add_scalar(diff::scale(log_sigma, 2.0), 1.0));
  return diff::mean(diff::row_sum(diff::scale(terms, 0.5)));
}

double weighted_total(const LaserConfig& config, double rec, double dyn, double kl) {
  double total = config.beta_rec * rec;
  if (config.flag_d) total += config.beta_dyn * dyn;
  if (config.flag_vae) total += config.beta_kl * kl;
  return total;
}

LossTerms total_loss(const LaserModel& model, Tape& tape, const LaserBatch& batch, const Tensor* noise) {
  const LaserConfig& cfg = model.config();
  Var s_r = tape.constant(batch.s_r);
  Var a = tape.constant(batch.a);
  Encoding enc = encode(model, a, s_r);
  Var z = enc.mu;
  if (noise != nullptr && cfg.flag_vae) {
    z = diff::gaussian_reparam_sample(enc.mu, enc.log_sigma, tape.constant(*noise));
  }

  LossTerms out;
  out.rec = mean_squared_norm(a, decode(model, s_r, z));
  if (cfg.flag_d) {
    out.dyn = mean_squared_norm(tape.constant(batch.s_r_next), predict_next(model, s_r, z));
  } else {
    out.dyn = tape.constant(Tensor::scalar(0.0));
  }
  if (cfg.flag_vae) {
    out.kl = loss_kl(enc.mu, enc.log_sigma);
  } else {
    out.kl = tape.constant(Tensor::scalar(0.0));
  }

  Var total = diff::scale(out.rec, cfg.beta_rec);
  if (cfg.flag_d) total = diff::add(total, diff::scale(out.dyn, cfg.beta_dyn));
  if (cfg.flag_vae) total = diff::add(total, diff::scale(out.kl, cfg.beta_kl));
  out.total = total;
  out.components = {{"rec", out.rec.value().item()},
                    {"dyn", out.dyn.value().item()},
                    {"kl", out.kl.value().item()},
                    {"total", out.total.value().item()}};
  return out;
}

std::map<std::string, double> evaluate_losses(const LaserModel& model, const LaserBatch& batch) {
  Tape tape;
  return total_loss(model, tape, batch, nullptr).components;
}

nlohmann::json spec_to_json(const envs::EnvSpec& spec) {
  return {{"name", spec.name},
          {"state_dim", spec.state_dim},
          {"robot_state_dim", spec.robot_state_dim},
          {"action_dim", spec.action_dim},
          {"action_low", spec.action_low},
          {"action_high", spec.action_high},
          {"max_episode_steps", spec.max_episode_steps},
          {"reward_bound", spec.reward_bound}};
}

envs::EnvSpec spec_from_json(const nlohmann::json& j) {
  envs::EnvSpec s;
  try {
    s.name = j.at("name").get<std::string>();
    s.state_dim = j.at("state_dim").get<std::size_t>();
    s.robot_state_dim = j.at("robot_state_dim").get<std::size_t>();
    s.action_dim = j.at("action_dim").get<std::size_t>();
    s.action_low = j.at("action_low").get<std::vector<double>>();
    s.action_high = j.at("action_high").get<std::vector<double>>();
    s.max_episode_steps = j.at("max_episode_steps").get<std::size_t>();
    s.reward_bound = j.at("reward_bound").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("env spec: ") + e.what());
  }
  s.validate();
  return s;
}

void save_laser(const std::string& path, const LaserModel& model) {
  diff::Checkpoint ckpt;
  ckpt.meta = {{"kind", "laser"},
               {"config", model.config().to_json()},
               {"spec", spec_to_json(model.spec())},
               {"normalizer", {{"mean", model.normalizer().mean}, {"scale", model.normalizer().scale}}}};
  const auto params = model.parameters();
  diff::store_parameters(ckpt, params);
  diff::write_checkpoint(path, ckpt);
}

LaserModel load_laser(const std::string& path) {
  const diff::Checkpoint ckpt = diff::read_checkpoint(path);
  if (!ckpt.meta.contains("kind") || ckpt.meta["kind"] != "laser") throw LoadError(path + ": not a LASER checkpoint");
  LaserModel model(LaserConfig::from_json(ckpt.meta.at("config")), spec_from_json(ckpt.meta.at("spec")), 0);
  try {
    model.set_normalizer({ckpt.meta.at("normalizer").at("mean").get<std::vector<double>>(),
                          ckpt.meta.at("normalizer").at("scale").get<std::vector<double>>()});
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path + ": bad normalizer: " + e.what());
  }
  const auto params = model.parameters();
  diff::restore_parameters(ckpt, params);
  return model;
}

}  // namespace laser::latent
