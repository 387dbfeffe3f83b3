#include "laser/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "laser/error.hpp"

namespace laser::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing "# comment" that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

[[noreturn]] void bad(const std::string& key, const std::string& raw, const char* expected) {
  throw ConfigError("config key '" + key + "': expected " + expected + ", got '" + raw + "'");
}

std::string as_string(const std::string& key, const std::string& raw) {
  if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"') bad(key, raw, "a quoted string");
  return raw.substr(1, raw.size() - 2);
}

double as_double(const std::string& key, const std::string& raw) {
  char* end = nullptr;
  const double v = std::strtod(raw.c_str(), &end);
  if (raw.empty() || end != raw.c_str() + raw.size()) bad(key, raw, "a number");
  return v;
}

std::uint64_t as_uint(const std::string& key, const std::string& raw) {
  std::string digits;
  for (char c : raw) {
    if (c != '_') digits.push_back(c);
  }
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
    bad(key, raw, "a non-negative integer");
  }
  return std::stoull(digits);
}

bool as_bool(const std::string& key, const std::string& raw) {
  if (raw == "true") return true;
  if (raw == "false") return false;
  bad(key, raw, "true or false");
}

std::vector<std::string> as_list(const std::string& key, const std::string& raw) {
  if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']') bad(key, raw, "a [list]");
  std::vector<std::string> items;
  std::stringstream ss(raw.substr(1, raw.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::vector<std::size_t> as_size_list(const std::string& key, const std::string& raw) {
  std::vector<std::size_t> out;
  for (const auto& item : as_list(key, raw)) out.push_back(as_uint(key, item));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::string s(buf, std::to_chars(buf, buf + sizeof(buf), v).ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string fmt(bool v) { return v ? "true" : "false"; }
std::string quote(const std::string& s) { return "\"" + s + "\""; }

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s + "]";
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define LASER_STR(KEY, MEMBER) \
  Field{KEY, [](ExperimentConfig& c, const std::string& r) { c.MEMBER = as_string(KEY, r); }, \
        [](const ExperimentConfig& c) { return quote(c.MEMBER); }}
#define LASER_REAL(KEY, MEMBER) \
  Field{KEY, [](ExperimentConfig& c, const std::string& r) { c.MEMBER = as_double(KEY, r); }, \
        [](const ExperimentConfig& c) { return fmt(c.MEMBER); }}
#define LASER_UINT(KEY, MEMBER) \
  Field{KEY, [](ExperimentConfig& c, const std::string& r) { c.MEMBER = as_uint(KEY, r); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }}
#define LASER_BOOL(KEY, MEMBER) \
  Field{KEY, [](ExperimentConfig& c, const std::string& r) { c.MEMBER = as_bool(KEY, r); }, \
        [](const ExperimentConfig& c) { return fmt(c.MEMBER); }}
#define LASER_SIZES(KEY, MEMBER) \
  Field{KEY, [](ExperimentConfig& c, const std::string& r) { c.MEMBER = as_size_list(KEY, r); }, \
        [](const ExperimentConfig& c) { return fmt_list(c.MEMBER); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      LASER_STR("experiment.id", id),
      LASER_STR("experiment.env", env),
      Field{"experiment.seeds",
            [](ExperimentConfig& c, const std::string& r) {
              c.seeds.clear();
              for (const auto& item : as_list("experiment.seeds", r)) c.seeds.push_back(as_uint("experiment.seeds", item));
            },
            [](const ExperimentConfig& c) { return fmt_list(c.seeds); }},
      LASER_UINT("experiment.steps", steps),
      LASER_STR("experiment.out", out),
      LASER_REAL("experiment.threshold_fraction", threshold_fraction),
      LASER_BOOL("experiment.stop_at_threshold", stop_at_threshold),

      LASER_REAL("sac.gamma", sac.gamma),
      LASER_REAL("sac.tau", sac.tau),
      LASER_REAL("sac.lr", sac.lr),
      LASER_UINT("sac.batch_size", sac.batch_size),
      LASER_UINT("sac.buffer_capacity", sac.buffer_capacity),
      LASER_SIZES("sac.hidden", sac.hidden),
      LASER_BOOL("sac.auto_alpha", sac.auto_alpha),
      LASER_REAL("sac.initial_alpha", sac.initial_alpha),
      LASER_UINT("sac.pool_size", train.pool_size),
      LASER_UINT("sac.warmup_steps", train.warmup_steps),
      LASER_UINT("sac.eval_every", train.eval_every),
      LASER_UINT("sac.eval_episodes", train.eval_episodes),

      LASER_UINT("laser.latent_dim", laser.model.latent_dim),
      LASER_BOOL("laser.flag_c", laser.model.flag_c),
      LASER_BOOL("laser.flag_d", laser.model.flag_d),
      LASER_BOOL("laser.flag_vae", laser.model.flag_vae),
      LASER_REAL("laser.beta_rec", laser.model.beta_rec),
      LASER_REAL("laser.beta_dyn", laser.model.beta_dyn),
      LASER_REAL("laser.beta_kl", laser.model.beta_kl),
      LASER_SIZES("laser.hidden", laser.model.hidden),
      LASER_REAL("laser.latent_bound", laser.model.latent_bound),
      LASER_UINT("laser.train_steps", laser.train.steps),
      LASER_UINT("laser.batch_size", laser.train.batch_size),
      LASER_REAL("laser.lr", laser.train.adam.lr),
      LASER_BOOL("laser.fit_normalizer", laser.train.fit_normalizer),
      LASER_UINT("laser.seed", laser.seed),

      LASER_UINT("expert.steps", expert.steps),
      LASER_UINT("expert.seed", expert.seed),
      LASER_UINT("expert.episodes", expert.episodes),
      LASER_REAL("expert.stop_return", expert.stop_return),
      LASER_REAL("expert.min_return", expert.min_return),

      LASER_UINT("analysis.rollouts", analysis.rollouts),
      LASER_UINT("analysis.traversals", analysis.traversals),
      LASER_REAL("analysis.amplitude", analysis.amplitude),
      LASER_REAL("analysis.period", analysis.period),
      LASER_UINT("analysis.steps", analysis.steps),

      LASER_STR("paths.dataset", dataset_path),
      LASER_STR("paths.laser", laser_path),
      LASER_STR("paths.expert", expert_path),
  };
  return table;
}

#undef LASER_STR
#undef LASER_REAL
#undef LASER_UINT
#undef LASER_BOOL
#undef LASER_SIZES

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
  ConfigFile file;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  std::size_t number = 0;
  while (std::getline(ss, line)) {
    ++number;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(number);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(where + ": empty key or value");
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside any section");
    file.values_[section + "." + key] = value;
  }
  return file;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

ExperimentConfig ExperimentConfig::from_file(const ConfigFile& file) {
  ExperimentConfig c;
  for (const auto& [key, raw] : file.values()) {
    if (key.rfind("variant.", 0) == 0) {
      c.variant[key.substr(8)] = raw.front() == '"' ? as_string(key, raw) : raw;
      continue;
    }
    bool known = false;
    for (const Field& f : fields()) {
      if (key == f.key) {
        f.set(c, raw);
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_file(ConfigFile::load(path));
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  std::string section;
  for (const Field& f : fields()) {
    const std::string key = f.key;
    const std::string sec = key.substr(0, key.find('.'));
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
      section = sec;
    }
    os << key.substr(sec.size() + 1) << " = " << f.get(*this) << "\n";
  }
  if (!variant.empty()) {
    os << "\n[variant]\n";
    for (const auto& [k, v] : variant) os << k << " = " << quote(v) << "\n";
  }
  return os.str();
}

void ExperimentConfig::validate() const {
  static const std::vector<std::string> ids{"exp1_offline", "exp2_transfer", "exp3_online", "exp4_analysis"};
  if (std::find(ids.begin(), ids.end(), id) == ids.end()) throw ConfigError("unknown experiment id '" + id + "'");
  if (env != "mini_door" && env != "mini_wipe") throw ConfigError("unknown environment '" + env + "'");
  if (seeds.empty()) throw ConfigError("experiment.seeds must not be empty");
  if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0)) {
    throw ConfigError("experiment.threshold_fraction must lie in (0, 1]");
  }
  sac.validate();
  train.validate();
  laser.model.validate();
  if (expert.episodes == 0) throw ConfigError("expert.episodes must be positive");
  if (analysis.rollouts == 0 || analysis.steps == 0) throw ConfigError("analysis counts must be positive");
  if (!(analysis.period > 0.0)) throw ConfigError("analysis.period must be positive");
}

std::filesystem::path ExperimentConfig::out_dir() const {
  if (!out.empty()) return out;
  if (const char* env_out = std::getenv("LASER_OUT"); env_out != nullptr && *env_out != '\0') return env_out;
  return "runs";
}

std::filesystem::path ExperimentConfig::resolved_dataset() const {
  return dataset_path.empty() ? out_dir() / "expert" / "dataset.lds" : std::filesystem::path(dataset_path);
}

std::filesystem::path ExperimentConfig::resolved_laser() const {
  return laser_path.empty() ? out_dir() / "laser" / "laser.ckpt" : std::filesystem::path(laser_path);
}

std::filesystem::path ExperimentConfig::resolved_expert() const {
  return expert_path.empty() ? out_dir() / "expert" / "expert.ckpt" : std::filesystem::path(expert_path);
}

envs::VariantConfig ExperimentConfig::transfer_variant() const {
  if (!variant.empty()) return variant;
  if (env == "mini_door") return {{"damping_scale", "5"}};
  return {{"spot_mode", "circles"}};
}

}  // namespace laser::harness
