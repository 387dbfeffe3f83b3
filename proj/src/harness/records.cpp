#include "laser/harness/records.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "laser/error.hpp"

namespace laser::harness {

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string run_csv(const rl::RunRecord& run) {
  std::string s = "env_steps,episode_return,episode_len,seed\n";
  for (const auto& e : run.episodes) {
    s += std::to_string(e.env_steps) + "," + format_real(e.episode_return) + "," + std::to_string(e.episode_len) +
         "," + std::to_string(e.seed) + "\n";
  }
  return s;
}

std::string loss_csv(const rl::RunRecord& run) {
  const bool laser = std::any_of(run.updates.begin(), run.updates.end(), [](const auto& u) { return u.laser; });
  std::string s = "update,env_steps,q1,q2,actor,alpha_loss,alpha,log_prob";
  if (laser) s += ",laser_rec,laser_dyn,laser_kl,laser_total";
  s += "\n";
  for (const auto& u : run.updates) {
    s += std::to_string(u.update) + "," + std::to_string(u.env_steps) + "," + format_real(u.sac.q1) + "," +
         format_real(u.sac.q2) + "," + format_real(u.sac.actor) + "," + format_real(u.sac.alpha_loss) + "," +
         format_real(u.sac.alpha) + "," + format_real(u.sac.log_prob);
    if (laser) {
      if (u.laser) {
        s += "," + format_real(u.laser->rec) + "," + format_real(u.laser->dyn) + "," + format_real(u.laser->kl) + "," +
             format_real(u.laser->total);
      } else {
        s += ",,,,";
      }
    }
    s += "\n";
  }
  return s;
}

std::string eval_csv(const std::vector<rl::RunRecord>& runs) {
  std::string s = "env_steps,mean_return,success_rate,seed\n";
  for (const auto& run : runs) {
    for (const auto& e : run.evals) {
      s += std::to_string(e.env_steps) + "," + format_real(e.mean_return) + "," + format_real(e.success_rate) + "," +
           std::to_string(run.seed) + "\n";
    }
  }
  return s;
}

std::optional<std::size_t> steps_to_threshold(const rl::RunRecord& run, double threshold) {
  for (const auto& e : run.evals) {
    if (e.mean_return >= threshold) return e.env_steps;
  }
  return std::nullopt;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  if (lo == hi || std::isinf(values[hi])) return values[lo] + (frac > 0 && std::isinf(values[hi]) ? values[hi] : 0.0);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median_steps(const std::vector<std::optional<std::size_t>>& steps) {
  std::vector<double> v;
  for (const auto& s : steps) v.push_back(s ? static_cast<double>(*s) : std::numeric_limits<double>::infinity());
  return quantile(v, 0.5);
}

std::vector<CurvePoint> aggregate_evals(const std::vector<rl::RunRecord>& runs) {
  std::map<std::size_t, std::vector<double>> by_step;
  for (const auto& run : runs) {
    for (const auto& e : run.evals) by_step[e.env_steps].push_back(e.mean_return);
  }
  std::vector<CurvePoint> out;
  for (const auto& [steps, values] : by_step) {
    out.push_back({steps, quantile(values, 0.5), quantile(values, 0.25), quantile(values, 0.75)});
  }
  return out;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string s = "env_steps,median,q25,q75\n";
  for (const auto& p : curve) {
    s += std::to_string(p.env_steps) + "," + format_real(p.median) + "," + format_real(p.q25) + "," +
         format_real(p.q75) + "\n";
  }
  return s;
}

}  // namespace laser::harness
