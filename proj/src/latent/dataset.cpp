#include "laser/latent/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include "laser/error.hpp"

namespace laser::latent {

namespace {

constexpr char kMagic[8] = {'L', 'A', 'S', 'E', 'R', 'D', 'S', '1'};

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(sizeof(T) == 8);
  auto bytes = std::bit_cast<std::array<char, 8>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), 8);
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  std::array<char, 8> bytes{};
  if (!in.read(bytes.data(), 8)) throw LoadError(path + ": truncated dataset file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  if (k > n) throw ContractError("cannot draw " + std::to_string(k) + " distinct items from " + std::to_string(n));
  // Partial Fisher-Yates; for small k relative to n use rejection on a sorted set.
  if (k * 4 < n) {
    std::vector<std::size_t> out;
    out.reserve(k);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (out.size() < k) {
      const std::size_t i = pick(rng);
      if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
    }
    return out;
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

void require_same_spec(const envs::EnvSpec& stored, const envs::EnvSpec& expected) {
  auto fail = [&](const std::string& field) {
    throw LoadError("dataset/env mismatch in " + field + " (stored env '" + stored.name + "', target env '" +
                    expected.name + "')");
  };
  if (stored.name != expected.name) fail("name");
  if (stored.state_dim != expected.state_dim) fail("state_dim");
  if (stored.robot_state_dim != expected.robot_state_dim) fail("robot_state_dim");
  if (stored.action_dim != expected.action_dim) fail("action_dim");
  if (stored.action_low != expected.action_low || stored.action_high != expected.action_high) fail("action bounds");
}

TransitionDataset::TransitionDataset(envs::EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

void TransitionDataset::add(const envs::EnvState& s, std::span<const double> a, const envs::EnvState& s_next) {
  if (s.full.size() != spec_.state_dim || s_next.full.size() != spec_.state_dim) {
    throw DimensionError("dataset: state size does not match spec");
  }
  if (a.size() != spec_.action_dim) throw DimensionError("dataset: action size does not match spec");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] >= spec_.action_low[i] && a[i] <= spec_.action_high[i])) {
      throw ContractError("dataset: action outside env bounds");
    }
  }
  states_.insert(states_.end(), s.full.begin(), s.full.end());
  actions_.insert(actions_.end(), a.begin(), a.end());
  next_states_.insert(next_states_.end(), s_next.full.begin(), s_next.full.end());
  ++count_;
}

std::span<const double> TransitionDataset::state(std::size_t i) const {
  return std::span<const double>(states_).subspan(i * spec_.state_dim, spec_.state_dim);
}

std::span<const double> TransitionDataset::action(std::size_t i) const {
  return std::span<const double>(actions_).subspan(i * spec_.action_dim, spec_.action_dim);
}

std::span<const double> TransitionDataset::next_state(std::size_t i) const {
  return std::span<const double>(next_states_).subspan(i * spec_.state_dim, spec_.state_dim);
}

LaserBatch TransitionDataset::batch(std::span<const std::size_t> indices) const {
  const std::size_t n = indices.size();
  const std::size_t sr = spec_.robot_state_dim;
  LaserBatch b{diff::Tensor({n, sr}), diff::Tensor({n, spec_.action_dim}), diff::Tensor({n, sr})};
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = indices[r];
    if (i >= count_) throw ContractError("dataset: index out of range");
    const auto s = state(i);
    const auto a = action(i);
    const auto s2 = next_state(i);
    for (std::size_t c = 0; c < sr; ++c) {
      b.s_r(r, c) = s[c];
      b.s_r_next(r, c) = s2[c];
    }
    for (std::size_t c = 0; c < a.size(); ++c) b.a(r, c) = a[c];
  }
  return b;
}

LaserBatch TransitionDataset::all() const {
  std::vector<std::size_t> idx(count_);
  std::iota(idx.begin(), idx.end(), 0);
  return batch(idx);
}

diff::Tensor TransitionDataset::robot_states() const { return all().s_r; }

std::pair<TransitionDataset, TransitionDataset> TransitionDataset::split(std::size_t count) const {
  if (count > count_) throw ContractError("dataset: split point beyond dataset size");
  TransitionDataset head(spec_);
  TransitionDataset tail(spec_);
  for (std::size_t i = 0; i < count_; ++i) {
    envs::EnvState s{{state(i).begin(), state(i).end()}};
    envs::EnvState s2{{next_state(i).begin(), next_state(i).end()}};
    (i < count ? head : tail).add(s, action(i), s2);
  }
  return {std::move(head), std::move(tail)};
}

void TransitionDataset::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  put<std::uint64_t>(out, spec_.name.size());
  out.write(spec_.name.data(), static_cast<std::streamsize>(spec_.name.size()));
  put<std::uint64_t>(out, spec_.state_dim);
  put<std::uint64_t>(out, spec_.robot_state_dim);
  put<std::uint64_t>(out, spec_.action_dim);
  put<std::uint64_t>(out, spec_.max_episode_steps);
  put<std::uint64_t>(out, count_);
  put<double>(out, spec_.reward_bound);
  for (double v : spec_.action_low) put<double>(out, v);
  for (double v : spec_.action_high) put<double>(out, v);
  for (std::size_t i = 0; i < count_; ++i) {
    for (double v : state(i)) put<double>(out, v);
    for (double v : action(i)) put<double>(out, v);
    for (double v : next_state(i)) put<double>(out, v);
  }
  if (!out) throw Error("failed writing dataset '" + path + "'");
}

TransitionDataset TransitionDataset::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open dataset '" + path + "'");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw LoadError(path + ": not a LASERDS1 dataset");
  envs::EnvSpec spec;
  const auto name_len = get<std::uint64_t>(in, path);
  if (name_len > 4096) throw LoadError(path + ": implausible env name length");
  spec.name.resize(name_len);
  if (!in.read(spec.name.data(), static_cast<std::streamsize>(name_len))) throw LoadError(path + ": truncated header");
  spec.state_dim = get<std::uint64_t>(in, path);
  spec.robot_state_dim = get<std::uint64_t>(in, path);
  spec.action_dim = get<std::uint64_t>(in, path);
  spec.max_episode_steps = get<std::uint64_t>(in, path);
  const auto count = get<std::uint64_t>(in, path);
  spec.reward_bound = get<double>(in, path);
  if (spec.state_dim > 1 << 20 || spec.action_dim > 1 << 20) throw LoadError(path + ": implausible dimensions");
  for (std::size_t i = 0; i < spec.action_dim; ++i) spec.action_low.push_back(get<double>(in, path));
  for (std::size_t i = 0; i < spec.action_dim; ++i) spec.action_high.push_back(get<double>(in, path));
  try {
    spec.validate();
  } catch (const ContractError& e) {
    throw LoadError(path + ": invalid header: " + e.what());
  }
  TransitionDataset ds(spec);
  envs::EnvState s{std::vector<double>(spec.state_dim)};
  envs::EnvState s2{std::vector<double>(spec.state_dim)};
  std::vector<double> a(spec.action_dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    for (double& v : s.full) v = get<double>(in, path);
    for (double& v : a) v = get<double>(in, path);
    for (double& v : s2.full) v = get<double>(in, path);
    ds.add(s, a, s2);
  }
  return ds;
}

TransitionDataset TransitionDataset::load_for(const std::string& path, const envs::EnvSpec& expected) {
  TransitionDataset ds = load(path);
  require_same_spec(ds.spec(), expected);
  return ds;
}

}  // namespace laser::latent
