#include "laser/diffcore/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "laser/error.hpp"

namespace laser::diff {

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, tensor] : checkpoint.tensors) {
    params[name] = {{"shape", tensor.shape()},
                    {"values", std::vector<double>(tensor.data().begin(), tensor.data().end())}};
  }
  nlohmann::json doc = {{"meta", checkpoint.meta}, {"params", std::move(params)}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open checkpoint for writing: " + path.string());
  out << kCheckpointMagic << '\n' << doc.dump() << '\n';
  if (!out) throw LoadError("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint: " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) {
    throw LoadError("not a checkpoint (bad magic '" + magic.substr(0, 16) + "'): " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  Checkpoint checkpoint;
  try {
    checkpoint.meta = doc.value("meta", nlohmann::json::object());
    for (const auto& [name, entry] : doc.at("params").items()) {
      auto shape = entry.at("shape").get<Shape>();
      auto values = entry.at("values").get<std::vector<double>>();
      checkpoint.tensors.emplace(name, Tensor(std::move(shape), std::move(values)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const DimensionError& e) {
    throw LoadError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint;
}

void store_parameters(Checkpoint& checkpoint, std::span<const Parameter* const> params) {
  for (const Parameter* p : params) checkpoint.tensors[p->name] = p->value;
}

void restore_parameters(const Checkpoint& checkpoint, std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    auto it = checkpoint.tensors.find(p->name);
    if (it == checkpoint.tensors.end()) throw LoadError("checkpoint lacks parameter '" + p->name + "'");
    if (it->second.shape() != p->value.shape()) {
      throw LoadError("checkpoint parameter '" + p->name + "' has shape " + shape_string(it->second.shape()) +
                      ", expected " + shape_string(p->value.shape()));
    }
    p->value = it->second;
  }
}

}  // namespace laser::diff
