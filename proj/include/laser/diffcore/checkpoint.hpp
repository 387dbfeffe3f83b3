#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "json.hpp"
#include "laser/diffcore/tape.hpp"

namespace laser::diff {

// File layout: the line "LASERCKPT1" followed by a JSON document
//   {"meta": {...}, "params": {name: {"shape": [...], "values": [...]}}}
// Values are written with round-trip precision.
inline constexpr const char* kCheckpointMagic = "LASERCKPT1";

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

void store_parameters(Checkpoint& checkpoint, std::span<const Parameter* const> params);
// Copies values into `params` by name. Throws LoadError on a missing name or
// shape mismatch.
void restore_parameters(const Checkpoint& checkpoint, std::span<Parameter* const> params);

}  // namespace laser::diff
