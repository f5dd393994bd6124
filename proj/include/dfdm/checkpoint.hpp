#pragma once

#include <filesystem>

#include "dfdm/model.hpp"

namespace dfdm {

// Binary checkpoint layout, little-endian throughout:
//   "DFDM" | version u32 | header_len u32 | header JSON (UTF-8) |
//   parameter tensors in declaration order as raw IEEE-754 f32 |
//   CRC-32 (u32) of every preceding byte.
// The header canonically encodes kind, input shape and hyperparameters, so
// load() rebuilds the exact architecture and then overwrites its parameters.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model<float>& model, const std::filesystem::path& path);
Model<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace dfdm
