#pragma once

#include <string>

#include "voxnav/nn.hpp"

namespace voxnav {

// Versioned binary parameter checkpoint. Layout, all little-endian:
//   magic "VNWT", format version u32, then per parameter:
//   name length u32, name bytes, ndim u32, dims u32 each, fp64 payload.
// Save followed by load is bit-exact.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const NamedParams& params);

// Reads every record in file order; tensors are plain constants.
NamedParams load_checkpoint(const std::string& path);

// Copies stored values into existing parameters, matched by name.
// Missing or shape-mismatched entries are errors.
void load_checkpoint_into(const std::string& path, const NamedParams& params);

}  // namespace voxnav
