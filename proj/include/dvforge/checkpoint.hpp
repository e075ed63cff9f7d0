// Parameter checkpoint: versioned header, manifest of (name, shape, offset),
// then raw little-endian 64-bit floats.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dvforge/tensor.hpp"

namespace dvf {

inline constexpr const char* kCheckpointMagic = "DVFORGE-CKPT-1";

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::string& path, const NamedTensors& params);

// Loads values into the given tensors by name; every tensor must be present
// with a matching shape. Throws std::runtime_error on bad magic, missing
// entries, or shape mismatch.
void load_checkpoint(const std::string& path, const NamedTensors& params);

}  // namespace dvf
