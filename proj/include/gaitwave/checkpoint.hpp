#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "gaitwave/nn/layers.hpp"

namespace gaitwave {

// Flat named-tensor archive: one JSON index line
//   {"version":1,"tensors":[{"name","shape","dtype":"f32","offset"}...]}
// followed by the little-endian float32 payload. Offsets are in bytes from
// the start of the payload. Parameters and buffers (running statistics) are
// both stored; `extras` carries additional named tensors such as input
// standardization statistics.
void save_checkpoint(const std::filesystem::path& path, const nn::ParameterStore& store,
                     const std::map<std::string, nn::Tensor>& extras = {});

// Restores every parameter and buffer of `store` by name. Throws FormatError
// when a name is missing or a shape differs, TruncationError on a short
// payload. Returns the tensors of the archive that the store does not own.
std::map<std::string, nn::Tensor> load_checkpoint(const std::filesystem::path& path, nn::ParameterStore& store);

}  // namespace gaitwave
