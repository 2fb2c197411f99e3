#pragma once

#include <string>

#include "surgfutr/optim.hpp"
#include "surgfutr/tensor.hpp"

namespace surgfutr {

// Flat binary checkpoint: header (magic "SFTR", version, parameter count)
// followed by per-parameter records (name length, name bytes, rank, dims,
// raw little-endian 64-bit values). Parameters are written in name order so
// identical maps serialize byte-identically.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ParamMap& params);
ParamMap load_checkpoint(const std::string& path, bool requires_grad = true);

// Writes to <path>.tmp then renames, so readers never see partial files.
void atomic_write_file(const std::string& path, const std::string& contents);

}  // namespace surgfutr
