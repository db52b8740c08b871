#pragma once

#include "morphrl/tape.hpp"

#include <cstdint>
#include <filesystem>
#include <string_view>

namespace morphrl {

/// Binary checkpoint: magic "URM2", u32 version, u64 tensor count, manifest
/// of (name, rows, cols, offset) entries, then raw little-endian f64 data in
/// column-major order. Tensors are written in store order; loading restores
/// values exactly (gradients and optimizer moments start at zero).
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store);
ParamStore load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over raw bytes; used for golden checksums and config hashing.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace morphrl
