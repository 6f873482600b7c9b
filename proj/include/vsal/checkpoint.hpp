#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vsal/tensor.hpp"

namespace vsal {

struct CheckpointMeta {
    std::uint32_t step = 0;
    std::uint64_t seed = 0;
    std::uint32_t config_hash = 0;
};

struct Checkpoint {
    std::vector<std::pair<std::string, TensorPtr<float>>> tensors;
    CheckpointMeta meta;
};

// Binary format: magic "VNT1", u32-LE record count, then per record
// u16-LE name length, UTF-8 name, u8 rank, rank x u32-LE dims, row-major
// f32-LE payload. Metadata rides along as a reserved "__meta" record.
// Writes go to a temp file followed by an atomic rename.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a over the raw f32 payloads in record order (excluding "__meta");
// used by the round-trip bit-exactness checks.
std::uint64_t checkpoint_payload_hash(const Checkpoint& ckpt);

// Deterministic hash of a config's JSON-ish identity string.
std::uint32_t fnv1a32(const std::string& s);

}  // namespace vsal
