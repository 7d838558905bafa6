#pragma once

#include <string>
#include <vector>

#include "gollic/container.hpp"
#include "gollic/network.hpp"

namespace gollic {

// Binary checkpoint, magic "GTNS", little-endian: u32 version, u64 tensor
// count, then per tensor name length + name, u32 rank, u64 dims, raw f32
// payload. Round trips bit-exactly. The model config travels in a JSON
// sidecar at <path>.json.
std::vector<uint8_t> serialize_params(const Model& m);
void deserialize_params(const std::vector<uint8_t>& bytes, Model& m);

void save_checkpoint(const std::string& path, const Model& m);
Model load_checkpoint(const std::string& path);

// FNV-1a over the serialized parameter bytes; stamped into containers so
// decompression can reject a mismatched model.
uint64_t model_fingerprint(const Model& m);

}  // namespace gollic
