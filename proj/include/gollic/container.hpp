#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gollic/range_coder.hpp"

namespace gollic {

class FormatError : public CodecError {
 public:
  explicit FormatError(const std::string& what) : CodecError(what) {}
};

inline uint64_t fnv1a64(const uint8_t* data, size_t n, uint64_t seed = 0xcbf29ce484222325ull) {
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

// On-disk compressed image (.glc). Little-endian. Five sections in decode
// order: raw fixed-point soft labels, uniform-coded shared latents, then the
// z_Q2 / z_Q1 / residual streams. Patch count is recomputed from (H, W, N).
struct Container {
  static constexpr uint32_t kMagic = 0x46434C47u;  // "GLCF"
  static constexpr uint32_t kVersion = 1;
  static constexpr int kSectionCount = 5;
  enum SectionId { kSoftLabels = 0, kSharedLatents = 1, kLatent2 = 2, kLatent1 = 3, kResidual = 4 };

  uint32_t height = 0;
  uint32_t width = 0;
  uint16_t patch_size = 0;
  uint16_t clusters = 0;
  uint16_t latent_channels = 0;
  uint16_t levels = 0;
  uint64_t model_fingerprint = 0;

  struct Section {
    std::vector<uint8_t> payload;
    uint64_t symbol_count = 0;
  };
  std::array<Section, kSectionCount> sections;
};

std::vector<uint8_t> write_container(const Container& c);
Container read_container(const std::vector<uint8_t>& bytes);

}  // namespace gollic
