#include "gollic/container.hpp"

#include <cstring>

namespace gollic {

namespace {

template <typename T>
void put_le(std::vector<uint8_t>& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(const std::vector<uint8_t>& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw FormatError("container: truncated header");
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in[pos + i]) << (8 * i);
  pos += sizeof(T);
  return v;
}

}  // namespace

std::vector<uint8_t> write_container(const Container& c) {
  std::vector<uint8_t> out;
  put_le<uint32_t>(out, Container::kMagic);
  put_le<uint32_t>(out, Container::kVersion);
  put_le<uint32_t>(out, c.height);
  put_le<uint32_t>(out, c.width);
  put_le<uint16_t>(out, c.patch_size);
  put_le<uint16_t>(out, c.clusters);
  put_le<uint16_t>(out, c.latent_channels);
  put_le<uint16_t>(out, c.levels);
  put_le<uint64_t>(out, c.model_fingerprint);
  for (const auto& s : c.sections) {
    put_le<uint64_t>(out, static_cast<uint64_t>(s.payload.size()));
    put_le<uint64_t>(out, s.symbol_count);
    put_le<uint64_t>(out, fnv1a64(s.payload.data(), s.payload.size()));
  }
  for (const auto& s : c.sections) out.insert(out.end(), s.payload.begin(), s.payload.end());
  return out;
}

Container read_container(const std::vector<uint8_t>& bytes) {
  size_t pos = 0;
  Container c;
  if (get_le<uint32_t>(bytes, pos) != Container::kMagic) throw FormatError("container: bad magic");
  uint32_t version = get_le<uint32_t>(bytes, pos);
  if (version != Container::kVersion)
    throw FormatError("container: unsupported version " + std::to_string(version));
  c.height = get_le<uint32_t>(bytes, pos);
  c.width = get_le<uint32_t>(bytes, pos);
  c.patch_size = get_le<uint16_t>(bytes, pos);
  c.clusters = get_le<uint16_t>(bytes, pos);
  c.latent_channels = get_le<uint16_t>(bytes, pos);
  c.levels = get_le<uint16_t>(bytes, pos);
  c.model_fingerprint = get_le<uint64_t>(bytes, pos);
  if (c.height == 0 || c.width == 0) throw FormatError("container: zero image dimension");
  if (c.height > (1u << 24) || c.width > (1u << 24))
    throw FormatError("container: implausible image dimension");
  if (c.patch_size == 0 || c.patch_size % 8 != 0) throw FormatError("container: bad patch size");
  if (c.clusters == 0) throw FormatError("container: zero clusters");
  if (c.levels == 0 || c.levels > 3) throw FormatError("container: bad level count");
  struct Entry {
    uint64_t len, count, checksum;
  };
  std::array<Entry, Container::kSectionCount> table{};
  uint64_t total = 0;
  for (auto& e : table) {
    e.len = get_le<uint64_t>(bytes, pos);
    e.count = get_le<uint64_t>(bytes, pos);
    e.checksum = get_le<uint64_t>(bytes, pos);
    if (e.len > bytes.size()) throw FormatError("container: section length exceeds file size");
    total += e.len;
  }
  if (pos + total != bytes.size())
    throw FormatError("container: section table does not match file size");
  for (int i = 0; i < Container::kSectionCount; ++i) {
    auto& s = c.sections[static_cast<size_t>(i)];
    const auto& e = table[static_cast<size_t>(i)];
    s.payload.assign(bytes.begin() + static_cast<ptrdiff_t>(pos),
                     bytes.begin() + static_cast<ptrdiff_t>(pos + e.len));
    s.symbol_count = e.count;
    pos += e.len;
    if (fnv1a64(s.payload.data(), s.payload.size()) != e.checksum)
      throw FormatError("container: section " + std::to_string(i) + " checksum mismatch");
  }
  return c;
}

}  // namespace gollic
