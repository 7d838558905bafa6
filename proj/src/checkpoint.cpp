#include "gollic/checkpoint.hpp"

#include <cstring>

#include "gollic/image_io.hpp"

namespace gollic {

namespace {

constexpr uint32_t kMagic = 0x534E5447u;  // "GTNS"
constexpr uint32_t kVersion = 1;

template <typename T>
void put_le(std::vector<uint8_t>& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(const std::vector<uint8_t>& in, size_t& off) {
  if (off + sizeof(T) > in.size()) throw FormatError("checkpoint: truncated");
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in[off + i]) << (8 * i);
  off += sizeof(T);
  return v;
}

}  // namespace

std::vector<uint8_t> serialize_params(const Model& m) {
  std::vector<uint8_t> out;
  put_le<uint32_t>(out, kMagic);
  put_le<uint32_t>(out, kVersion);
  put_le<uint64_t>(out, m.params.size());
  for (const auto& [name, t] : m.params) {
    put_le<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_le<uint32_t>(out, static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape) put_le<uint64_t>(out, static_cast<uint64_t>(d));
    for (float v : t.data) {
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_le<uint32_t>(out, bits);
    }
  }
  return out;
}

void deserialize_params(const std::vector<uint8_t>& bytes, Model& m) {
  size_t off = 0;
  if (get_le<uint32_t>(bytes, off) != kMagic) throw FormatError("checkpoint: bad magic");
  if (get_le<uint32_t>(bytes, off) != kVersion) throw FormatError("checkpoint: unknown version");
  uint64_t count = get_le<uint64_t>(bytes, off);
  std::map<std::string, Tensor> params;
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t nlen = get_le<uint32_t>(bytes, off);
    if (off + nlen > bytes.size()) throw FormatError("checkpoint: truncated name");
    std::string name(reinterpret_cast<const char*>(bytes.data() + off), nlen);
    off += nlen;
    uint32_t rank = get_le<uint32_t>(bytes, off);
    if (rank > 8) throw FormatError("checkpoint: implausible rank");
    std::vector<int64_t> shape(rank);
    for (auto& d : shape) d = static_cast<int64_t>(get_le<uint64_t>(bytes, off));
    Tensor t(shape);
    for (auto& v : t.data) {
      uint32_t bits = get_le<uint32_t>(bytes, off);
      std::memcpy(&v, &bits, 4);
    }
    if (!params.emplace(std::move(name), std::move(t)).second)
      throw FormatError("checkpoint: duplicate tensor name");
  }
  if (off != bytes.size()) throw FormatError("checkpoint: trailing bytes");
  m.params = std::move(params);
}

void save_checkpoint(const std::string& path, const Model& m) {
  write_file(path, serialize_params(m));
  std::string cfg = m.cfg.to_json();
  write_file(path + ".json", std::vector<uint8_t>(cfg.begin(), cfg.end()));
}

Model load_checkpoint(const std::string& path) {
  Model m;
  auto cfg_bytes = read_file(path + ".json");
  m.cfg = ModelConfig::from_json(std::string(cfg_bytes.begin(), cfg_bytes.end()));
  deserialize_params(read_file(path), m);
  // shape audit against the config
  Model probe;
  probe.cfg = m.cfg;
  probe.init();
  if (probe.params.size() != m.params.size())
    throw FormatError(path + ": tensor count does not match config");
  auto it = probe.params.begin();
  for (const auto& [name, t] : m.params) {
    if (it->first != name || it->second.shape != t.shape)
      throw FormatError(path + ": tensor " + name + " does not match config");
    ++it;
  }
  return m;
}

uint64_t model_fingerprint(const Model& m) {
  auto bytes = serialize_params(m);
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace gollic
