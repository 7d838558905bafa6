#include <doctest.h>

#include "gollic/checkpoint.hpp"
#include "gollic/container.hpp"
#include "gollic/rng.hpp"

using namespace gollic;

namespace {

Container sample_container(Rng& rng) {
  Container c;
  c.height = 130;
  c.width = 200;
  c.patch_size = 64;
  c.clusters = 5;
  c.latent_channels = 5;
  c.levels = 3;
  c.model_fingerprint = 0x1234567890abcdefull;
  for (int i = 0; i < Container::kSectionCount; ++i) {
    size_t n = 1 + rng.below(300);
    c.sections[static_cast<size_t>(i)].payload.resize(n);
    for (auto& b : c.sections[static_cast<size_t>(i)].payload)
      b = static_cast<uint8_t>(rng.below(256));
    c.sections[static_cast<size_t>(i)].symbol_count = rng.below(10000);
  }
  return c;
}

}  // namespace

TEST_CASE("container round trip preserves every field") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    Container c = sample_container(rng);
    auto bytes = write_container(c);
    Container d = read_container(bytes);
    CHECK(d.height == c.height);
    CHECK(d.width == c.width);
    CHECK(d.patch_size == c.patch_size);
    CHECK(d.clusters == c.clusters);
    CHECK(d.latent_channels == c.latent_channels);
    CHECK(d.levels == c.levels);
    CHECK(d.model_fingerprint == c.model_fingerprint);
    for (int i = 0; i < Container::kSectionCount; ++i) {
      CHECK(d.sections[static_cast<size_t>(i)].payload == c.sections[static_cast<size_t>(i)].payload);
      CHECK(d.sections[static_cast<size_t>(i)].symbol_count ==
            c.sections[static_cast<size_t>(i)].symbol_count);
    }
  }
}

TEST_CASE("mutated container bytes raise structured errors only") {
  Rng rng(42);
  Container c = sample_container(rng);
  auto bytes = write_container(c);
  int rejected = 0, accepted = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    auto mut = bytes;
    int edits = 1 + static_cast<int>(rng.below(4));
    for (int e = 0; e < edits; ++e)
      mut[rng.below(mut.size())] ^= static_cast<uint8_t>(1 + rng.below(255));
    if (rng.below(5) == 0) mut.resize(rng.below(mut.size() + 1));  // truncations too
    try {
      read_container(mut);
      ++accepted;  // mutation hit a don't-care byte; payload checksums still held
    } catch (const FormatError&) {
      ++rejected;
    }
  }
  CHECK(rejected + accepted == 10000);
  CHECK(rejected > 8000);  // checksums catch payload damage; free header fields may pass
}

TEST_CASE("checkpoint round trip is bit exact") {
  Model m;
  m.cfg.patch_size = 16;
  m.cfg.feature_channels = 6;
  m.cfg.latent_channels = 2;
  m.cfg.clusters = 3;
  m.cfg.mixtures = 2;
  m.cfg.resnet_blocks = 1;
  m.cfg.seed = 99;
  m.init();
  auto bytes = serialize_params(m);
  Model m2;
  m2.cfg = m.cfg;
  deserialize_params(bytes, m2);
  REQUIRE(m2.params.size() == m.params.size());
  auto it = m.params.begin();
  for (const auto& [name, t] : m2.params) {
    CHECK(name == it->first);
    CHECK(t.shape == it->second.shape);
    CHECK(t.data == it->second.data);
    ++it;
  }
  CHECK(model_fingerprint(m) == model_fingerprint(m2));

  // fingerprint is sensitive to any parameter bit
  m2.params.begin()->second.data[0] += 1e-3f;
  CHECK(model_fingerprint(m) != model_fingerprint(m2));
}

TEST_CASE("checkpoint rejects malformed bytes") {
  Model m;
  m.cfg.patch_size = 16;
  m.cfg.feature_channels = 4;
  m.cfg.latent_channels = 2;
  m.cfg.clusters = 2;
  m.cfg.mixtures = 2;
  m.cfg.resnet_blocks = 1;
  m.init();
  auto bytes = serialize_params(m);
  Model target;
  target.cfg = m.cfg;

  auto bad = bytes;
  bad[0] ^= 0xFF;
  CHECK_THROWS_AS(deserialize_params(bad, target), FormatError);

  auto cut = bytes;
  cut.resize(cut.size() / 2);
  CHECK_THROWS_AS(deserialize_params(cut, target), FormatError);

  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(deserialize_params(extra, target), FormatError);
}

TEST_CASE("model config json round trip") {
  ModelConfig c;
  c.patch_size = 32;
  c.clusters = 7;
  c.feature_channels = 12;
  c.levels = 2;
  c.seed = 1234567890123ull;
  ModelConfig d = ModelConfig::from_json(c.to_json());
  CHECK(d.patch_size == c.patch_size);
  CHECK(d.clusters == c.clusters);
  CHECK(d.feature_channels == c.feature_channels);
  CHECK(d.levels == c.levels);
  CHECK(d.seed == c.seed);
  CHECK(d.mixtures == c.mixtures);
}
