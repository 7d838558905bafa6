#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <string>

#include "gollic/pipeline.hpp"
#include "gollic/rng.hpp"

using namespace gollic;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.patch_size = 16;
  c.clusters = 3;
  c.feature_channels = 6;
  c.latent_channels = 2;
  c.levels = 3;
  c.mixtures = 2;
  c.resnet_blocks = 1;
  c.seed = 77;
  return c;
}

Model tiny_model(uint64_t seed = 77) {
  Model m;
  m.cfg = tiny_config();
  m.cfg.seed = seed;
  m.init();
  return m;
}

RgbImage random_image(Rng& rng, int64_t h, int64_t w) {
  RgbImage img;
  img.height = h;
  img.width = w;
  img.samples.resize(static_cast<size_t>(h * w * 3));
  for (auto& s : img.samples) s = static_cast<uint8_t>(rng.below(256));
  return img;
}

}  // namespace

TEST_CASE("compress/decompress is lossless across sizes, including 1x1") {
  Model m = tiny_model();
  Rng rng(51);
  std::vector<std::pair<int64_t, int64_t>> sizes = {{1, 1},  {1, 40}, {40, 1}, {15, 17},
                                                    {16, 16}, {33, 20}, {48, 48}};
  for (auto [h, w] : sizes) {
    RgbImage img = random_image(rng, h, w);
    CompressResult r = compress_image(m, img);
    RgbImage back = decompress_image(m, r.blob);
    REQUIRE(back.height == h);
    REQUIRE(back.width == w);
    CHECK(back.samples == img.samples);
  }
}

TEST_CASE("raw side-information matches the closed form") {
  Model m = tiny_model();
  Rng rng(52);
  for (int64_t h : {16, 40}) {
    RgbImage img = random_image(rng, h, 33);  // multi-patch grids
    CompressResult r = compress_image(m, img);
    Container c = read_container(r.blob);
    int64_t P = ((h + 15) / 16) * ((33 + 15) / 16);
    double closed = closed_form_raw_bits(m.cfg, P);

    // soft labels are stored raw: exactly 16 bits per word
    CHECK(c.sections[Container::kSoftLabels].payload.size() ==
          static_cast<size_t>(P) * static_cast<size_t>(m.cfg.clusters) * 2);
    // shared latents are uniform-coded: ideal length plus coder slack
    double zs_ideal = m.cfg.clusters * m.cfg.shared_latent_len() * std::log2(25.0);
    double zs_bits = 8.0 * static_cast<double>(c.sections[Container::kSharedLatents].payload.size());
    CHECK(zs_bits <= zs_ideal + 32.0 + 8.0);
    CHECK(r.stream_bits.raw_bits <= closed + 32.0 + 8.0);
    CHECK(r.stream_bits.raw_bits >= 16.0 * static_cast<double>(P * m.cfg.clusters));
  }
}

TEST_CASE("raw cost grows strictly with the cluster count") {
  ModelConfig cfg = tiny_config();
  double prev = -1;
  for (int k : {1, 5, 10, 20}) {
    cfg.clusters = k;
    double bits = closed_form_raw_bits(cfg, 6);
    CHECK(bits > prev);
    CHECK(bits == doctest::Approx(16.0 * 6 * k + k * cfg.shared_latent_len() * std::log2(25.0)));
    prev = bits;
  }
}

TEST_CASE("learning-rate schedule halves every ten epochs") {
  CHECK(lr_for_epoch(1e-4, 0) == doctest::Approx(1e-4));
  CHECK(lr_for_epoch(1e-4, 9) == doctest::Approx(1e-4));
  CHECK(lr_for_epoch(1e-4, 10) == doctest::Approx(5e-5));
  CHECK(lr_for_epoch(1e-4, 25) == doctest::Approx(2.5e-5));
  CHECK(lr_for_epoch(1e-4, 40) == doctest::Approx(6.25e-6));
}

TEST_CASE("first-order entropy baseline brackets") {
  RgbImage flat;
  flat.height = flat.width = 32;
  flat.samples.assign(32 * 32 * 3, 128);
  CHECK(first_order_entropy_bpsp(flat) < 0.05);  // residuals nearly all zero

  Rng rng(53);
  RgbImage noise = random_image(rng, 64, 64);
  double h = first_order_entropy_bpsp(noise);
  CHECK(h > 7.5);
  CHECK(h <= 8.0 + 1e-9);
}

TEST_CASE("decoder refuses a stream from a different model") {
  Model a = tiny_model(1);
  Model b = tiny_model(2);
  Rng rng(54);
  RgbImage img = random_image(rng, 20, 20);
  CompressResult r = compress_image(a, img);
  CHECK_THROWS_AS(decompress_image(b, r.blob), FormatError);
}

TEST_CASE("model estimate tracks the actual stream lengths") {
  Model m = tiny_model();
  Rng rng(55);
  RgbImage img = random_image(rng, 32, 32);
  CompressResult r = compress_image(m, img);
  // coder slack per stream is bounded; at these sizes 1% + a few bytes covers it
  CHECK(r.stream_bits.residual_bits <= r.model_estimate.residual_bits * 1.01 + 64.0);
  CHECK(r.stream_bits.residual_bits >= r.model_estimate.residual_bits * 0.99 - 64.0);
  CHECK(r.stream_bits.has_latent1);
  CHECK(r.stream_bits.has_cluster);
  CHECK(8.0 * static_cast<double>(r.blob.size()) >= r.stream_bits.total_bits());
}

TEST_CASE("training lowers the loss on a tiny corpus and logs line json") {
  Model m = tiny_model();
  Rng rng(56);
  std::vector<ResidualStack> data;
  for (int i = 0; i < 2; ++i) {
    RgbImage img = random_image(rng, 16, 16);
    // mostly-flat images so there is something to learn quickly
    for (size_t j = 0; j < img.samples.size(); ++j)
      img.samples[j] = static_cast<uint8_t>(100 + (img.samples[j] & 7));
    data.push_back(preprocess_image(img, m.cfg.patch_size));
  }
  TrainOptions opt;
  opt.epochs = 6;
  opt.lr = 5e-4f;
  opt.log_path = "train_log_test.jsonl";
  auto stats = train_model(m, data, opt);
  REQUIRE(stats.size() == 12);
  for (const auto& s : stats) CHECK(std::isfinite(s.bpsp));
  double first = (stats[0].bpsp + stats[1].bpsp) / 2;
  double last = (stats[10].bpsp + stats[11].bpsp) / 2;
  CHECK(last < first);

  std::ifstream log("train_log_test.jsonl");
  REQUIRE(log.good());
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j.contains("epoch"));
    CHECK(j.contains("lr"));
    CHECK(j.contains("bpsp"));
    ++lines;
  }
  CHECK(lines == 12);
  std::remove("train_log_test.jsonl");

  // the trained model still decodes its own streams exactly
  RgbImage img = random_image(rng, 20, 13);
  CompressResult r = compress_image(m, img);
  CHECK(decompress_image(m, r.blob).samples == img.samples);
}

TEST_CASE("eval reports timing and per-stream bits") {
  Model m = tiny_model();
  Rng rng(57);
  RgbImage img = random_image(rng, 24, 24);
  EvalEntry e = eval_image(m, img, "x");
  CHECK(e.ok);
  CHECK(e.height == 24);
  CHECK(e.width == 24);
  CHECK(e.bpsp > 0);
  CHECK(e.seconds >= 0);
  CHECK(e.error.empty());
}

TEST_CASE("inspect exposes the patch-to-cluster assignment") {
  Model m = tiny_model();
  Rng rng(58);
  RgbImage img = random_image(rng, 33, 40);
  InspectArtifacts art = inspect_image(m, img);
  CHECK(art.grid_h == 3);
  CHECK(art.grid_w == 3);
  REQUIRE(art.cluster_of_patch.size() == 9);
  for (int c : art.cluster_of_patch) {
    CHECK(c >= 0);
    CHECK(c < m.cfg.clusters);
  }
  CHECK(art.c_fixed.shape == std::vector<int64_t>{9, 3});
  CHECK(art.zs.shape == std::vector<int64_t>{3, m.cfg.shared_latent_len()});
}
