#include <doctest.h>

#include <cstring>

#include "gollic/preproc.hpp"
#include "gollic/rng.hpp"

using namespace gollic;

namespace {

RgbImage random_image(Rng& rng, int64_t h, int64_t w) {
  RgbImage img;
  img.height = h;
  img.width = w;
  img.samples.resize(static_cast<size_t>(h * w * 3));
  for (auto& s : img.samples) s = static_cast<uint8_t>(rng.below(256));
  return img;
}

RgbImage one_pixel(int r, int g, int b) {
  RgbImage img;
  img.height = img.width = 1;
  img.samples = {static_cast<uint8_t>(r), static_cast<uint8_t>(g), static_cast<uint8_t>(b)};
  return img;
}

bool triple_round_trips(int r, int g, int b) {
  RgbImage img = one_pixel(r, g, b);
  RgbImage back = rct_inverse(rct_forward(img));
  return back.samples == img.samples;
}

}  // namespace

TEST_CASE("color transform known values") {
  PlanarImage gray = rct_forward(one_pixel(100, 100, 100));
  CHECK(gray.at(0, 0, 0) == 100);
  CHECK(gray.at(1, 0, 0) == 0);
  CHECK(gray.at(2, 0, 0) == 0);

  PlanarImage red = rct_forward(one_pixel(255, 0, 0));
  CHECK(red.at(0, 0, 0) == 64);  // round(255/4)
  CHECK(red.at(1, 0, 0) == 255);
  CHECK(red.at(2, 0, 0) == 0);

  PlanarImage green = rct_forward(one_pixel(0, 255, 0));
  CHECK(green.at(1, 0, 0) == 1);  // -255 mod 256
  CHECK(green.at(2, 0, 0) == 1);
}

TEST_CASE("color transform round trip: corners plus a million random triples") {
  int corner_vals[2] = {0, 255};
  for (int r : corner_vals)
    for (int g : corner_vals)
      for (int b : corner_vals) CHECK(triple_round_trips(r, g, b));
  Rng rng(7);
  int failures = 0;
  for (int i = 0; i < 1000000; ++i) {
    int r = static_cast<int>(rng.below(256));
    int g = static_cast<int>(rng.below(256));
    int b = static_cast<int>(rng.below(256));
    if (!triple_round_trips(r, g, b)) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("med_predict piecewise branches") {
  CHECK(med_predict(10, 20, 25) == 10);  // c >= max -> min
  CHECK(med_predict(10, 20, 5) == 20);   // c <= min -> max
  CHECK(med_predict(10, 20, 15) == 15);  // else a+b-c
}

TEST_CASE("med_predict matches a brute-force oracle on a 32^3 grid") {
  for (int a = 0; a < 256; a += 8)
    for (int b = 0; b < 256; b += 8)
      for (int c = 0; c < 256; c += 8) {
        int mn = std::min(a, b), mx = std::max(a, b);
        int expect = c >= mx ? mn : (c <= mn ? mx : a + b - c);
        CHECK(med_predict(a, b, c) == expect);
      }
}

TEST_CASE("residuals of a constant channel are zero") {
  PlanarImage img(5, 5, 1);
  for (auto& v : img.data) v = 77;
  PlanarImage res = residual_forward(img);
  // (0,0) predicts 0, so the first residual is the value itself
  CHECK(res.at(0, 0, 0) == 77);
  for (int64_t y = 0; y < 5; ++y)
    for (int64_t x = 0; x < 5; ++x)
      if (y != 0 || x != 0) CHECK(res.at(0, y, x) == 0);
}

TEST_CASE("residual round trip on random images") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    int64_t h = 1 + static_cast<int64_t>(rng.below(24));
    int64_t w = 1 + static_cast<int64_t>(rng.below(24));
    PlanarImage img(h, w, 3);
    for (auto& v : img.data) v = static_cast<uint8_t>(rng.below(256));
    PlanarImage back = residual_inverse(residual_forward(img));
    CHECK(back.data == img.data);
  }
}

TEST_CASE("patchify grid arithmetic and round trip") {
  Rng rng(9);
  RgbImage img = random_image(rng, 130, 200);
  PlanarImage res = residual_forward(pad_to_multiple(rct_forward(img), 128));
  ResidualStack stack = patchify(res, 128, 130, 200);
  CHECK(stack.patches == 4);
  CHECK(stack.symbols.shape == std::vector<int64_t>{4, 3, 128, 128});
  PlanarImage back = unpatchify(stack);
  CHECK(back.height == 256);
  CHECK(back.width == 256);
  CHECK(back.data == res.data);

  RgbImage small = random_image(rng, 128, 128);
  ResidualStack one = patchify(residual_forward(rct_forward(small)), 128, 128, 128);
  CHECK(one.patches == 1);

  CHECK_THROWS_AS(patchify(res, 12, 130, 200), ShapeError);
}

TEST_CASE("full preprocessing chain is the identity") {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    int64_t h = 1 + static_cast<int64_t>(rng.below(50));
    int64_t w = 1 + static_cast<int64_t>(rng.below(50));
    RgbImage img = random_image(rng, h, w);
    PlanarImage padded = pad_to_multiple(rct_forward(img), 16);
    ResidualStack stack = patchify(residual_forward(padded), 16, h, w);
    PlanarImage ycc = residual_inverse(unpatchify(stack));
    RgbImage back = rct_inverse(crop(ycc, h, w));
    CHECK(back.samples == img.samples);
  }
  // structured gradients too
  RgbImage grad;
  grad.height = grad.width = 33;
  grad.samples.resize(33 * 33 * 3);
  for (int64_t y = 0; y < 33; ++y)
    for (int64_t x = 0; x < 33; ++x) {
      grad.at(y, x, 0) = static_cast<uint8_t>((x * 7) & 255);
      grad.at(y, x, 1) = static_cast<uint8_t>((y * 5) & 255);
      grad.at(y, x, 2) = static_cast<uint8_t>((x + y) & 255);
    }
  PlanarImage padded = pad_to_multiple(rct_forward(grad), 16);
  ResidualStack stack = patchify(residual_forward(padded), 16, 33, 33);
  RgbImage back = rct_inverse(crop(residual_inverse(unpatchify(stack)), 33, 33));
  CHECK(back.samples == grad.samples);
}

TEST_CASE("single pixel image survives the chain") {
  RgbImage px = one_pixel(3, 254, 17);
  PlanarImage padded = pad_to_multiple(rct_forward(px), 8);
  ResidualStack stack = patchify(residual_forward(padded), 8, 1, 1);
  CHECK(stack.patches == 1);
  RgbImage back = rct_inverse(crop(residual_inverse(unpatchify(stack)), 1, 1));
  CHECK(back.samples == px.samples);
}
