#pragma once

#include <cstdint>
#include <vector>

#include "gollic/tensor.hpp"

namespace gollic {

// Interleaved 8-bit RGB, the codec's input/output unit.
struct RgbImage {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> samples;  // height*width*3, RGB interleaved

  uint8_t& at(int64_t y, int64_t x, int c) {
    return samples[static_cast<size_t>((y * width + x) * 3 + c)];
  }
  uint8_t at(int64_t y, int64_t x, int c) const {
    return samples[static_cast<size_t>((y * width + x) * 3 + c)];
  }
};

// Planar 8-bit image; used for YCrCb and residual planes.
struct PlanarImage {
  int64_t height = 0;
  int64_t width = 0;
  int channels = 0;
  std::vector<uint8_t> data;  // channel-major planes

  PlanarImage() = default;
  PlanarImage(int64_t h, int64_t w, int c)
      : height(h), width(w), channels(c), data(static_cast<size_t>(h * w * c), 0) {}
  uint8_t& at(int c, int64_t y, int64_t x) {
    return data[static_cast<size_t>((c * height + y) * width + x)];
  }
  uint8_t at(int c, int64_t y, int64_t x) const {
    return data[static_cast<size_t>((c * height + y) * width + x)];
  }
};

// Prediction residuals cropped into non-overlapping patches, raster order.
struct ResidualStack {
  int64_t patches = 0;
  int64_t patch_size = 0;
  int64_t orig_height = 0;
  int64_t orig_width = 0;
  IntTensor symbols;  // [P,3,N,N], values in [0,255]
};

// Reversible integer color transform (JPEG2000-style RCT in lifting form).
// Chroma is wrapped mod 256 and the luma lifting step consumes the wrapped
// values, which keeps the transform an exact bijection on 8-bit triples.
PlanarImage rct_forward(const RgbImage& img);
RgbImage rct_inverse(const PlanarImage& ycc);

// Median edge detector (the LOCO-I / JPEG-LS predictor).
// a = left, b = above, c = above-left.
int med_predict(int a, int b, int c);

// Per-channel MED prediction residuals, wrapped mod 256. Boundary rule:
// (0,0) predicts 0, the first row predicts from the left neighbor, the
// first column from the one above.
PlanarImage residual_forward(const PlanarImage& ycc);
PlanarImage residual_inverse(const PlanarImage& residuals);

// Pads with zeros on the right/bottom to multiples of n.
PlanarImage pad_to_multiple(const PlanarImage& img, int64_t n);
PlanarImage crop(const PlanarImage& img, int64_t height, int64_t width);

// orig dims record the pre-padding size; patchify pads if needed.
ResidualStack patchify(const PlanarImage& residuals, int64_t patch_size, int64_t orig_height,
                       int64_t orig_width);
PlanarImage unpatchify(const ResidualStack& stack);  // returns the padded grid

}  // namespace gollic
