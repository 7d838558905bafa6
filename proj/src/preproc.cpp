#include "gollic/preproc.hpp"

namespace gollic {

PlanarImage rct_forward(const RgbImage& img) {
  PlanarImage ycc(img.height, img.width, 3);
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x) {
      int r = img.at(y, x, 0), g = img.at(y, x, 1), b = img.at(y, x, 2);
      int cr = (r - g) & 255;
      int cb = (b - g) & 255;
      // round{(R+2G+B)/4} = G + round{(Cr+Cb)/4} when no wrap occurs; the
      // lifting form below stays exact under wrap as well.
      int yv = (g + ((cr + cb + 2) >> 2)) & 255;
      ycc.at(0, y, x) = static_cast<uint8_t>(yv);
      ycc.at(1, y, x) = static_cast<uint8_t>(cr);
      ycc.at(2, y, x) = static_cast<uint8_t>(cb);
    }
  return ycc;
}

RgbImage rct_inverse(const PlanarImage& ycc) {
  RgbImage img;
  img.height = ycc.height;
  img.width = ycc.width;
  img.samples.resize(static_cast<size_t>(ycc.height * ycc.width * 3));
  for (int64_t y = 0; y < ycc.height; ++y)
    for (int64_t x = 0; x < ycc.width; ++x) {
      int yv = ycc.at(0, y, x), cr = ycc.at(1, y, x), cb = ycc.at(2, y, x);
      int g = (yv - ((cr + cb + 2) >> 2)) & 255;
      int r = (cr + g) & 255;
      int b = (cb + g) & 255;
      img.at(y, x, 0) = static_cast<uint8_t>(r);
      img.at(y, x, 1) = static_cast<uint8_t>(g);
      img.at(y, x, 2) = static_cast<uint8_t>(b);
    }
  return img;
}

int med_predict(int a, int b, int c) {
  int mn = a < b ? a : b;
  int mx = a < b ? b : a;
  if (c >= mx) return mn;
  if (c <= mn) return mx;
  return a + b - c;
}

namespace {

int predict_at(const PlanarImage& img, int ch, int64_t y, int64_t x) {
  if (y == 0 && x == 0) return 0;
  if (y == 0) return img.at(ch, 0, x - 1);
  if (x == 0) return img.at(ch, y - 1, 0);
  return med_predict(img.at(ch, y, x - 1), img.at(ch, y - 1, x), img.at(ch, y - 1, x - 1));
}

}  // namespace

PlanarImage residual_forward(const PlanarImage& ycc) {
  PlanarImage res(ycc.height, ycc.width, ycc.channels);
  for (int ch = 0; ch < ycc.channels; ++ch)
    for (int64_t y = 0; y < ycc.height; ++y)
      for (int64_t x = 0; x < ycc.width; ++x)
        res.at(ch, y, x) =
            static_cast<uint8_t>((ycc.at(ch, y, x) - predict_at(ycc, ch, y, x)) & 255);
  return res;
}

PlanarImage residual_inverse(const PlanarImage& residuals) {
  PlanarImage img(residuals.height, residuals.width, residuals.channels);
  // raster order: a, b, c are already reconstructed when each pixel is restored
  for (int ch = 0; ch < residuals.channels; ++ch)
    for (int64_t y = 0; y < residuals.height; ++y)
      for (int64_t x = 0; x < residuals.width; ++x)
        img.at(ch, y, x) =
            static_cast<uint8_t>((residuals.at(ch, y, x) + predict_at(img, ch, y, x)) & 255);
  return img;
}

PlanarImage pad_to_multiple(const PlanarImage& img, int64_t n) {
  int64_t ph = (img.height + n - 1) / n * n;
  int64_t pw = (img.width + n - 1) / n * n;
  if (ph == img.height && pw == img.width) return img;
  PlanarImage out(ph, pw, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, x);
  return out;
}

PlanarImage crop(const PlanarImage& img, int64_t height, int64_t width) {
  if (height == img.height && width == img.width) return img;
  PlanarImage out(height, width, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int64_t y = 0; y < height; ++y)
      for (int64_t x = 0; x < width; ++x) out.at(c, y, x) = img.at(c, y, x);
  return out;
}

ResidualStack patchify(const PlanarImage& residuals, int64_t patch_size, int64_t orig_height,
                       int64_t orig_width) {
  if (patch_size < 8 || patch_size % 8 != 0)
    throw ShapeError("patchify: patch size must be a positive multiple of 8");
  PlanarImage padded = pad_to_multiple(residuals, patch_size);
  int64_t py = padded.height / patch_size;
  int64_t px = padded.width / patch_size;
  ResidualStack stack;
  stack.patches = py * px;
  stack.patch_size = patch_size;
  stack.orig_height = orig_height;
  stack.orig_width = orig_width;
  stack.symbols = IntTensor({stack.patches, 3, patch_size, patch_size});
  for (int64_t p = 0; p < stack.patches; ++p) {
    int64_t y0 = (p / px) * patch_size;
    int64_t x0 = (p % px) * patch_size;
    for (int c = 0; c < 3; ++c)
      for (int64_t y = 0; y < patch_size; ++y)
        for (int64_t x = 0; x < patch_size; ++x)
          stack.symbols.at4(p, c, y, x) = padded.at(c, y0 + y, x0 + x);
  }
  return stack;
}

PlanarImage unpatchify(const ResidualStack& stack) {
  int64_t n = stack.patch_size;
  int64_t py = (stack.orig_height + n - 1) / n;
  int64_t px = (stack.orig_width + n - 1) / n;
  if (py * px != stack.patches) throw ShapeError("unpatchify: patch count does not match dims");
  PlanarImage out(py * n, px * n, 3);
  for (int64_t p = 0; p < stack.patches; ++p) {
    int64_t y0 = (p / px) * n;
    int64_t x0 = (p % px) * n;
    for (int c = 0; c < 3; ++c)
      for (int64_t y = 0; y < n; ++y)
        for (int64_t x = 0; x < n; ++x)
          out.at(c, y0 + y, x0 + x) = static_cast<uint8_t>(stack.symbols.at4(p, c, y, x));
  }
  return out;
}

}  // namespace gollic
