#pragma once

#include <string>

#include "gollic/preproc.hpp"
#include "gollic/range_coder.hpp"

namespace gollic {

class IoError : public CodecError {
 public:
  explicit IoError(const std::string& what) : CodecError(what) {}
};

// 8-bit PNG or binary PPM (P6), decided by file magic. Gray/palette/alpha
// PNGs are expanded to RGB.
RgbImage load_image(const std::string& path);
void save_image(const std::string& path, const RgbImage& img);  // by extension

RgbImage load_ppm(const std::string& path);
void save_ppm(const std::string& path, const RgbImage& img);
RgbImage load_png(const std::string& path);
void save_png(const std::string& path, const RgbImage& img);

// Single-plane P5 dump (residual/latent visualization).
void save_pgm(const std::string& path, const PlanarImage& img, int channel);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace gollic
