#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "posekit/tensor.hpp"

namespace posekit {

// 8-bit image, HWC interleaved. channels is 1 (gray) or 3 (rgb).
struct ImageU8 {
  int width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Float image, CHW planar, values in [0,1].
struct ImageF {
  Tensor pixels;  // channels x height x width

  int channels() const { return pixels.dim(0); }
  int height() const { return pixels.dim(1); }
  int width() const { return pixels.dim(2); }
};

ImageF to_float(const ImageU8& img, int out_channels);
ImageU8 to_u8(const ImageF& img);

ImageU8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageU8& img);

}  // namespace posekit
