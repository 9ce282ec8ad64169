#ifndef EDAAN_IMAGE_IO_HPP_
#define EDAAN_IMAGE_IO_HPP_

// 8-bit PNG reading/writing and conversion to [-1, 1] planar tensors.

#include <cstdint>
#include <string>
#include <vector>

#include "edaan/tensor.hpp"

namespace edaan {

// Interleaved 8-bit image (1 = gray, 3 = RGB).
struct ByteImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  ByteImage() = default;
  ByteImage(int h, int w, int c, std::uint8_t fill = 0)
      : height(h), width(w), channels(c), pixels(static_cast<std::size_t>(h) * w * c, fill) {}
  std::uint8_t& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Throws DataError on unreadable or non-PNG files. Palette, 16-bit and alpha
// inputs are converted to 8-bit gray or RGB.
ByteImage read_png(const std::string& path);
// Writes with fixed settings and no timestamp so equal images give equal files.
void write_png(const std::string& path, const ByteImage& image);

// Byte p -> p / 127.5 - 1, planar C x H x W.
Tensor<float> to_tensor(const ByteImage& image);
// Inverse of to_tensor with clamping to [-1, 1] and rounding.
std::uint8_t to_byte(float v);
ByteImage from_tensor(const float* planar, int channels, int height, int width);
// Single-channel {0,1} mask <-> gray PNG (0 / 255).
Tensor<float> mask_to_tensor(const ByteImage& image);
ByteImage mask_from_tensor(const float* plane, int height, int width);

ByteImage resize_bilinear(const ByteImage& image, int height, int width);
ByteImage to_rgb(const ByteImage& image);

// Copies `tile` into `canvas` with its top-left corner at (y, x).
void blit(ByteImage& canvas, const ByteImage& tile, int y, int x);
// Draws a `thickness`-pixel rectangle outline.
void draw_border(ByteImage& canvas, int y, int x, int h, int w, int thickness, std::uint8_t r, std::uint8_t g,
                 std::uint8_t b);

}  // namespace edaan

#endif  // EDAAN_IMAGE_IO_HPP_
