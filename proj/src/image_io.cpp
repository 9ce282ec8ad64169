#include "edaan/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace edaan {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ByteImage read_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open image '" + path + "'");
  unsigned char header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw DataError("'" + path + "' is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng initialization failed");
  }
  ByteImage image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG '" + path + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
  png_read_update_info(png, info);
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.channels = png_get_channels(png, info);
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * image.channels);
  rows.resize(image.height);
  for (int y = 0; y < image.height; ++y)
    rows[y] = image.pixels.data() + static_cast<std::size_t>(y) * image.width * image.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (image.channels != 1 && image.channels != 3)
    throw DataError("unsupported channel count in '" + path + "'");
  return image;
}

void write_png(const std::string& path, const ByteImage& image) {
  if (image.channels != 1 && image.channels != 3) throw Error("write_png supports gray or RGB images only");
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error("cannot write image '" + path + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng initialization failed");
  }
  std::vector<png_bytep> rows(image.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed writing PNG '" + path + "'");
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, image.width, image.height, 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y)
    rows[y] = const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * image.width * image.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw Error("failed flushing '" + path + "'");
}

Tensor<float> to_tensor(const ByteImage& image) {
  Tensor<float> t({image.channels, image.height, image.width});
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x)
        t[(static_cast<std::size_t>(c) * image.height + y) * image.width + x] =
            static_cast<float>(image.at(y, x, c)) / 127.5f - 1.0f;
  return t;
}

std::uint8_t to_byte(float v) {
  if (!(v >= -1.0f)) v = -1.0f;
  if (v > 1.0f) v = 1.0f;
  return static_cast<std::uint8_t>(std::lround((v + 1.0f) * 127.5f));
}

ByteImage from_tensor(const float* planar, int channels, int height, int width) {
  ByteImage image(height, width, channels);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        image.at(y, x, c) = to_byte(planar[(static_cast<std::size_t>(c) * height + y) * width + x]);
  return image;
}

Tensor<float> mask_to_tensor(const ByteImage& image) {
  Tensor<float> t({1, image.height, image.width});
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      t[static_cast<std::size_t>(y) * image.width + x] = image.at(y, x, 0) >= 128 ? 1.0f : 0.0f;
  return t;
}

ByteImage mask_from_tensor(const float* plane, int height, int width) {
  ByteImage image(height, width, 1);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) image.pixels[i] = plane[i] >= 0.5f ? 255 : 0;
  return image;
}

ByteImage resize_bilinear(const ByteImage& image, int height, int width) {
  if (image.height == height && image.width == width) return image;
  ByteImage out(height, width, image.channels);
  const double sy = static_cast<double>(image.height) / height, sx = static_cast<double>(image.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double v = (1 - wy) * ((1 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c)) +
                         wy * ((1 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c));
        out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v));
      }
    }
  }
  return out;
}

ByteImage to_rgb(const ByteImage& image) {
  if (image.channels == 3) return image;
  ByteImage out(image.height, image.width, 3);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y, x, 0);
  return out;
}

void blit(ByteImage& canvas, const ByteImage& tile, int y, int x) {
  const ByteImage src = tile.channels == canvas.channels ? tile : to_rgb(tile);
  for (int r = 0; r < src.height && y + r < canvas.height; ++r)
    for (int col = 0; col < src.width && x + col < canvas.width; ++col)
      for (int c = 0; c < canvas.channels; ++c) canvas.at(y + r, x + col, c) = src.at(r, col, c);
}

void draw_border(ByteImage& canvas, int y, int x, int h, int w, int thickness, std::uint8_t r, std::uint8_t g,
                 std::uint8_t b) {
  const std::uint8_t rgb[3] = {r, g, b};
  for (int yy = y; yy < y + h; ++yy)
    for (int xx = x; xx < x + w; ++xx) {
      const bool edge = yy < y + thickness || yy >= y + h - thickness || xx < x + thickness || xx >= x + w - thickness;
      if (!edge || yy < 0 || xx < 0 || yy >= canvas.height || xx >= canvas.width) continue;
      for (int c = 0; c < canvas.channels; ++c) canvas.at(yy, xx, c) = rgb[std::min(c, 2)];
    }
}

}  // namespace edaan
