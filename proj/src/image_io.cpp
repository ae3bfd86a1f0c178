// SPDX-License-Identifier: Apache-2.0
#include "c3po/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace c3po {
namespace {

std::vector<std::uint8_t> decode(const std::filesystem::path& path, std::uint32_t format, int& h,
                                 int& w) {
  if (!std::filesystem::exists(path)) throw ImageIoError("cannot open '" + path.string() + "'");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw ImageIoError("cannot read '" + path.string() + "': " + image.message);
  image.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw ImageIoError("cannot decode '" + path.string() + "': " + image.message);
  }
  h = static_cast<int>(image.height);
  w = static_cast<int>(image.width);
  return buf;
}

void encode(const std::filesystem::path& path, int h, int w, std::uint32_t format,
            const std::vector<std::uint8_t>& buf) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr))
    throw ImageIoError("cannot write '" + path.string() + "': " + image.message);
}

}  // namespace

Image read_png_rgb(const std::filesystem::path& path) {
  int h = 0;
  int w = 0;
  const auto buf = decode(path, PNG_FORMAT_RGB, h, w);
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
  return img;
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  // Decoding to RGB and keeping the red channel leaves raw index values
  // untouched; libpng's own grey conversion would apply colour weights.
  int h = 0;
  int w = 0;
  const auto buf = decode(path, PNG_FORMAT_RGB, h, w);
  GrayImage g{h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w)};
  for (std::size_t i = 0; i < g.pixels.size(); ++i) g.pixels[i] = buf[i * 3];
  return g;
}

void write_png_rgb(const std::filesystem::path& path, const Image& image) {
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(3) * image.h * image.w);
  for (int y = 0; y < image.h; ++y)
    for (int x = 0; x < image.w; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        buf[(static_cast<std::size_t>(y) * image.w + x) * 3 + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
  encode(path, image.h, image.w, PNG_FORMAT_RGB, buf);
}

void write_png_gray(const std::filesystem::path& path, const GrayImage& image) {
  encode(path, image.h, image.w, PNG_FORMAT_GRAY, image.pixels);
}

}  // namespace c3po
