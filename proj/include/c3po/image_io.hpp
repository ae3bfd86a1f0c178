// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace c3po {

/// Planar RGB image, values in [0, 1], layout [c][y][x].
struct Image {
  int h = 0;
  int w = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int height, int width, float fill = 0.0f)
      : h(height), w(width), pixels(static_cast<std::size_t>(3) * height * width, fill) {}

  float& at(int c, int y, int x) { return pixels[(static_cast<std::size_t>(c) * h + y) * w + x]; }
  float at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * h + y) * w + x];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

/// Single-channel 8-bit raster, row-major.
struct GrayImage {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> pixels;
};

struct ImageIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Decodes any PNG (gray, palette, alpha, 16-bit) to RGB in [0, 1].
Image read_png_rgb(const std::filesystem::path& path);
/// Decodes a PNG to one 8-bit channel. Colour inputs keep their first
/// channel, so raw index masks saved as RGB survive.
GrayImage read_png_gray(const std::filesystem::path& path);

/// 8-bit RGB, values rounded from [0, 1].
void write_png_rgb(const std::filesystem::path& path, const Image& image);
void write_png_gray(const std::filesystem::path& path, const GrayImage& image);

}  // namespace c3po
