#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "memgan/error.hpp"
#include "memgan/tensor.hpp"

namespace memgan {

/// Grayscale byte for a value in volts: (v / v_scale + 1) * 127.5, rounded
/// half-up and clamped to [0, 255].
inline std::uint8_t to_gray(double v, double v_scale) {
  const double x = std::floor((v / v_scale + 1.0) * 127.5 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(x, 0.0, 255.0));
}

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Tiles single-channel images into a grid, `columns` per row, with a
/// one-pixel black border.
inline GrayImage make_grid(std::span<const Tensor> images, double v_scale, std::size_t columns = 10) {
  GrayImage grid;
  if (images.empty()) return grid;
  const std::size_t h = images.front().height(), w = images.front().width();
  columns = std::max<std::size_t>(1, std::min(columns, images.size()));
  const std::size_t rows = (images.size() + columns - 1) / columns;
  grid.width = columns * (w + 1) + 1;
  grid.height = rows * (h + 1) + 1;
  grid.pixels.assign(grid.width * grid.height, 0);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Tensor& t = images[n];
    if (t.height() != h || t.width() != w) throw Error(ErrorCategory::shape, "grid: images differ in size");
    const std::size_t y0 = (n / columns) * (h + 1) + 1, x0 = (n % columns) * (w + 1) + 1;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) grid.pixels[(y0 + y) * grid.width + x0 + x] = to_gray(t.at(y, x, 0), v_scale);
  }
  return grid;
}

/// Binary portable graymap (P5).
inline void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw Error(ErrorCategory::io, "failed writing " + path.string());
}

}  // namespace memgan
