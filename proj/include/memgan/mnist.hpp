#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "memgan/error.hpp"
#include "memgan/tensor.hpp"

namespace memgan {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr const char* kMnistImagesFile = "train-images-idx3-ubyte";
inline constexpr const char* kMnistLabelsFile = "train-labels-idx1-ubyte";

struct MnistSet {
  std::vector<Tensor> images;        // (rows, cols, 1), values in [-1, 1]
  std::vector<std::uint8_t> labels;  // empty when no label file was found
};

namespace detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

}  // namespace detail

/// Byte 0 -> -1.0, byte 255 -> +1.0.
inline double pixel_to_unit(std::uint8_t b) { return static_cast<double>(b) / 127.5 - 1.0; }

/// Reads an IDX3 image file. `limit` caps the number of images (0 = all).
inline std::vector<Tensor> load_idx_images(const std::filesystem::path& path, std::size_t limit = 0) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() < 16) throw Error(ErrorCategory::format, "truncated IDX file: " + path.string());
  if (detail::read_be32(bytes, 0) != kIdxImagesMagic) throw Error(ErrorCategory::format, "bad IDX magic: " + path.string());
  const std::size_t count = detail::read_be32(bytes, 4);
  const std::size_t rows = detail::read_be32(bytes, 8);
  const std::size_t cols = detail::read_be32(bytes, 12);
  if (rows == 0 || cols == 0) throw Error(ErrorCategory::format, "IDX dimension mismatch: zero image size in " + path.string());
  if (bytes.size() - 16 < count * rows * cols) throw Error(ErrorCategory::format, "truncated IDX file: " + path.string());
  const std::size_t n = limit ? std::min(limit, count) : count;
  std::vector<Tensor> images;
  images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t({rows, cols, 1});
    const unsigned char* px = bytes.data() + 16 + i * rows * cols;
    for (std::size_t j = 0; j < rows * cols; ++j) t[j] = pixel_to_unit(px[j]);
    images.push_back(std::move(t));
  }
  return images;
}

inline std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path, std::size_t limit = 0) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() < 8) throw Error(ErrorCategory::format, "truncated IDX file: " + path.string());
  if (detail::read_be32(bytes, 0) != kIdxLabelsMagic) throw Error(ErrorCategory::format, "bad IDX magic: " + path.string());
  const std::size_t count = detail::read_be32(bytes, 4);
  if (bytes.size() - 8 < count) throw Error(ErrorCategory::format, "truncated IDX file: " + path.string());
  const std::size_t n = limit ? std::min(limit, count) : count;
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(n)};
}

/// Loads MNIST training images (and labels, if present) from a directory
/// holding the standard file names, or from an image file path.
/// `expected` (if nonempty) is the required (rows, cols, 1) image shape.
inline MnistSet load_mnist(const std::filesystem::path& path, std::size_t limit = 0, const Shape& expected = {}) {
  const bool is_dir = std::filesystem::is_directory(path);
  const auto images_path = is_dir ? path / kMnistImagesFile : path;
  MnistSet set;
  set.images = load_idx_images(images_path, limit);
  if (!expected.empty() && !set.images.empty() && set.images.front().shape() != expected)
    throw Error(ErrorCategory::format, "IDX dimension mismatch: images are " + to_string(set.images.front().shape()) +
                                           ", expected " + to_string(expected));
  if (is_dir && std::filesystem::exists(path / kMnistLabelsFile)) {
    set.labels = load_idx_labels(path / kMnistLabelsFile, limit);
    if (set.labels.size() != set.images.size())
      throw Error(ErrorCategory::format, "IDX dimension mismatch: " + std::to_string(set.labels.size()) + " labels for " +
                                             std::to_string(set.images.size()) + " images");
  }
  return set;
}

}  // namespace memgan
