#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "memgan/mnist.hpp"

using namespace memgan;
namespace fs = std::filesystem;

namespace {

void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>(v >> s));
}

std::vector<unsigned char> idx_images(std::uint32_t magic, std::uint32_t n, std::uint32_t rows, std::uint32_t cols,
                                      std::size_t payload) {
  std::vector<unsigned char> b;
  put_be32(b, magic);
  put_be32(b, n);
  put_be32(b, rows);
  put_be32(b, cols);
  for (std::size_t i = 0; i < payload; ++i) b.push_back(static_cast<unsigned char>(i % 256));
  return b;
}

fs::path write_temp(const std::string& name, const std::vector<unsigned char>& bytes) {
  const fs::path p = fs::temp_directory_path() / ("memgan_mnist_" + name);
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  return p;
}

std::string error_of(const fs::path& p, std::size_t limit = 0, const Shape& expected = {}) {
  try {
    load_mnist(p, limit, expected);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Mnist, PixelScaling) {
  EXPECT_EQ(pixel_to_unit(0), -1.0);
  EXPECT_EQ(pixel_to_unit(255), 1.0);
}

TEST(Mnist, StandardHeader) {
  const auto p = write_temp("std", idx_images(kIdxImagesMagic, 60000, 28, 28, 60000u * 784u));
  const auto set = load_mnist(p);
  EXPECT_EQ(set.images.size(), 60000u);
  EXPECT_EQ(set.images.front().shape(), (Shape{28, 28, 1}));
  EXPECT_EQ(set.images.front()[0], -1.0);
  EXPECT_EQ(set.images.front()[255], 1.0);
  EXPECT_EQ(load_mnist(p, 100).images.size(), 100u);
  fs::remove(p);
}

TEST(Mnist, DistinctErrors) {
  const auto bad_magic = write_temp("magic", idx_images(0x00000802, 2, 2, 2, 8));
  EXPECT_NE(error_of(bad_magic).find("bad IDX magic"), std::string::npos);
  const auto truncated = write_temp("trunc", idx_images(kIdxImagesMagic, 3, 2, 2, 11));
  EXPECT_NE(error_of(truncated).find("truncated IDX file"), std::string::npos);
  const auto short_header = write_temp("short", {0, 0, 8, 3, 0, 0});
  EXPECT_NE(error_of(short_header).find("truncated IDX file"), std::string::npos);
  const auto ok = write_temp("dims", idx_images(kIdxImagesMagic, 2, 4, 4, 32));
  EXPECT_NE(error_of(ok, 0, {28, 28, 1}).find("IDX dimension mismatch"), std::string::npos);
  EXPECT_NE(error_of(fs::temp_directory_path() / "memgan_no_such_file").find("cannot open"), std::string::npos);
  for (const auto& p : {bad_magic, truncated, short_header, ok}) fs::remove(p);
}

TEST(Mnist, DirectoryWithLabels) {
  const fs::path dir = fs::temp_directory_path() / "memgan_mnist_dir";
  fs::create_directories(dir);
  const auto img = idx_images(kIdxImagesMagic, 3, 2, 2, 12);
  std::ofstream(dir / kMnistImagesFile, std::ios::binary).write(reinterpret_cast<const char*>(img.data()), 28);
  std::vector<unsigned char> lab;
  put_be32(lab, kIdxLabelsMagic);
  put_be32(lab, 3);
  lab.insert(lab.end(), {7, 1, 4});
  std::ofstream(dir / kMnistLabelsFile, std::ios::binary).write(reinterpret_cast<const char*>(lab.data()), 11);
  const auto set = load_mnist(dir);
  EXPECT_EQ(set.images.size(), 3u);
  EXPECT_EQ(set.labels, (std::vector<std::uint8_t>{7, 1, 4}));
  fs::remove_all(dir);
}

TEST(Mnist, BundledSubset) {
  const auto set = load_mnist(fs::path(MEMGAN_SOURCE_DIR) / "data/mnist-subset", 0, {28, 28, 1});
  ASSERT_EQ(set.images.size(), 1000u);
  ASSERT_EQ(set.labels.size(), 1000u);
  std::array<int, 10> per_class{};
  for (auto l : set.labels) per_class.at(l)++;
  for (int c : per_class) EXPECT_EQ(c, 100);
  for (const auto& t : set.images)
    for (double v : t.data()) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
}
