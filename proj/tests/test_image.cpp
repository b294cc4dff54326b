#include <gtest/gtest.h>

#include <png.h>

#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "facade/image.hpp"

namespace fs = std::filesystem;

namespace facade {
namespace {

class ImageIo : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("facade_image_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_bytes(const std::string& name, const std::vector<std::uint8_t>& bytes) {
    const auto p = dir_ / name;
    detail::write_file_bytes(p, bytes.data(), bytes.size());
    return p;
  }

  fs::path dir_;
};

ErrorKind kind_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Io;
}

GrayImage random_image(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> v(0, 255);
  GrayImage img(w, h);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(v(rng));
  return img;
}

TEST_F(ImageIo, TwoByTwoPgm) {
  std::vector<std::uint8_t> bytes{'P', '5', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n'};
  bytes.insert(bytes.end(), {0, 255, 128, 64});
  const auto img = load_image(write_bytes("a.pgm", bytes));
  EXPECT_EQ(img, GrayImage(2, 2, {0, 255, 128, 64}));
}

TEST_F(ImageIo, PgmHeaderComments) {
  const std::string header = "P5\n# made by hand\n3 1 # width height\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), {1, 2, 3});
  EXPECT_EQ(load_image(write_bytes("c.pgm", bytes)), GrayImage(3, 1, {1, 2, 3}));
}

TEST_F(ImageIo, TruncatedPgm) {
  std::vector<std::uint8_t> bytes{'P', '5', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n', 1, 2, 3};
  const auto p = write_bytes("t.pgm", bytes);
  EXPECT_EQ(kind_of([&] { load_image(p); }), ErrorKind::Truncated);
}

TEST_F(ImageIo, UnsupportedFormats) {
  const std::string ascii = "P2\n2 1\n255\n0 1\n";
  const auto p2 = write_bytes("ascii.pgm", {ascii.begin(), ascii.end()});
  EXPECT_EQ(kind_of([&] { load_image(p2); }), ErrorKind::UnsupportedFormat);

  const std::string sixteen = "P5\n1 1\n65535\n";
  std::vector<std::uint8_t> b16(sixteen.begin(), sixteen.end());
  b16.insert(b16.end(), {0, 0});
  const auto p16 = write_bytes("deep.pgm", b16);
  EXPECT_EQ(kind_of([&] { load_image(p16); }), ErrorKind::UnsupportedFormat);

  const auto junk = write_bytes("junk.bin", {0x00, 0x01, 0x02});
  EXPECT_EQ(kind_of([&] { load_image(junk); }), ErrorKind::UnsupportedFormat);
  EXPECT_EQ(kind_of([&] { load_image(dir_ / "missing.pgm"); }), ErrorKind::Io);
}

TEST_F(ImageIo, PngDimensionsFromHeader) {
  std::mt19937_64 rng(1);
  const auto p = write_bytes("g.png", encode_png(random_image(rng, 100, 80)));
  const auto img = load_image(p);
  EXPECT_EQ(img.width(), 100);
  EXPECT_EQ(img.height(), 80);
}

TEST_F(ImageIo, ColorPngConvertedToLuma) {
  const std::vector<std::uint8_t> rgb{255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 200, 90};
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = 4;
  image.height = 1;
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  ASSERT_TRUE(png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr));
  std::vector<std::uint8_t> bytes(size);
  ASSERT_TRUE(png_image_write_to_memory(&image, bytes.data(), &size, 0, rgb.data(), 0, nullptr));
  bytes.resize(size);

  const auto img = load_image(write_bytes("rgb.png", bytes));
  // round(0.299R + 0.587G + 0.114B)
  EXPECT_EQ(img, GrayImage(4, 1, {76, 150, 29, 131}));
}

TEST_F(ImageIo, TruncatedPng) {
  std::mt19937_64 rng(2);
  auto bytes = encode_png(random_image(rng, 64, 64));
  bytes.resize(bytes.size() / 2);
  const auto p = write_bytes("cut.png", bytes);
  EXPECT_EQ(kind_of([&] { load_image(p); }), ErrorKind::Truncated);
}

TEST_F(ImageIo, DimensionMismatch) {
  std::mt19937_64 rng(3);
  const auto p = dir_ / "d.pgm";
  save_pgm(p, random_image(rng, 8, 6));
  EXPECT_NO_THROW(load_image(p, std::make_pair(8, 6)));
  EXPECT_EQ(kind_of([&] { load_image(p, std::make_pair(6, 8)); }), ErrorKind::DimensionMismatch);
}

TEST_F(ImageIo, RoundTripsAreBitExact) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> dim(1, 70);
  for (int i = 0; i < 20; ++i) {
    const auto img = random_image(rng, dim(rng), dim(rng));
    save_pgm(dir_ / "r.pgm", img);
    save_png(dir_ / "r.png", img);
    EXPECT_EQ(load_image(dir_ / "r.pgm"), img);
    EXPECT_EQ(load_image(dir_ / "r.png"), img);
  }
}

TEST(GrayImageTest, CropAndBounds) {
  GrayImage img(4, 3, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  EXPECT_EQ(img.crop(1, 1, 2, 2), GrayImage(2, 2, {5, 6, 9, 10}));
  EXPECT_THROW(img.crop(3, 0, 2, 1), Error);
  EXPECT_THROW(GrayImage(2, 2, std::vector<std::uint8_t>{1, 2, 3}), Error);
}

}  // namespace
}  // namespace facade
