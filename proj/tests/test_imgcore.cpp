#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "shadex/io.hpp"
#include "shadex/raster.hpp"

namespace shadex {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("shadex_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

using ImageIo = TempDir;

void write_png8(const fs::path& p, std::uint16_t r, std::uint16_t g, std::uint16_t b) {
  const std::vector<std::uint16_t> s{r, g, b};
  write_png(p, 1, 1, 3, 8, s);
}

TEST_F(ImageIo, MaxCodeMapsToOne) {
  write_png8(dir_ / "white.png", 255, 255, 255);
  const RgbImage img = load_image(dir_ / "white.png", Transfer::linear);
  ASSERT_EQ(img.width(), 1);
  EXPECT_EQ(img.pixel(0, 0), (Rgb{1.0, 1.0, 1.0}));
}

TEST_F(ImageIo, ZeroCodeMapsToZero) {
  write_png8(dir_ / "black.png", 0, 0, 0);
  EXPECT_EQ(load_image(dir_ / "black.png").pixel(0, 0), (Rgb{0.0, 0.0, 0.0}));
}

TEST_F(ImageIo, SrgbMidGreyDecodes) {
  write_png8(dir_ / "grey.png", 128, 128, 128);
  const RgbImage img = load_image(dir_ / "grey.png", Transfer::srgb);
  // ((128/255 + 0.055) / 1.055)^2.4, computed with numpy.
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(img.at(0, 0, c), 0.21586050011389926, 1e-15);
  EXPECT_NEAR(img.at(0, 0, 0), 0.2158, 1e-4);
}

TEST_F(ImageIo, SixteenBitPngKeepsPrecision) {
  const std::vector<std::uint16_t> s{65535, 32768, 1, 0, 12345, 65534};
  write_png(dir_ / "deep.png", 2, 1, 3, 16, s);
  const RgbImage img = load_image(dir_ / "deep.png");
  EXPECT_DOUBLE_EQ(img.at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 1), 32768.0 / 65535.0);
  EXPECT_DOUBLE_EQ(img.at(1, 0, 1), 12345.0 / 65535.0);
}

TEST_F(ImageIo, GreyPngExpandsToRgb) {
  const std::vector<std::uint16_t> s{0, 51, 102, 255};
  write_png(dir_ / "g.png", 2, 2, 1, 8, s);
  const RgbImage img = load_image(dir_ / "g.png");
  EXPECT_EQ(img.pixel(1, 0), (Rgb{0.2, 0.2, 0.2}));
  EXPECT_EQ(img.pixel(1, 1), (Rgb{1.0, 1.0, 1.0}));
}

TEST_F(ImageIo, LoadErrors) {
  EXPECT_THROW(load_image(dir_ / "missing.png"), Error);
  std::ofstream(dir_ / "junk.png") << "not an image";
  try {
    load_image(dir_ / "junk.png");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
  std::ofstream(dir_ / "empty.pfm") << "Pf\n0 3\n-1.0\n";
  EXPECT_THROW(load_image(dir_ / "empty.pfm"), Error);
}

TEST_F(ImageIo, FieldRoundTripIsExact) {
  const ScalarField f(Grid<double>(2, 2, std::vector<double>{0.0, 0.5, 1.0, 2.0}));
  save_field(f, dir_ / "f.pfm");
  EXPECT_EQ(load_field(dir_ / "f.pfm").values, f.values);
}

TEST_F(ImageIo, InvalidPixelsStoreFill) {
  Mask valid(2, 1, 1);
  valid(1, 0) = 0;
  const ScalarField f(Grid<double>(2, 1, std::vector<double>{3.0, 7.0}), valid);
  save_field(f, dir_ / "f.pfm", 0.0);
  const ScalarField back = load_field(dir_ / "f.pfm");
  EXPECT_EQ(back(0, 0), 3.0);
  EXPECT_EQ(back(1, 0), 0.0);
}

TEST_F(ImageIo, RandomFieldRoundTripHasZeroError) {
  std::mt19937 rng(42);
  std::uniform_real_distribution<float> u(-10.0f, 10.0f);
  Grid<double> g(256, 256);
  for (double& v : g.data()) v = u(rng);  // float-representable values
  save_field(ScalarField(g), dir_ / "r.pfm");
  const ScalarField back = load_field(dir_ / "r.pfm");
  double max_err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) max_err = std::max(max_err, std::abs(back.values[i] - g[i]));
  EXPECT_EQ(max_err, 0.0);
}

TEST_F(ImageIo, PfmStoresRowsBottomUp) {
  const ScalarField f(Grid<double>(1, 2, std::vector<double>{1.0, 2.0}));
  save_field(f, dir_ / "o.pfm");
  std::ifstream in(dir_ / "o.pfm", std::ios::binary);
  std::string header((std::istreambuf_iterator<char>(in)), {});
  const std::string magic = "Pf\n1 2\n-1.0\n";
  ASSERT_EQ(header.substr(0, magic.size()), magic);
  float first = 0.0f;
  std::memcpy(&first, header.data() + magic.size(), 4);
  EXPECT_EQ(first, 2.0f);  // bottom row first
}

TEST_F(ImageIo, RgbPfmRoundTrip) {
  const RgbImage img(2, 1, std::vector<double>{0.25, 0.5, 0.75, 1.0, 0.0, 0.125});
  save_rgb(img, dir_ / "c.pfm");
  EXPECT_EQ(load_image(dir_ / "c.pfm"), img);
}

TEST_F(ImageIo, MaskPngRoundTrip) {
  Mask m(3, 2);
  m(0, 0) = 1;
  m(2, 1) = 1;
  save_mask_png(m, dir_ / "m.png");
  EXPECT_EQ(load_mask_png(dir_ / "m.png"), m);
}

TEST(ToLog, UnitPixelIsZero) {
  const LogImage l = to_log(RgbImage(1, 1, Rgb{1.0, 1.0, 1.0}), 1e-4);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(l.channels[c](0, 0), 0.0);
  EXPECT_EQ(l.epsilon, 1e-4);
}

TEST(ToLog, ClampsThenLogs) {
  const LogImage l = to_log(RgbImage(1, 1, Rgb{0.0, 0.5, 1.0}), 1e-4);
  EXPECT_EQ(l.channels[0](0, 0), std::log(1e-4));
  EXPECT_EQ(l.channels[1](0, 0), std::log(0.5));
  EXPECT_EQ(l.channels[2](0, 0), 0.0);
}

TEST(ToLog, ScalingShiftsByLogK) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> d(4 * 4 * 3);
  for (double& v : d) v = u(rng);
  const RgbImage img(4, 4, d);
  const double k = 3.7;
  const LogImage a = to_log(img);
  const LogImage b = to_log(scaled(img, k));
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 16; ++i)
      EXPECT_NEAR(b.channels[c][i] - a.channels[c][i], std::log(k), 1e-14);
}

TEST(ToLog, MonotoneAndExactOnPowersOfE) {
  const RgbImage img(3, 1, std::vector<double>{std::exp(-2.0), std::exp(-1.0), 1.0,
                                               0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
  const LogImage l = to_log(img);
  EXPECT_EQ(l.channels[0](0, 0), -2.0);
  EXPECT_EQ(l.channels[1](0, 0), -1.0);
  for (int c = 0; c < 3; ++c) {
    EXPECT_LT(l.channels[c](1, 0), l.channels[c](2, 0));
  }
}

TEST(ToLog, RejectsNonPositiveEpsilon) {
  const RgbImage img(1, 1);
  EXPECT_THROW(to_log(img, 0.0), Error);
  EXPECT_THROW(to_log(img, -1.0), Error);
}

TEST(RgbImage, RejectsNegativeAndNonFinite) {
  EXPECT_THROW(RgbImage(1, 1, std::vector<double>{-0.1, 0.0, 0.0}), Error);
  EXPECT_THROW(RgbImage(1, 1, std::vector<double>{NAN, 0.0, 0.0}), Error);
  EXPECT_THROW(RgbImage(2, 1, std::vector<double>{0.0, 0.0, 0.0}), Error);
}

}  // namespace
}  // namespace shadex
