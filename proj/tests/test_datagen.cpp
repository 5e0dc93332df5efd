#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "nfcl/errors.hpp"
#include "nfcl/phantom.hpp"
#include "nfcl/volume.hpp"

namespace {

using namespace nfcl;

std::size_t count_label(const Volume& v, std::uint8_t label) {
  return static_cast<std::size_t>(std::count(v.labels.begin(), v.labels.end(), label));
}

TEST(Grid, AxisEndpoints) {
  EXPECT_EQ(axis_coordinate(0, 2), -1.0);
  EXPECT_EQ(axis_coordinate(1, 2), 1.0);
  EXPECT_EQ(axis_coordinate(1, 3), 0.0);
}

TEST(Grid, ShapeAndOrder) {
  const auto g = make_grid<double>(GridSpec{{4, 4, 4}, std::nullopt});
  EXPECT_EQ(g.shape(), (std::vector<std::size_t>{64, 3}));
  // Last axis fastest.
  EXPECT_EQ(g(1, 2), axis_coordinate(1, 4));
  EXPECT_EQ(g(1, 0), -1.0);
  EXPECT_EQ(g(4, 1), axis_coordinate(1, 4));
  for (double v : g.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Grid, TimeColumn) {
  const GridSpec spec{{2, 3, 2}, TimeAxis{4, 2}};
  const auto g = make_grid<float>(spec);
  EXPECT_EQ(g.cols(), 4u);
  for (std::size_t i = 0; i < g.rows(); ++i) EXPECT_FLOAT_EQ(g(i, 3), 1.0f / 3.0f);
  EXPECT_EQ((TimeAxis{1, 0}.value()), -1.0);
  EXPECT_EQ((TimeAxis{4, 0}.value()), -1.0);
  EXPECT_EQ((TimeAxis{4, 3}.value()), 1.0);
}

TEST(Grid, DegenerateAxisRejected) {
  EXPECT_THROW(make_grid<float>(GridSpec{{4, 1, 4}, std::nullopt}), ConfigError);
}

TEST(Normalize, Examples) {
  const Volume v = normalize_intensity(Volume::intensity({2}, {2.0f, 4.0f}));
  EXPECT_EQ(v.intensities, (std::vector<float>{0.0f, 1.0f}));
  const Volume unit = Volume::intensity({3}, {0.0f, 0.25f, 1.0f});
  EXPECT_EQ(normalize_intensity(unit), unit);
  EXPECT_THROW(normalize_intensity(Volume::intensity({2}, {3.0f, 3.0f})), DegenerateInputError);
}

TEST(Normalize, FramesShareOneRange) {
  std::vector<Volume> frames = {Volume::intensity({2}, {1.0f, 2.0f}), Volume::intensity({2}, {3.0f, 5.0f})};
  normalize_intensity(frames);
  EXPECT_EQ(frames[0].intensities, (std::vector<float>{0.0f, 0.25f}));
  EXPECT_EQ(frames[1].intensities, (std::vector<float>{0.5f, 1.0f}));
}

TEST(Phantom, CenterIsLeftVentricle) {
  // 5 points per axis put a voxel at x = -0.5; 21 points put one at -0.2.
  const PhantomFrame f = phantom(21, 21, 21, 0.3, 0, PhantomOptions{0.0});
  const std::size_t idx = (8 * 21 + 10) * 21 + 10;  // (-0.2, 0, 0)
  EXPECT_EQ(f.labels.labels[idx], kLeftVentricle);
  EXPECT_FLOAT_EQ(f.image.intensities[idx], 0.8f);
}

TEST(Phantom, ContractionShrinksLeftVentricle) {
  EXPECT_DOUBLE_EQ(contraction(-1.0), 1.0);
  EXPECT_NEAR(contraction(1.0), 0.7, 1e-15);
  std::size_t previous = SIZE_MAX;
  for (double t : {-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0}) {
    const std::size_t lv = count_label(phantom(32, 32, 8, t, 3).labels, kLeftVentricle);
    EXPECT_LT(lv, previous) << "t = " << t;
    previous = lv;
  }
}

TEST(Phantom, DeterministicAndBounded) {
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const PhantomFrame a = phantom(16, 16, 8, 0.2, seed);
    const PhantomFrame b = phantom(16, 16, 8, 0.2, seed);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.labels, b.labels);
    for (float v : a.image.intensities) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
    for (auto l : a.labels.labels) EXPECT_LE(l, 3);
    for (std::uint8_t l = 1; l <= 3; ++l) EXPECT_GT(count_label(a.labels, l), 0u) << "label " << int(l);
  }
  EXPECT_NE(phantom(16, 16, 8, 0.2, 0).labels, phantom(16, 16, 8, 0.2, 1).labels);
}

class NfvFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("nfcl_datagen_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(NfvFiles, RoundTripIsBitExact) {
  const PhantomFrame f = phantom(9, 7, 5, -0.4, 12);
  Volume image = f.image;
  image.intensities[3] = -0.0f;
  image.intensities[4] = 1e-38f;  // denormal-adjacent
  save_volume(image, dir_ / "i.nfv");
  save_volume(f.labels, dir_ / "l.nfv");
  const Volume back = load_volume(dir_ / "i.nfv");
  ASSERT_EQ(back.intensities.size(), image.intensities.size());
  EXPECT_EQ(std::memcmp(back.intensities.data(), image.intensities.data(), image.intensities.size() * 4), 0);
  EXPECT_EQ(load_volume(dir_ / "l.nfv"), f.labels);
}

TEST(Nfv, HeaderLayout) {
  const auto bytes = encode_volume(Volume::label_map({2, 3}, {0, 1, 2, 3, 0, 1}));
  const std::vector<std::uint8_t> header = {'N', 'F', 'V', 'O', 'L', '1', 0, 1, 2, 2, 0, 0, 0, 3, 0, 0, 0, 1, 0, 0, 0};
  ASSERT_EQ(bytes.size(), header.size() + 6);
  EXPECT_TRUE(std::equal(header.begin(), header.end(), bytes.begin()));
}

TEST(Nfv, CorruptionsAreFormatErrorsWithOffsets) {
  const auto good = encode_volume(Volume::intensity({2, 2, 2}, std::vector<float>(8, 0.5f)));
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_volume(bad_magic), FormatError);

  auto bad_kind = good;
  bad_kind[7] = 9;
  try {
    decode_volume(bad_kind);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 7u);
  }

  const std::vector<std::uint8_t> truncated(good.begin(), good.end() - 5);
  try {
    decode_volume(truncated);
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 32 bytes"), std::string::npos) << msg;
    EXPECT_NE(msg.find("found 27"), std::string::npos) << msg;
  }

  auto header_cut = good;
  header_cut.resize(10);
  EXPECT_THROW(decode_volume(header_cut), FormatError);

  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(decode_volume(trailing), FormatError);
}

TEST(Nfv, MissingFileNamesPath) {
  try {
    load_volume("/nonexistent/x.nfv");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/x.nfv"), std::string::npos);
  }
}

}  // namespace
