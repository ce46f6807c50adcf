#include <gtest/gtest.h>

#include <opencv2/imgcodecs.hpp>

#include <random>

#include "hemaclass/preprocessing.hpp"

using namespace hemaclass;

namespace {

std::vector<std::uint8_t> encode(const cv::Mat& bgr, const std::string& ext) {
  std::vector<std::uint8_t> buf;
  cv::imencode(ext, bgr, buf);
  return buf;
}

ImageTensor filled(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  ImageTensor img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  return img;
}

}  // namespace

TEST(Decode, OnePixelBlackPng) {
  const cv::Mat px(1, 1, CV_8UC3, cv::Scalar(0, 0, 0));
  const auto img = decode_image(encode(px, ".png"));
  EXPECT_EQ(img.height, 1);
  EXPECT_EQ(img.width, 1);
  EXPECT_EQ(img.data, (std::vector<std::uint8_t>{0, 0, 0}));
}

TEST(Decode, ChannelOrderIsRgb) {
  const cv::Mat px(1, 1, CV_8UC3, cv::Scalar(10, 20, 30));  // B, G, R
  const auto img = decode_image(encode(px, ".png"));
  EXPECT_EQ(img.data, (std::vector<std::uint8_t>{30, 20, 10}));
}

TEST(Decode, PbcSizedJpegKeepsDimensions) {
  const cv::Mat im(363, 360, CV_8UC3, cv::Scalar(120, 80, 200));
  const auto img = decode_image(encode(im, ".jpg"));
  EXPECT_EQ(img.height, 363);
  EXPECT_EQ(img.width, 360);
  EXPECT_EQ(img.data.size(), 363u * 360u * 3u);
}

TEST(Decode, TruncatedFileFails) {
  cv::Mat im(64, 64, CV_8UC3, cv::Scalar(1, 2, 3));
  auto bytes = encode(im, ".png");
  bytes.resize(bytes.size() / 3);
  EXPECT_THROW(decode_image(bytes, "truncated.png"), DecodeError);
  EXPECT_THROW(decode_image({}, "empty"), DecodeError);
  try {
    decode_image(std::vector<std::uint8_t>{1, 2, 3}, "junk.jpg");
  } catch (const DecodeError& e) {
    EXPECT_NE(std::string(e.what()).find("junk.jpg"), std::string::npos);
  }
}

TEST(Resize, IdentityAt224) {
  std::mt19937 rng(3);
  ImageTensor img(224, 224);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng() & 0xFF);
  EXPECT_EQ(resize_center_crop(img).data, img.data);
}

TEST(Resize, ConstantImageStaysConstant) {
  const auto out = resize_center_crop(filled(448, 448, 17, 200, 99));
  EXPECT_EQ(out.data, filled(224, 224, 17, 200, 99).data);
  const auto odd = resize_center_crop(filled(363, 360, 5, 6, 7));
  EXPECT_EQ(odd.data, filled(224, 224, 5, 6, 7).data);
}

TEST(Resize, PbcGeometry) {
  // 363x360: shorter side 360 -> 224 (factor 0.6222), longer 363 -> 226, then a
  // 1-row offset centre crop.
  const auto g = resize_geometry(363, 360);
  EXPECT_EQ(g.resized_height, 226);
  EXPECT_EQ(g.resized_width, 224);
  EXPECT_EQ(g.crop_top, 1);
  EXPECT_EQ(g.crop_left, 0);
  const auto wide = resize_geometry(100, 300);
  EXPECT_EQ(wide.resized_height, 224);
  EXPECT_EQ(wide.resized_width, 672);
  EXPECT_EQ(wide.crop_left, 224);
}

TEST(Resize, LinearRampMatchesHalfPixelFormula) {
  // Bilinear interpolation reproduces a linear ramp exactly, so each output
  // column equals the half-pixel source coordinate, clamped and rounded.
  ImageTensor img(256, 256);
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<std::uint8_t>(x);
  const auto out = resize_center_crop(img);
  for (int x = 0; x < 224; ++x) {
    const double src = std::clamp((x + 0.5) * 256.0 / 224.0 - 0.5, 0.0, 255.0);
    EXPECT_EQ(out.at(100, x, 1), static_cast<std::uint8_t>(std::lround(src))) << "column " << x;
  }
}

TEST(Normalize, WhitePixel) {
  const auto t = normalize(filled(224, 224, 255, 255, 255));
  EXPECT_NEAR(t.at(0, 0, 0), (1 - 0.485) / 0.229, 1e-5);
  EXPECT_NEAR(t.at(1, 5, 5), (1 - 0.456) / 0.224, 1e-5);
  EXPECT_NEAR(t.at(2, 223, 223), (1 - 0.406) / 0.225, 1e-5);
  EXPECT_NEAR(t.at(0, 0, 0), 2.2489, 1e-4);
  EXPECT_NEAR(t.at(1, 0, 0), 2.4286, 1e-4);
  EXPECT_NEAR(t.at(2, 0, 0), 2.6400, 1e-4);
}

TEST(Normalize, MeanPixelMapsToZero) {
  const auto q = [](double m) { return static_cast<std::uint8_t>(std::lround(m * 255)); };
  const auto t = normalize(filled(224, 224, q(0.485), q(0.456), q(0.406)));
  for (int c = 0; c < 3; ++c) EXPECT_LE(std::abs(t.at(c, 10, 10)), 0.5 / 255.0 / kImageNetStd[c] + 1e-6);
}

TEST(Normalize, RejectsWrongSizeAndIsPlanar) {
  EXPECT_THROW(normalize(filled(10, 10, 0, 0, 0)), ParameterError);
  const auto t = normalize(filled(224, 224, 0, 255, 0));
  EXPECT_LT(t.at(0, 0, 0), 0.0F);
  EXPECT_GT(t.at(1, 0, 0), 0.0F);
  EXPECT_LT(t.at(2, 0, 0), 0.0F);
}

TEST(PreprocessProperty, DeterministicAndInRange) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 400);
    const int w = 1 + static_cast<int>(rng() % 400);
    ImageTensor img(h, w);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng() & 0xFF);
    const auto a = preprocess(img);
    const auto b = preprocess(img);
    ASSERT_EQ(a.data, b.data);
    for (int c = 0; c < 3; ++c) {
      const float lo = (0.0F - kImageNetMean[c]) / kImageNetStd[c];
      const float hi = (1.0F - kImageNetMean[c]) / kImageNetStd[c];
      for (std::size_t i = 0; i < NormalizedTensor::kPlane; ++i) {
        const float v = a.data[c * NormalizedTensor::kPlane + i];
        ASSERT_GE(v, lo);
        ASSERT_LE(v, hi);
      }
    }
  }
}
