#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hemaclass/binary_io.hpp"
#include "hemaclass/errors.hpp"

namespace hemaclass {

inline constexpr int kInputSide = 224;
inline constexpr std::array<float, 3> kImageNetMean{0.485F, 0.456F, 0.406F};
inline constexpr std::array<float, 3> kImageNetStd{0.229F, 0.224F, 0.225F};
// Recorded in feature provenance; bump when any step below changes numerically.
inline constexpr const char* kPreprocessingVersion =
    "decode-rgb8/resize-shorter-224-bilinear-halfpixel/center-crop-224/imagenet-norm/v1";

// 8-bit RGB, row-major, interleaved.
struct ImageTensor {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  ImageTensor() = default;
  ImageTensor(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3) {}

  std::uint8_t at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

// 3x224x224 channel-planar float32, ready for the backbone.
struct NormalizedTensor {
  static constexpr std::size_t kPlane = static_cast<std::size_t>(kInputSide) * kInputSide;
  static constexpr std::size_t kSize = 3 * kPlane;
  std::vector<float> data = std::vector<float>(kSize);

  float at(int c, int y, int x) const { return data[c * kPlane + static_cast<std::size_t>(y) * kInputSide + x]; }
};

inline ImageTensor decode_image(std::span<const std::uint8_t> bytes, const std::string& context = "<memory>") {
  if (bytes.empty()) throw DecodeError("decode failed (empty input): " + context);
  cv::Mat bgr;
  try {
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw DecodeError("decode failed: " + context + ": " + e.what());
  }
  if (bgr.empty() || bgr.type() != CV_8UC3) throw DecodeError("decode failed: " + context);
  ImageTensor img(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<std::uint8_t>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(y, x, 0) = row[3 * x + 2];
      img.at(y, x, 1) = row[3 * x + 1];
      img.at(y, x, 2) = row[3 * x + 0];
    }
  }
  return img;
}

inline ImageTensor decode_file(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const IoError& e) {
    throw DecodeError(std::string("decode failed: ") + e.what());
  }
  return decode_image(bytes, path.string());
}

// Size of the aspect-preserving resize whose shorter side is 224.
struct ResizeGeometry {
  int resized_height;
  int resized_width;
  int crop_top;
  int crop_left;
};

inline ResizeGeometry resize_geometry(int height, int width) {
  ResizeGeometry g{};
  if (height <= width) {
    g.resized_height = kInputSide;
    g.resized_width = static_cast<int>(std::lround(static_cast<double>(width) * kInputSide / height));
  } else {
    g.resized_width = kInputSide;
    g.resized_height = static_cast<int>(std::lround(static_cast<double>(height) * kInputSide / width));
  }
  g.resized_width = std::max(g.resized_width, kInputSide);
  g.resized_height = std::max(g.resized_height, kInputSide);
  g.crop_top = (g.resized_height - kInputSide) / 2;
  g.crop_left = (g.resized_width - kInputSide) / 2;
  return g;
}

namespace detail {

struct Tap {
  int lo;
  int hi;
  double frac;
};

// Half-pixel-centre bilinear taps for one output coordinate.
inline Tap bilinear_tap(int dst, int src_size, int dst_size) {
  const double scale = static_cast<double>(src_size) / dst_size;
  double s = (dst + 0.5) * scale - 0.5;
  s = std::clamp(s, 0.0, static_cast<double>(src_size - 1));
  const int lo = static_cast<int>(std::floor(s));
  const int hi = std::min(lo + 1, src_size - 1);
  return {lo, hi, s - lo};
}

}  // namespace detail

// Shorter side to 224 (bilinear, half-pixel centres), then central 224x224
// crop. Only the cropped window is interpolated.
inline ImageTensor resize_center_crop(const ImageTensor& img) {
  if (img.height < 1 || img.width < 1) throw ParameterError("resize_center_crop: empty image");
  const auto g = resize_geometry(img.height, img.width);
  std::vector<detail::Tap> rows(kInputSide);
  std::vector<detail::Tap> cols(kInputSide);
  for (int i = 0; i < kInputSide; ++i) {
    rows[i] = detail::bilinear_tap(i + g.crop_top, img.height, g.resized_height);
    cols[i] = detail::bilinear_tap(i + g.crop_left, img.width, g.resized_width);
  }
  ImageTensor out(kInputSide, kInputSide);
  for (int y = 0; y < kInputSide; ++y) {
    const auto& ry = rows[y];
    for (int x = 0; x < kInputSide; ++x) {
      const auto& cx = cols[x];
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(ry.lo, cx.lo, c) * (1.0 - cx.frac) + img.at(ry.lo, cx.hi, c) * cx.frac;
        const double bottom = img.at(ry.hi, cx.lo, c) * (1.0 - cx.frac) + img.at(ry.hi, cx.hi, c) * cx.frac;
        const double v = top * (1.0 - ry.frac) + bottom * ry.frac;
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

inline NormalizedTensor normalize(const ImageTensor& img) {
  if (img.height != kInputSide || img.width != kInputSide) {
    throw ParameterError("normalize: expected 224x224 input, got " + std::to_string(img.height) + "x" +
                         std::to_string(img.width));
  }
  NormalizedTensor out;
  for (int c = 0; c < 3; ++c) {
    float* plane = out.data.data() + c * NormalizedTensor::kPlane;
    for (int y = 0; y < kInputSide; ++y) {
      for (int x = 0; x < kInputSide; ++x) {
        const float unit = static_cast<float>(img.at(y, x, c)) / 255.0F;
        plane[y * kInputSide + x] = (unit - kImageNetMean[c]) / kImageNetStd[c];
      }
    }
  }
  return out;
}

inline NormalizedTensor preprocess(const ImageTensor& img) { return normalize(resize_center_crop(img)); }

inline NormalizedTensor preprocess_file(const std::filesystem::path& path) { return preprocess(decode_file(path)); }

}  // namespace hemaclass
