#pragma once

#include <opencv2/imgcodecs.hpp>
#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hemaclass/classifiers/matrix.hpp"
#include "hemaclass/data_model.hpp"

namespace testing_support {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(HEMACLASS_FIXTURE_DIR) / name; }

// Directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "hemaclass") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// Manifest with the given class sizes; paths are synthetic.
inline hemaclass::DatasetManifest synthetic_manifest(const std::vector<std::size_t>& sizes,
                                                     const std::vector<std::string>& names = {}) {
  hemaclass::DatasetManifest m;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    m.class_names.push_back(c < names.size() ? names[c] : "class" + std::to_string(c));
  }
  for (std::uint32_t c = 0; c < sizes.size(); ++c) {
    for (std::size_t i = 0; i < sizes[c]; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%06zu.jpg", i);
      m.entries.push_back({m.class_names[c] + "/" + buf, c});
    }
  }
  return m;
}

inline const std::vector<std::size_t> kPbcClassSizes{3329, 3117, 1218, 1214, 1420, 2895, 1551, 2348};
// Same order as kPbcClassSizes.
inline const std::vector<std::string> kPbcClassNames{"neutrophil", "eosinophil", "basophil", "lymphocyte",
                                                     "monocyte", "ig", "erythroblast", "platelet"};

// Gaussian blobs, one centre per class spaced `spread` apart on the diagonal.
struct Blobs {
  hemaclass::Matrix x;
  std::vector<hemaclass::Label> y;
};

inline Blobs gaussian_blobs(std::size_t n, std::size_t dim, std::size_t classes, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Blobs b{hemaclass::Matrix(n, dim), std::vector<hemaclass::Label>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<hemaclass::Label>(i % classes);
    b.y[i] = c;
    for (std::size_t j = 0; j < dim; ++j) b.x(i, j) = noise(rng) + (j % classes == c ? spread : 0.0);
  }
  return b;
}

// Writes `per_class` PNGs per class under root/<class>/; class c images are
// dominated by channel c so the fixture backbone separates them.
inline hemaclass::DatasetManifest write_image_dataset(const std::filesystem::path& root, const std::vector<std::string>& classes,
                                                      std::size_t per_class, std::uint64_t seed, int side = 48) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> jitter(-20, 20);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::filesystem::create_directories(root / classes[c]);
    for (std::size_t i = 0; i < per_class; ++i) {
      cv::Mat img(side, side + 3, CV_8UC3);
      for (int y = 0; y < img.rows; ++y) {
        for (int x = 0; x < img.cols; ++x) {
          auto& px = img.at<cv::Vec3b>(y, x);
          for (int ch = 0; ch < 3; ++ch) {
            // OpenCV stores BGR; class c brightens RGB channel c.
            const int rgb = 2 - ch;
            const int base = (static_cast<std::size_t>(rgb) == c % 3) ? 200 : 60;
            px[ch] = static_cast<std::uint8_t>(std::clamp(base + jitter(rng), 0, 255));
          }
        }
      }
      char name[32];
      std::snprintf(name, sizeof name, "img_%03zu.png", i);
      cv::imwrite((root / classes[c] / name).string(), img);
    }
  }
  return hemaclass::ingest_directory(root);
}

}  // namespace testing_support
