#pragma once

#include <opencv2/dnn.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hemaclass/errors.hpp"
#include "hemaclass/hash.hpp"
#include "hemaclass/preprocessing.hpp"

namespace hemaclass {

inline constexpr const char* kFeaturesOutput = "features";
inline constexpr const char* kLogitsOutput = "logits";
inline constexpr std::size_t kDefaultBatchSize = 64;

// Row-major batch output of the backbone.
struct BackboneOutput {
  std::size_t rows = 0;
  std::size_t feature_dim = 0;
  std::size_t logit_dim = 0;
  std::vector<float> features;
  std::vector<float> logits;  // empty unless requested and available
};

// ONNX CNN wrapped for feature extraction. Load-time probing infers the
// feature width D from the `features` output and K from `logits`, if any.
// Inference is serialized internally, so one instance may be shared.
class Backbone {
 public:
  static Backbone load(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw IoError("backbone: model file not found: " + path.string());
    Backbone b;
    b.path_ = path;
    b.identity_ = sha256_file_hex(path);
    try {
      b.engine_->net = cv::dnn::readNetFromONNX(path.string());
    } catch (const cv::Exception& e) {
      throw SchemaError("backbone: " + path.string() + " is not a loadable ONNX graph: " + e.what());
    }
    auto& net = b.engine_->net;
    if (net.empty()) throw SchemaError("backbone: " + path.string() + " produced an empty network");
    net.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
    net.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);

    const auto names = net.getLayerNames();
    const auto has = [&](const std::string& n) { return std::find(names.begin(), names.end(), n) != names.end(); };
    if (!has(kFeaturesOutput)) {
      std::string avail;
      for (const auto& n : names) avail += (avail.empty() ? "" : ", ") + n;
      throw SchemaError("backbone: graph has no '" + std::string(kFeaturesOutput) + "' output; available tensors: " + avail);
    }
    b.has_logits_ = has(kLogitsOutput);
    NormalizedTensor zero;
    std::fill(zero.data.begin(), zero.data.end(), 0.0F);
    const auto probe = b.run(std::span<const NormalizedTensor>(&zero, 1), b.has_logits_);
    b.feature_dim_ = probe.feature_dim;
    b.num_classes_ = probe.logit_dim;
    if (b.feature_dim_ == 0) throw SchemaError("backbone: feature output has zero width");
    return b;
  }

  std::size_t feature_dim() const { return feature_dim_; }
  bool has_logits() const { return has_logits_; }
  // 0 when the graph has no logits output.
  std::size_t num_classes() const { return num_classes_; }
  const std::string& identity() const { return identity_; }
  const std::filesystem::path& path() const { return path_; }
  static constexpr const char* input_name() { return "input"; }

  BackboneOutput run(std::span<const NormalizedTensor> batch, bool want_logits = false) const {
    BackboneOutput out;
    out.rows = batch.size();
    if (batch.empty()) return out;
    const int shape[] = {static_cast<int>(batch.size()), 3, kInputSide, kInputSide};
    cv::Mat blob(4, shape, CV_32F);
    auto* dst = blob.ptr<float>();
    for (const auto& t : batch) {
      std::memcpy(dst, t.data.data(), NormalizedTensor::kSize * sizeof(float));
      dst += NormalizedTensor::kSize;
    }
    std::vector<cv::String> wanted{kFeaturesOutput};
    if (want_logits && has_logits_) wanted.emplace_back(kLogitsOutput);
    std::vector<cv::Mat> results;
    {
      std::lock_guard lock(engine_->mutex);
      engine_->net.setInput(blob);
      engine_->net.forward(results, wanted);
    }
    auto flatten = [&](const cv::Mat& m, std::vector<float>& into) -> std::size_t {
      if (m.type() != CV_32F || m.dims < 2 || static_cast<std::size_t>(m.size[0]) != batch.size()) {
        throw InferenceError("backbone: unexpected output shape");
      }
      const auto width = m.total() / batch.size();
      const cv::Mat c = m.isContinuous() ? m : m.clone();
      into.assign(c.ptr<float>(), c.ptr<float>() + m.total());
      return width;
    };
    out.feature_dim = flatten(results[0], out.features);
    if (results.size() > 1) out.logit_dim = flatten(results[1], out.logits);
    return out;
  }

 private:
  struct Engine {
    cv::dnn::Net net;
    std::mutex mutex;
  };

  Backbone() = default;

  std::filesystem::path path_;
  std::string identity_;
  std::shared_ptr<Engine> engine_ = std::make_shared<Engine>();
  bool has_logits_ = false;
  std::size_t feature_dim_ = 0;
  std::size_t num_classes_ = 0;
};

// Runs the backbone over `images` in batches; row i of the result belongs to
// images[i] regardless of batch size.
inline std::vector<float> extract_features(const Backbone& backbone, std::span<const NormalizedTensor> images,
                                           std::size_t batch_size = kDefaultBatchSize) {
  if (batch_size == 0) throw ParameterError("extract_features: batch_size must be >= 1");
  const auto d = backbone.feature_dim();
  std::vector<float> out(images.size() * d);
  for (std::size_t begin = 0; begin < images.size(); begin += batch_size) {
    const auto end = std::min(images.size(), begin + batch_size);
    BackboneOutput res;
    try {
      res = backbone.run(images.subspan(begin, end - begin));
    } catch (const cv::Exception& e) {
      throw InferenceError("inference failed for batch [" + std::to_string(begin) + ", " + std::to_string(end) + "): " + e.what());
    } catch (const InferenceError& e) {
      throw InferenceError("inference failed for batch [" + std::to_string(begin) + ", " + std::to_string(end) + "): " + e.what());
    }
    if (res.feature_dim != d) throw InferenceError("backbone: feature width changed between batches");
    std::copy(res.features.begin(), res.features.end(), out.begin() + static_cast<std::ptrdiff_t>(begin * d));
  }
  return out;
}

// Numerically stable softmax (max subtraction).
inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

inline constexpr double kCrossEntropyEpsilon = 1e-12;

// -log(probs[true_label]) with the probability clamped to >= 1e-12.
inline double cross_entropy(std::span<const double> probs, std::size_t true_label) {
  if (true_label >= probs.size()) throw ParameterError("cross_entropy: label out of range");
  return -std::log(std::max(probs[true_label], kCrossEntropyEpsilon));
}

}  // namespace hemaclass
