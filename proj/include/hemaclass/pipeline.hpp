#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemaclass/backbone.hpp"
#include "hemaclass/classifiers/head.hpp"
#include "hemaclass/data_model.hpp"
#include "hemaclass/features.hpp"
#include "hemaclass/metrics.hpp"
#include "hemaclass/model_selection.hpp"
#include "hemaclass/parallel.hpp"
#include "hemaclass/preprocessing.hpp"

namespace hemaclass {

// Decodes, preprocesses and embeds manifest rows `indices` in order. Images
// in a batch are preprocessed in parallel; rows keep the order of `indices`.
inline FeatureMatrix extract_rows(const Backbone& backbone, const DatasetManifest& manifest,
                                  const std::filesystem::path& image_root, std::span<const std::size_t> indices,
                                  std::size_t batch_size = kDefaultBatchSize, std::size_t jobs = 0) {
  if (batch_size == 0) throw ParameterError("extract: batch size must be >= 1");
  if (backbone.has_logits() && backbone.num_classes() != manifest.num_classes()) {
    throw DimensionMismatch("backbone logits have " + std::to_string(backbone.num_classes()) + " classes, manifest has " +
                            std::to_string(manifest.num_classes()));
  }
  FeatureMatrix fm;
  fm.rows = indices.size();
  fm.dim = backbone.feature_dim();
  fm.num_classes = manifest.num_classes();
  fm.values.resize(fm.rows * fm.dim);
  fm.labels.resize(fm.rows);
  nlohmann::json paths = nlohmann::json::array();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= manifest.size()) throw ParameterError("extract: index out of manifest range");
    const auto& e = manifest.entries[indices[r]];
    fm.labels[r] = static_cast<std::uint16_t>(e.label);
    paths.push_back(e.path);
  }
  std::vector<NormalizedTensor> batch;
  for (std::size_t begin = 0; begin < indices.size(); begin += batch_size) {
    const auto end = std::min(indices.size(), begin + batch_size);
    batch.assign(end - begin, NormalizedTensor{});
    parallel_for(end - begin, jobs, [&](std::size_t i) {
      const auto path = image_root / manifest.entries[indices[begin + i]].path;
      batch[i] = preprocess_file(path);
    });
    const auto rows = extract_features(backbone, batch, batch.size());
    std::copy(rows.begin(), rows.end(), fm.values.begin() + static_cast<std::ptrdiff_t>(begin * fm.dim));
  }
  fm.metadata = {{"backbone_sha256", backbone.identity()},
                 {"backbone_file", backbone.path().filename().string()},
                 {"preprocessing", kPreprocessingVersion},
                 {"manifest_sha256", manifest_hash(manifest)},
                 {"class_names", manifest.class_names},
                 {"manifest_indices", std::vector<std::size_t>(indices.begin(), indices.end())},
                 {"paths", paths}};
  fm.validate();
  return fm;
}

// Row subset of a feature matrix; metadata arrays indexed per row follow.
inline FeatureMatrix subset_rows(const FeatureMatrix& fm, std::span<const std::size_t> rows) {
  FeatureMatrix out;
  out.rows = rows.size();
  out.dim = fm.dim;
  out.num_classes = fm.num_classes;
  out.values.reserve(rows.size() * fm.dim);
  out.metadata = fm.metadata;
  nlohmann::json paths = nlohmann::json::array();
  std::vector<std::size_t> manifest_indices;
  for (auto r : rows) {
    const auto src = fm.row(r);
    out.values.insert(out.values.end(), src.begin(), src.end());
    out.labels.push_back(fm.labels[r]);
    if (fm.metadata.contains("paths")) paths.push_back(fm.metadata["paths"][r]);
    if (fm.metadata.contains("manifest_indices")) manifest_indices.push_back(fm.metadata["manifest_indices"][r].get<std::size_t>());
  }
  if (fm.metadata.contains("paths")) out.metadata["paths"] = paths;
  if (fm.metadata.contains("manifest_indices")) out.metadata["manifest_indices"] = manifest_indices;
  return out;
}

// "1%", "2.5%", "30%"
inline std::string fraction_label(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g%%", fraction * 100.0);
  return buf;
}

struct Evaluation {
  EvalReport report;
  std::vector<Label> predictions;
  std::vector<std::string> misclassified;  // "path<TAB>true<TAB>predicted"
};

inline Evaluation evaluate_head(const TrainedHead& head, const FeatureMatrix& features, std::string split, std::string classifier,
                                const std::string& highlight = "erythroblast") {
  if (features.dim != head.dim()) {
    throw DimensionMismatch("model expects " + std::to_string(head.dim()) + "-dim features, file has " + std::to_string(features.dim));
  }
  if (features.num_classes != head.num_classes()) {
    throw DimensionMismatch("model was trained for " + std::to_string(head.num_classes()) + " classes, features have " +
                            std::to_string(features.num_classes));
  }
  std::vector<std::string> names;
  if (features.metadata.contains("class_names")) names = features.metadata["class_names"].get<std::vector<std::string>>();
  if (names.size() != features.num_classes) {
    names.clear();
    for (std::size_t c = 0; c < features.num_classes; ++c) names.push_back("class_" + std::to_string(c));
  }
  Evaluation ev;
  ev.predictions = predict_head(head, Matrix::from_features(features));
  const auto truth = labels_of(features);
  ev.report = make_report(truth, ev.predictions, names, std::move(split), std::move(classifier), highlight);
  for (const char* key : {"backbone_sha256", "preprocessing", "manifest_sha256", "plan_sha256", "partition"}) {
    if (features.metadata.contains(key)) ev.report.provenance[key] = features.metadata[key];
  }
  ev.report.provenance["model"] = head.metadata;
  if (features.metadata.contains("paths")) {
    const auto& paths = features.metadata["paths"];
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] != ev.predictions[i]) {
        ev.misclassified.push_back(paths[i].get<std::string>() + "\t" + names[truth[i]] + "\t" + names[ev.predictions[i]]);
      }
    }
  }
  return ev;
}

}  // namespace hemaclass
