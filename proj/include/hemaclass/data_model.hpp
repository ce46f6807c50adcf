#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hemaclass/binary_io.hpp"
#include "hemaclass/errors.hpp"
#include "hemaclass/hash.hpp"
#include "hemaclass/preprocessing.hpp"
#include "hemaclass/rng.hpp"

namespace hemaclass {

struct ManifestEntry {
  std::string path;  // relative, POSIX separators
  std::uint32_t label = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

// Class-labelled image inventory. Entries are kept sorted by (label, path).
struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;
  std::size_t skipped_files = 0;  // unreadable files dropped during ingestion

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t size() const { return entries.size(); }

  std::vector<std::size_t> class_sizes() const {
    std::vector<std::size_t> sizes(class_names.size(), 0);
    for (const auto& e : entries) ++sizes[e.label];
    return sizes;
  }

  // Indices of each class's entries, ascending.
  std::vector<std::vector<std::size_t>> indices_by_class() const {
    std::vector<std::vector<std::size_t>> out(class_names.size());
    for (std::size_t i = 0; i < entries.size(); ++i) out[entries[i].label].push_back(i);
    return out;
  }

  void validate() const {
    if (class_names.size() < 2) throw IngestError("manifest: need >=2 classes, got " + std::to_string(class_names.size()));
    if (entries.empty()) throw IngestError("manifest: no entries");
    std::set<std::string_view> seen;
    for (const auto& e : entries) {
      if (e.label >= class_names.size()) throw IngestError("manifest: label out of range for " + e.path);
      if (!seen.insert(e.path).second) throw IngestError("manifest: duplicate path " + e.path);
    }
  }
};

namespace detail {

inline void sort_entries(std::vector<ManifestEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    return a.label != b.label ? a.label < b.label : a.path < b.path;
  });
}

inline bool has_image_extension(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp" || ext == ".tif" || ext == ".tiff";
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw FormatError("csv: unterminated quoted field");
  if (any || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

struct IngestOptions {
  // Fully decode every file instead of only checking the image signature.
  bool verify_decode = false;
};

// One subdirectory per class; class names sorted lexicographically.
inline DatasetManifest ingest_directory(const std::filesystem::path& root, const IngestOptions& opts = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IngestError("ingest: not a directory: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& de : fs::directory_iterator(root)) {
    if (de.is_directory()) class_dirs.push_back(de.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.size() < 2) {
    throw IngestError("ingest: need >=2 classes (class subdirectories), found " + std::to_string(class_dirs.size()) +
                      " under " + root.string());
  }
  DatasetManifest m;
  for (std::uint32_t label = 0; label < class_dirs.size(); ++label) {
    const auto& dir = class_dirs[label];
    m.class_names.push_back(dir.filename().string());
    std::size_t kept = 0;
    for (const auto& de : fs::recursive_directory_iterator(dir)) {
      if (!de.is_regular_file() || !detail::has_image_extension(de.path())) continue;
      bool ok = false;
      try {
        if (opts.verify_decode) {
          (void)decode_file(de.path());
          ok = true;
        } else {
          ok = de.file_size() > 0 && cv::haveImageReader(de.path().string());
        }
      } catch (const std::exception&) {
        ok = false;
      }
      if (!ok) {
        ++m.skipped_files;
        continue;
      }
      m.entries.push_back({fs::relative(de.path(), root).generic_string(), label});
      ++kept;
    }
    if (kept == 0) throw IngestError("ingest: class '" + m.class_names.back() + "' has no readable images");
  }
  detail::sort_entries(m.entries);
  return m;
}

// Canonical CSV: header `path,label`, entries in manifest order, LF endings.
inline std::string manifest_to_csv(const DatasetManifest& m) {
  std::string out = "path,label\n";
  for (const auto& e : m.entries) {
    out += detail::csv_field(e.path);
    out += ',';
    out += detail::csv_field(m.class_names[e.label]);
    out += '\n';
  }
  return out;
}

inline DatasetManifest manifest_from_csv(std::string_view text) {
  auto rows = detail::parse_csv(text);
  if (rows.empty() || rows[0].size() != 2 || rows[0][0] != "path" || rows[0][1] != "label") {
    throw FormatError("manifest csv: expected header 'path,label'");
  }
  std::vector<std::pair<std::string, std::string>> raw;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() == 1 && rows[r][0].empty()) continue;
    if (rows[r].size() != 2) throw FormatError("manifest csv: row " + std::to_string(r + 1) + " needs 2 fields");
    raw.emplace_back(rows[r][0], rows[r][1]);
  }
  std::set<std::string> labels;
  for (const auto& [p, l] : raw) labels.insert(l);
  DatasetManifest m;
  m.class_names.assign(labels.begin(), labels.end());
  for (auto& [p, l] : raw) {
    const auto it = std::lower_bound(m.class_names.begin(), m.class_names.end(), l);
    m.entries.push_back({std::move(p), static_cast<std::uint32_t>(it - m.class_names.begin())});
  }
  detail::sort_entries(m.entries);
  m.validate();
  return m;
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) { return manifest_from_csv(read_file_text(path)); }

inline void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  write_file_text(path, manifest_to_csv(m));
}

// SHA-256 of the canonical CSV bytes.
inline std::string manifest_hash(const DatasetManifest& m) { return sha256_hex(manifest_to_csv(m)); }

struct SplitSpec {
  double train_fraction = 0.0;  // (0, 1]
  std::size_t test_count = 0;
  std::uint64_t seed = 0;
};

struct SplitPlan {
  SplitSpec spec;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
  std::vector<std::size_t> test_indices;
  std::vector<std::size_t> per_class_train_counts;
  std::vector<std::size_t> per_class_val_counts;
  std::vector<std::size_t> per_class_test_counts;
  std::vector<std::string> class_names;
  std::string manifest_sha256;
  std::string manifest_path;  // as supplied to the split command; informational
  std::string shuffle_algorithm = kShuffleAlgorithm;

  const std::vector<std::size_t>& partition(std::string_view name) const {
    if (name == "train") return train_indices;
    if (name == "val" || name == "validation") return val_indices;
    if (name == "test") return test_indices;
    throw ParameterError("unknown partition '" + std::string(name) + "' (expected train|val|test)");
  }
};

// floor(fraction * size), tolerant of representation error such as 0.2*1420.
inline std::size_t fraction_count(double fraction, std::size_t size) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(size) + 1e-9));
}

// Per-class test counts: rounded proportional share, then +-1 on the largest
// classes until the total is exactly test_count.
inline std::vector<std::size_t> allocate_test_counts(const std::vector<std::size_t>& class_sizes, std::size_t test_count) {
  const double total = std::accumulate(class_sizes.begin(), class_sizes.end(), 0.0);
  std::vector<std::size_t> counts(class_sizes.size());
  long long assigned = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    counts[c] = static_cast<std::size_t>(std::llround(static_cast<double>(test_count) * class_sizes[c] / total));
    assigned += static_cast<long long>(counts[c]);
  }
  std::vector<std::size_t> by_size(class_sizes.size());
  std::iota(by_size.begin(), by_size.end(), 0);
  std::stable_sort(by_size.begin(), by_size.end(),
                   [&](std::size_t a, std::size_t b) { return class_sizes[a] > class_sizes[b]; });
  long long diff = static_cast<long long>(test_count) - assigned;
  for (std::size_t step = 0; diff != 0; ++step) {
    const auto c = by_size[step % by_size.size()];
    if (diff > 0) {
      ++counts[c];
      --diff;
    } else if (counts[c] > 0) {
      --counts[c];
      ++diff;
    }
  }
  return counts;
}

// Stratified split: the test set is drawn first from a seeded per-class
// shuffle, so it is the same for every train_fraction under one seed.
inline SplitPlan make_split(const DatasetManifest& manifest, const SplitSpec& spec) {
  manifest.validate();
  if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0)) {
    throw SplitError("split: train_fraction must be in (0,1], got " + std::to_string(spec.train_fraction));
  }
  const auto sizes = manifest.class_sizes();
  const auto n = manifest.size();
  if (static_cast<double>(spec.train_fraction) * n + static_cast<double>(spec.test_count) > static_cast<double>(n) + 1e-9) {
    throw SplitError("split: train_fraction*total + test_count exceeds " + std::to_string(n) + " entries");
  }
  const auto test_counts = allocate_test_counts(sizes, spec.test_count);

  SplitPlan plan;
  plan.spec = spec;
  plan.class_names = manifest.class_names;
  plan.manifest_sha256 = manifest_hash(manifest);
  const auto k = sizes.size();
  plan.per_class_train_counts.resize(k);
  plan.per_class_val_counts.resize(k);
  plan.per_class_test_counts = test_counts;

  for (std::size_t c = 0; c < k; ++c) {
    const auto train = fraction_count(spec.train_fraction, sizes[c]);
    const auto& name = manifest.class_names[c];
    if (train == 0) {
      throw SplitError("split: class '" + name + "' (" + std::to_string(sizes[c]) +
                       " images) gets no training samples at train_fraction " + std::to_string(spec.train_fraction));
    }
    if (train + test_counts[c] > sizes[c]) {
      throw SplitError("split: class '" + name + "' too small: needs " + std::to_string(train) + " train + " +
                       std::to_string(test_counts[c]) + " test, has " + std::to_string(sizes[c]));
    }
    if (spec.test_count > 0 && test_counts[c] == 0) {
      throw SplitError("split: class '" + name + "' receives no test samples");
    }
    plan.per_class_train_counts[c] = train;
    plan.per_class_val_counts[c] = sizes[c] - train - test_counts[c];
  }

  Rng rng(spec.seed);
  auto by_class = manifest.indices_by_class();
  for (std::size_t c = 0; c < k; ++c) {
    auto& idx = by_class[c];
    seeded_shuffle(std::span<std::size_t>(idx), rng);
    const auto t = test_counts[c];
    const auto tr = plan.per_class_train_counts[c];
    plan.test_indices.insert(plan.test_indices.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(t));
    plan.train_indices.insert(plan.train_indices.end(), idx.begin() + static_cast<std::ptrdiff_t>(t),
                              idx.begin() + static_cast<std::ptrdiff_t>(t + tr));
    plan.val_indices.insert(plan.val_indices.end(), idx.begin() + static_cast<std::ptrdiff_t>(t + tr), idx.end());
  }
  std::sort(plan.train_indices.begin(), plan.train_indices.end());
  std::sort(plan.val_indices.begin(), plan.val_indices.end());
  std::sort(plan.test_indices.begin(), plan.test_indices.end());
  return plan;
}

struct SplitVerification {
  bool ok = true;
  std::vector<std::string> problems;
  // counts[partition][class], partitions ordered train, val, test.
  std::array<std::vector<std::size_t>, 3> counts;

  std::string table(const std::vector<std::string>& class_names) const {
    std::ostringstream os;
    os << "class,train,val,test\n";
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      os << class_names[c] << ',' << counts[0][c] << ',' << counts[1][c] << ',' << counts[2][c] << '\n';
    }
    return os.str();
  }
};

inline SplitVerification verify_split(const SplitPlan& plan, const DatasetManifest& manifest) {
  SplitVerification v;
  const auto n = manifest.size();
  const auto k = manifest.num_classes();
  for (auto& c : v.counts) c.assign(k, 0);
  auto fail = [&](std::string msg) {
    v.ok = false;
    v.problems.push_back(std::move(msg));
  };

  static constexpr std::array<const char*, 3> kNames{"train", "val", "test"};
  const std::array<const std::vector<std::size_t>*, 3> parts{&plan.train_indices, &plan.val_indices, &plan.test_indices};
  std::vector<int> owner(n, -1);
  for (int p = 0; p < 3; ++p) {
    for (auto i : *parts[p]) {
      if (i >= n) {
        fail(std::string("bounds: index ") + std::to_string(i) + " in " + kNames[p] + " exceeds manifest size");
        continue;
      }
      if (owner[i] != -1) {
        fail("disjointness: index " + std::to_string(i) + " appears in " + kNames[owner[i]] + " and " + kNames[p]);
        continue;
      }
      owner[i] = p;
      ++v.counts[p][manifest.entries[i].label];
    }
  }
  std::size_t missing = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (owner[i] == -1) {
      if (missing < 10) fail("coverage: index " + std::to_string(i) + " not assigned to any partition");
      ++missing;
    }
  }
  if (missing > 10) fail("coverage: " + std::to_string(missing) + " indices unassigned in total");
  if (plan.test_indices.size() != plan.spec.test_count) {
    fail("test size: " + std::to_string(plan.test_indices.size()) + " != test_count " + std::to_string(plan.spec.test_count));
  }
  for (int p = 0; p < 3; ++p) {
    if (parts[p]->empty()) continue;
    for (std::size_t c = 0; c < k; ++c) {
      if (v.counts[p][c] == 0) fail(std::string("stratification: class '") + manifest.class_names[c] + "' absent from " + kNames[p]);
    }
  }
  if (!plan.manifest_sha256.empty() && plan.manifest_sha256 != manifest_hash(manifest)) {
    fail("manifest hash mismatch: plan was made from a different manifest");
  }
  return v;
}

inline nlohmann::json split_plan_to_json(const SplitPlan& plan) {
  nlohmann::json j;
  j["format"] = "hemaclass.split_plan/1";
  j["spec"] = {{"train_fraction", plan.spec.train_fraction}, {"test_count", plan.spec.test_count}, {"seed", plan.spec.seed}};
  j["seed"] = plan.spec.seed;
  j["shuffle_algorithm"] = plan.shuffle_algorithm;
  j["manifest_sha256"] = plan.manifest_sha256;
  j["manifest_path"] = plan.manifest_path;
  j["class_names"] = plan.class_names;
  j["per_class_counts"] = {{"train", plan.per_class_train_counts},
                           {"val", plan.per_class_val_counts},
                           {"test", plan.per_class_test_counts}};
  j["train_indices"] = plan.train_indices;
  j["val_indices"] = plan.val_indices;
  j["test_indices"] = plan.test_indices;
  return j;
}

inline SplitPlan split_plan_from_json(const nlohmann::json& j) {
  try {
    SplitPlan plan;
    plan.spec.train_fraction = j.at("spec").at("train_fraction").get<double>();
    plan.spec.test_count = j.at("spec").at("test_count").get<std::size_t>();
    plan.spec.seed = j.at("spec").at("seed").get<std::uint64_t>();
    plan.shuffle_algorithm = j.at("shuffle_algorithm").get<std::string>();
    plan.manifest_sha256 = j.at("manifest_sha256").get<std::string>();
    plan.manifest_path = j.value("manifest_path", std::string{});
    plan.class_names = j.at("class_names").get<std::vector<std::string>>();
    const auto& counts = j.at("per_class_counts");
    plan.per_class_train_counts = counts.at("train").get<std::vector<std::size_t>>();
    plan.per_class_val_counts = counts.at("val").get<std::vector<std::size_t>>();
    plan.per_class_test_counts = counts.at("test").get<std::vector<std::size_t>>();
    plan.train_indices = j.at("train_indices").get<std::vector<std::size_t>>();
    plan.val_indices = j.at("val_indices").get<std::vector<std::size_t>>();
    plan.test_indices = j.at("test_indices").get<std::vector<std::size_t>>();
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("split plan json: ") + e.what());
  }
}

inline std::string split_plan_to_text(const SplitPlan& plan) { return split_plan_to_json(plan).dump(1) + "\n"; }

inline SplitPlan read_split_plan(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("split plan " + path.string() + ": " + e.what());
  }
  return split_plan_from_json(j);
}

}  // namespace hemaclass
