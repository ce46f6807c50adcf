#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemaclass/binary_io.hpp"
#include "hemaclass/errors.hpp"

namespace hemaclass {

// N x D float32 features, one label per row, plus provenance metadata
// (backbone identity, preprocessing version, plan hash, partition, paths).
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<float> values;
  std::vector<std::uint16_t> labels;
  nlohmann::json metadata = nlohmann::json::object();

  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }

  void validate() const {
    if (values.size() != rows * dim) throw FormatError("feature matrix: value count != rows*dim");
    if (labels.size() != rows) throw FormatError("feature matrix: label count != rows");
    for (float v : values) {
      if (!std::isfinite(v)) throw FormatError("feature matrix: non-finite value");
    }
    for (auto l : labels) {
      if (l >= num_classes) throw FormatError("feature matrix: label " + std::to_string(l) + " >= K");
    }
  }
};

inline constexpr std::uint32_t kFeatbVersion = 1;

// FEATB: "FEAT", u32 version, u32 N, u32 D, u32 K, N*D f32 LE, N u16 labels,
// u32 metadata length, UTF-8 JSON metadata.
inline std::vector<std::uint8_t> encode_featb(const FeatureMatrix& fm) {
  fm.validate();
  ByteWriter w;
  w.raw(std::string_view("FEAT"));
  w.u32(kFeatbVersion);
  w.u32(static_cast<std::uint32_t>(fm.rows));
  w.u32(static_cast<std::uint32_t>(fm.dim));
  w.u32(static_cast<std::uint32_t>(fm.num_classes));
  for (float v : fm.values) w.f32(v);
  for (auto l : fm.labels) w.u16(l);
  w.str(fm.metadata.dump());
  return w.take();
}

inline FeatureMatrix decode_featb(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "FEATB");
  auto magic = r.raw(4);
  if (std::string(magic.begin(), magic.end()) != "FEAT") r.fail("bad magic");
  if (const auto v = r.u32(); v != kFeatbVersion) r.fail("unsupported version " + std::to_string(v));
  FeatureMatrix fm;
  fm.rows = r.u32();
  fm.dim = r.u32();
  fm.num_classes = r.u32();
  const std::uint64_t cells = static_cast<std::uint64_t>(fm.rows) * fm.dim;
  if (cells * 4 + fm.rows * 2ULL > r.remaining()) r.fail("truncated payload");
  fm.values.resize(cells);
  for (auto& v : fm.values) v = r.f32();
  fm.labels.resize(fm.rows);
  for (auto& l : fm.labels) l = r.u16();
  const auto meta = r.str();
  if (r.remaining() != 0) r.fail("trailing bytes");
  try {
    fm.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::parse_error& e) {
    r.fail(std::string("metadata json: ") + e.what());
  }
  fm.validate();
  return fm;
}

inline void write_featb(const std::filesystem::path& path, const FeatureMatrix& fm) {
  write_file_bytes(path, encode_featb(fm));
}

inline FeatureMatrix read_featb(const std::filesystem::path& path) { return decode_featb(read_file_bytes(path)); }

}  // namespace hemaclass
