#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hemaclass/binary_io.hpp"
#include "hemaclass/classifiers/forest.hpp"
#include "hemaclass/classifiers/gbt.hpp"
#include "hemaclass/classifiers/knn.hpp"
#include "hemaclass/classifiers/standardizer.hpp"
#include "hemaclass/classifiers/svm.hpp"
#include "hemaclass/hash.hpp"

namespace hemaclass {

enum class HeadKind : std::uint32_t { Knn = 1, Svm = 2, Forest = 3, Gbt = 4 };

inline const char* head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::Knn: return "knn";
    case HeadKind::Svm: return "svm";
    case HeadKind::Forest: return "forest";
    case HeadKind::Gbt: return "gbt";
  }
  return "?";
}

inline HeadKind parse_head_kind(std::string_view s) {
  if (s == "knn") return HeadKind::Knn;
  if (s == "svm") return HeadKind::Svm;
  if (s == "forest" || s == "rf" || s == "random_forest") return HeadKind::Forest;
  if (s == "gbt" || s == "xgboost" || s == "boosting") return HeadKind::Gbt;
  throw ParameterError("unknown head kind '" + std::string(s) + "' (expected knn|svm|forest|gbt)");
}

// Classifier column label, e.g. "ResNet50-SVM".
inline std::string head_display_name(HeadKind k, std::string_view backbone = "ResNet50") {
  const char* suffix = "";
  switch (k) {
    case HeadKind::Knn: suffix = "KNN"; break;
    case HeadKind::Svm: suffix = "SVM"; break;
    case HeadKind::Forest: suffix = "RandomForest"; break;
    case HeadKind::Gbt: suffix = "XGBoost"; break;
  }
  return std::string(backbone) + "-" + suffix;
}

using HeadParams = std::variant<KnnParams, SvmParams, ForestParams, GbtParams>;
using HeadModel = std::variant<KnnModel, SvmModel, ForestModel, GbtModel>;

inline HeadKind kind_of(const HeadParams& p) { return static_cast<HeadKind>(p.index() + 1); }
inline HeadKind kind_of(const HeadModel& m) { return static_cast<HeadKind>(m.index() + 1); }

// KNN and SVM see standardized features; the tree heads see raw features
// through an identity standardizer.
inline bool uses_standardization(HeadKind k) { return k == HeadKind::Knn || k == HeadKind::Svm; }

struct TrainedHead {
  Standardizer standardizer;
  HeadModel model;
  nlohmann::json metadata = nlohmann::json::object();  // grid point, CV score, seed, provenance

  HeadKind kind() const { return kind_of(model); }
  std::size_t dim() const { return standardizer.dim(); }
  std::size_t num_classes() const {
    return std::visit([](const auto& m) { return m.num_classes; }, model);
  }
};

inline TrainedHead fit_head(const Matrix& x, std::span<const Label> y, const HeadParams& params, std::size_t num_classes,
                            std::size_t jobs = 1) {
  check_training_input(x, y, "fit_head");
  TrainedHead head;
  const auto kind = kind_of(params);
  head.standardizer = uses_standardization(kind) ? Standardizer::fit(x) : Standardizer::identity(x.cols());
  const Matrix xs = uses_standardization(kind) ? head.standardizer.apply(x) : Matrix{};
  const Matrix& input = uses_standardization(kind) ? xs : x;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) head.model = train_knn(input, y, p, num_classes);
        else if constexpr (std::is_same_v<P, SvmParams>) head.model = train_svm(input, y, p, num_classes);
        else if constexpr (std::is_same_v<P, ForestParams>) head.model = train_forest(input, y, p, num_classes, jobs);
        else head.model = train_gbt(input, y, p, num_classes, jobs);
      },
      params);
  return head;
}

inline std::vector<Label> predict_head(const TrainedHead& head, const Matrix& q) {
  if (q.cols() != head.dim()) {
    throw DimensionMismatch("model expects " + std::to_string(head.dim()) + "-dim features, got " + std::to_string(q.cols()));
  }
  const Matrix xs = uses_standardization(head.kind()) ? head.standardizer.apply(q) : Matrix{};
  const Matrix& input = uses_standardization(head.kind()) ? xs : q;
  return std::visit(
      [&](const auto& m) -> std::vector<Label> {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, KnnModel>) return predict_knn(m, input);
        else if constexpr (std::is_same_v<M, SvmModel>) return predict_svm(m, input);
        else if constexpr (std::is_same_v<M, ForestModel>) return predict_forest(m, input);
        else return predict_gbt(m, input);
      },
      head.model);
}

inline nlohmann::json params_to_json(const HeadParams& params) {
  return std::visit(
      [](const auto& p) -> nlohmann::json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) return {{"k", p.k}};
        else if constexpr (std::is_same_v<P, SvmParams>) {
          nlohmann::json j{{"kernel", kernel_name(p.kernel)}, {"C", p.C}};
          if (p.kernel == KernelKind::Rbf) j["gamma"] = p.gamma;
          return j;
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          return {{"trees", p.trees}, {"max_depth", p.max_depth == 0 ? nlohmann::json("inf") : nlohmann::json(p.max_depth)}};
        } else {
          return {{"rounds", p.rounds}, {"eta", p.eta}, {"max_depth", p.max_depth}, {"lambda", p.lambda}};
        }
      },
      params);
}

// Binary container: "HEAD", u32 version, u32 kind, standardizer block, head
// payload, u32-prefixed JSON metadata, then SHA-256 of all preceding bytes.
inline constexpr std::uint32_t kHeadFormatVersion = 1;

namespace detail {

inline void put_matrix(ByteWriter& w, const Matrix& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) w.f64(v);
}

inline Matrix get_matrix(ByteReader& r) {
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  if (rows * cols * 8 > r.remaining()) r.fail("matrix larger than payload");
  std::vector<double> data(rows * cols);
  for (auto& v : data) v = r.f64();
  return {rows, cols, std::move(data)};
}

inline void put_tree(ByteWriter& w, const DecisionTree& t) {
  w.u32(static_cast<std::uint32_t>(t.nodes.size()));
  for (const auto& n : t.nodes) {
    w.u32(static_cast<std::uint32_t>(n.feature));
    w.f64(n.threshold);
    w.u32(n.left);
    w.u32(n.right);
    w.u32(n.label);
    w.f64(n.value);
  }
}

inline DecisionTree get_tree(ByteReader& r) {
  DecisionTree t;
  const auto count = r.u32();
  if (static_cast<std::size_t>(count) * 32 > r.remaining()) r.fail("tree larger than payload");
  t.nodes.resize(count);
  for (auto& n : t.nodes) {
    n.feature = static_cast<std::int32_t>(r.u32());
    n.threshold = r.f64();
    n.left = r.u32();
    n.right = r.u32();
    n.label = r.u32();
    n.value = r.f64();
    if (!n.is_leaf() && (n.left >= count || n.right >= count)) r.fail("tree child index out of range");
  }
  if (count == 0) r.fail("empty tree");
  return t;
}

inline void put_payload(ByteWriter& w, const KnnModel& m) {
  w.u64(m.params.k);
  w.u32(static_cast<std::uint32_t>(m.num_classes));
  put_matrix(w, m.train_x);
  w.u32(static_cast<std::uint32_t>(m.train_y.size()));
  for (auto l : m.train_y) w.u32(l);
}

inline void put_payload(ByteWriter& w, const SvmModel& m) {
  w.u8(static_cast<std::uint8_t>(m.params.kernel));
  w.f64(m.params.C);
  w.f64(m.params.gamma);
  w.f64(m.params.tolerance);
  w.u64(m.params.max_passes);
  w.u64(m.params.cache_rows);
  w.u32(static_cast<std::uint32_t>(m.num_classes));
  put_matrix(w, m.support_vectors);
  w.u32(static_cast<std::uint32_t>(m.machines.size()));
  for (const auto& b : m.machines) {
    w.u32(b.positive);
    w.u32(b.negative);
    w.f64(b.bias);
    w.f64(b.kkt_gap);
    w.u64(b.iterations);
    w.u32(static_cast<std::uint32_t>(b.support.size()));
    for (std::size_t i = 0; i < b.support.size(); ++i) {
      w.u32(b.support[i]);
      w.f64(b.coef[i]);
    }
  }
}

inline void put_payload(ByteWriter& w, const ForestModel& m) {
  w.u64(m.params.trees);
  w.u64(m.params.max_depth);
  w.u64(m.params.max_features);
  w.u64(m.params.seed);
  w.u32(static_cast<std::uint32_t>(m.num_classes));
  w.u32(static_cast<std::uint32_t>(m.dim));
  w.u32(static_cast<std::uint32_t>(m.trees.size()));
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    w.u64(m.tree_seeds[t]);
    put_tree(w, m.trees[t]);
  }
}

inline void put_payload(ByteWriter& w, const GbtModel& m) {
  w.u64(m.params.rounds);
  w.f64(m.params.eta);
  w.f64(m.params.lambda);
  w.u64(m.params.max_depth);
  w.f64(m.params.min_child_weight);
  w.u64(m.params.max_bins);
  w.u32(static_cast<std::uint32_t>(m.num_classes));
  w.u32(static_cast<std::uint32_t>(m.dim));
  w.u32(static_cast<std::uint32_t>(m.trees.size()));
  for (const auto& t : m.trees) put_tree(w, t);
  w.u32(static_cast<std::uint32_t>(m.train_log_loss.size()));
  for (double v : m.train_log_loss) w.f64(v);
}

inline KnnModel get_knn(ByteReader& r) {
  KnnModel m;
  m.params.k = r.u64();
  m.num_classes = r.u32();
  m.train_x = get_matrix(r);
  m.train_y.resize(r.u32());
  for (auto& l : m.train_y) l = r.u32();
  return m;
}

inline SvmModel get_svm(ByteReader& r) {
  SvmModel m;
  const auto kernel = r.u8();
  if (kernel > 1) r.fail("unknown kernel tag");
  m.params.kernel = static_cast<KernelKind>(kernel);
  m.params.C = r.f64();
  m.params.gamma = r.f64();
  m.params.tolerance = r.f64();
  m.params.max_passes = r.u64();
  m.params.cache_rows = r.u64();
  m.num_classes = r.u32();
  m.support_vectors = get_matrix(r);
  m.machines.resize(r.u32());
  for (auto& b : m.machines) {
    b.positive = r.u32();
    b.negative = r.u32();
    b.bias = r.f64();
    b.kkt_gap = r.f64();
    b.iterations = r.u64();
    const auto count = r.u32();
    b.support.resize(count);
    b.coef.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      b.support[i] = r.u32();
      b.coef[i] = r.f64();
      if (b.support[i] >= m.support_vectors.rows()) r.fail("support vector index out of range");
    }
  }
  return m;
}

inline ForestModel get_forest(ByteReader& r) {
  ForestModel m;
  m.params.trees = r.u64();
  m.params.max_depth = r.u64();
  m.params.max_features = r.u64();
  m.params.seed = r.u64();
  m.num_classes = r.u32();
  m.dim = r.u32();
  const auto count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    m.tree_seeds.push_back(r.u64());
    m.trees.push_back(get_tree(r));
  }
  return m;
}

inline GbtModel get_gbt(ByteReader& r) {
  GbtModel m;
  m.params.rounds = r.u64();
  m.params.eta = r.f64();
  m.params.lambda = r.f64();
  m.params.max_depth = r.u64();
  m.params.min_child_weight = r.f64();
  m.params.max_bins = r.u64();
  m.num_classes = r.u32();
  m.dim = r.u32();
  const auto count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) m.trees.push_back(get_tree(r));
  m.train_log_loss.resize(r.u32());
  for (auto& v : m.train_log_loss) v = r.f64();
  return m;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_head(const TrainedHead& head) {
  ByteWriter w;
  w.raw(std::string_view("HEAD"));
  w.u32(kHeadFormatVersion);
  w.u32(static_cast<std::uint32_t>(head.kind()));
  const auto& s = head.standardizer;
  w.u32(static_cast<std::uint32_t>(s.dim()));
  for (double v : s.mean) w.f64(v);
  for (double v : s.scale) w.f64(v);
  for (auto f : s.constant) w.u8(f);
  std::visit([&](const auto& m) { detail::put_payload(w, m); }, head.model);
  w.str(head.metadata.dump());
  const auto digest = sha256(std::span<const std::uint8_t>(w.bytes()));
  w.raw(digest);
  return w.take();
}

inline TrainedHead decode_head(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 4 + 4 + 32) throw FormatError("model container: file too short");
  const auto body = bytes.first(bytes.size() - 32);
  const auto digest = sha256(body);
  if (!std::equal(digest.begin(), digest.end(), bytes.end() - 32)) throw FormatError("model container: SHA-256 mismatch");
  ByteReader r(body, "model container");
  const auto magic = r.raw(4);
  if (std::string(magic.begin(), magic.end()) != "HEAD") r.fail("bad magic");
  if (const auto v = r.u32(); v != kHeadFormatVersion) r.fail("unsupported version " + std::to_string(v));
  const auto kind = r.u32();
  TrainedHead head;
  const std::size_t d = r.u32();
  if (d * 17 > r.remaining()) r.fail("standardizer larger than payload");
  head.standardizer.mean.resize(d);
  head.standardizer.scale.resize(d);
  head.standardizer.constant.resize(d);
  for (auto& v : head.standardizer.mean) v = r.f64();
  for (auto& v : head.standardizer.scale) v = r.f64();
  for (auto& f : head.standardizer.constant) f = r.u8();
  switch (static_cast<HeadKind>(kind)) {
    case HeadKind::Knn: head.model = detail::get_knn(r); break;
    case HeadKind::Svm: head.model = detail::get_svm(r); break;
    case HeadKind::Forest: head.model = detail::get_forest(r); break;
    case HeadKind::Gbt: head.model = detail::get_gbt(r); break;
    default: r.fail("unknown head kind tag " + std::to_string(kind));
  }
  const auto meta = r.str();
  if (r.remaining() != 0) r.fail("trailing bytes before digest");
  try {
    head.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::parse_error& e) {
    r.fail(std::string("metadata json: ") + e.what());
  }
  return head;
}

inline void write_head(const std::filesystem::path& path, const TrainedHead& head) { write_file_bytes(path, encode_head(head)); }
inline TrainedHead read_head(const std::filesystem::path& path) { return decode_head(read_file_bytes(path)); }

}  // namespace hemaclass
