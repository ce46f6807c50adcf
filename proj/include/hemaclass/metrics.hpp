#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemaclass/classifiers/matrix.hpp"
#include "hemaclass/data_model.hpp"
#include "hemaclass/errors.hpp"

namespace hemaclass {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t k = 0) : k_(k), cells_(k * k, 0) {}

  std::size_t num_classes() const { return k_; }
  std::uint64_t operator()(std::size_t t, std::size_t p) const { return cells_[t * k_ + p]; }
  void add(std::size_t t, std::size_t p) { ++cells_[t * k_ + p]; }

  std::uint64_t total() const { return std::accumulate(cells_.begin(), cells_.end(), std::uint64_t{0}); }
  std::uint64_t trace() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < k_; ++i) s += (*this)(i, i);
    return s;
  }
  std::uint64_t row_sum(std::size_t t) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < k_; ++p) s += (*this)(t, p);
    return s;
  }
  std::uint64_t col_sum(std::size_t p) const {
    std::uint64_t s = 0;
    for (std::size_t t = 0; t < k_; ++t) s += (*this)(t, p);
    return s;
  }

  double accuracy() const {
    const auto n = total();
    if (n == 0) throw ParameterError("accuracy undefined for an empty confusion matrix");
    return static_cast<double>(trace()) / static_cast<double>(n);
  }

  std::vector<std::vector<std::uint64_t>> rows() const {
    std::vector<std::vector<std::uint64_t>> out(k_);
    for (std::size_t t = 0; t < k_; ++t) out[t].assign(cells_.begin() + t * k_, cells_.begin() + (t + 1) * k_);
    return out;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> cells_;
};

inline ConfusionMatrix confusion(std::span<const Label> y_true, std::span<const Label> y_pred, std::size_t k) {
  if (y_true.size() != y_pred.size()) {
    throw ParameterError("confusion: length mismatch (" + std::to_string(y_true.size()) + " vs " + std::to_string(y_pred.size()) + ")");
  }
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= k || y_pred[i] >= k) throw ParameterError("confusion: label out of range");
    cm.add(y_true[i], y_pred[i]);
  }
  return cm;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
  // Set when the denominator was zero and the value was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

inline std::vector<ClassMetrics> per_class_prf(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ParameterError("per_class_prf: empty confusion matrix");
  std::vector<ClassMetrics> out(cm.num_classes());
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    auto& m = out[c];
    const auto tp = static_cast<double>(cm(c, c));
    const auto predicted = static_cast<double>(cm.col_sum(c));
    const auto actual = static_cast<double>(cm.row_sum(c));
    m.support = cm.row_sum(c);
    m.precision_undefined = predicted == 0;
    m.recall_undefined = actual == 0;
    m.precision = predicted > 0 ? tp / predicted : 0.0;
    m.recall = actual > 0 ? tp / actual : 0.0;
    m.f1 = (m.precision + m.recall) > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  }
  return out;
}

struct EvalReport {
  std::string split;       // e.g. "1%"
  std::string classifier;  // e.g. "ResNet50-SVM"
  std::vector<std::string> class_names;
  ConfusionMatrix confusion_matrix;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::size_t highlighted_class = 0;
  nlohmann::json provenance = nlohmann::json::object();
};

// Index of the class whose name contains `needle` (case-insensitive), or 0.
inline std::size_t find_class(const std::vector<std::string>& names, std::string needle) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  needle = lower(needle);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (lower(names[i]).find(needle) != std::string::npos) return i;
  }
  return 0;
}

inline EvalReport make_report(std::span<const Label> y_true, std::span<const Label> y_pred, std::vector<std::string> class_names,
                              std::string split, std::string classifier, const std::string& highlight = "erythroblast") {
  EvalReport r;
  r.split = std::move(split);
  r.classifier = std::move(classifier);
  const auto k = class_names.size();
  r.class_names = std::move(class_names);
  r.confusion_matrix = confusion(y_true, y_pred, k);
  r.accuracy = r.confusion_matrix.accuracy();
  r.per_class = per_class_prf(r.confusion_matrix);
  for (const auto& m : r.per_class) {
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
  }
  r.macro_precision /= static_cast<double>(k);
  r.macro_recall /= static_cast<double>(k);
  r.macro_f1 /= static_cast<double>(k);
  r.highlighted_class = find_class(r.class_names, highlight);
  return r;
}

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// "0.989 / 0.812 / 0.892"
inline std::string prf_triple(const ClassMetrics& m) {
  return fixed(m.precision, 3) + " / " + fixed(m.recall, 3) + " / " + fixed(m.f1, 3);
}

// Accuracy as a percentage with two decimals, e.g. 0.8675 -> "86.75".
inline std::string percent(double v) { return fixed(100.0 * v, 2); }

namespace detail {

// "1%", "2.5%", "0.3" -> numeric fraction for ordering; unparsable sorts last.
inline double split_order_key(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used < s.size() && s[used] == '%') return v / 100.0;
    return v;
  } catch (const std::exception&) {
    return std::numeric_limits<double>::infinity();
  }
}

// Classifier row order used in the comparison table: bare backbone first,
// then boosting, KNN, SVM, random forest.
inline int classifier_order_key(const std::string& name) {
  static const std::vector<std::string> kSuffixes{"-XGBoost", "-KNN", "-SVM", "-RandomForest"};
  for (std::size_t i = 0; i < kSuffixes.size(); ++i) {
    const auto& s = kSuffixes[i];
    if (name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0) return static_cast<int>(i) + 1;
  }
  return name.find('-') == std::string::npos ? 0 : 99;
}

}  // namespace detail

inline std::vector<const EvalReport*> table_order(std::span<const EvalReport> reports) {
  std::vector<const EvalReport*> rows;
  for (const auto& r : reports) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](const EvalReport* a, const EvalReport* b) {
    const auto sa = detail::split_order_key(a->split);
    const auto sb = detail::split_order_key(b->split);
    if (sa != sb) return sa < sb;
    if (a->split != b->split) return a->split < b->split;
    return detail::classifier_order_key(a->classifier) < detail::classifier_order_key(b->classifier);
  });
  return rows;
}

enum class ReportFormat { Markdown, Csv };

inline std::string render_markdown(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ParameterError("render_report: no reports");
  const auto rows = table_order(reports);
  const auto& first = *rows.front();
  auto highlight_name = first.class_names.empty() ? std::string("class") : first.class_names[first.highlighted_class];
  if (!highlight_name.empty()) highlight_name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(highlight_name[0])));
  std::string out = "| Data Split | Classifier | Test Acc (%) | " + highlight_name + " (Prec./Rec./F1) |\n";
  out += "|---|---|---|---|\n";
  for (const auto* r : rows) {
    out += "| " + r->split + " | " + r->classifier + " | " + percent(r->accuracy) + " | " +
           prf_triple(r->per_class[r->highlighted_class]) + " |\n";
  }
  out += "\nMacro averages (diagnostic):\n\n| Data Split | Classifier | Macro Prec. | Macro Rec. | Macro F1 |\n|---|---|---|---|---|\n";
  for (const auto* r : rows) {
    out += "| " + r->split + " | " + r->classifier + " | " + fixed(r->macro_precision, 3) + " | " + fixed(r->macro_recall, 3) +
           " | " + fixed(r->macro_f1, 3) + " |\n";
  }
  return out;
}

// One row per (report, class), full precision.
inline std::string render_csv(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ParameterError("render_report: no reports");
  std::string out = "split,classifier,test_accuracy,class,precision,recall,f1\n";
  char buf[32];
  auto full = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto* r : table_order(reports)) {
    for (std::size_t c = 0; c < r->per_class.size(); ++c) {
      const auto& m = r->per_class[c];
      out += detail::csv_field(r->split) + "," + detail::csv_field(r->classifier) + "," + full(r->accuracy) + "," +
             detail::csv_field(r->class_names[c]) + "," + full(m.precision) + "," + full(m.recall) + "," + full(m.f1) + "\n";
    }
  }
  return out;
}

inline std::string render_report(std::span<const EvalReport> reports, ReportFormat format) {
  return format == ReportFormat::Markdown ? render_markdown(reports) : render_csv(reports);
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    per_class.push_back({{"class", r.class_names[c]},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"support", m.support},
                         {"precision_undefined", m.precision_undefined},
                         {"recall_undefined", m.recall_undefined}});
  }
  return {{"split", r.split},
          {"classifier", r.classifier},
          {"accuracy", r.accuracy},
          {"per_class", per_class},
          {"macro", {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}}},
          {"highlighted_class", r.class_names.empty() ? "" : r.class_names[r.highlighted_class]},
          {"confusion_matrix", r.confusion_matrix.rows()},
          {"provenance", r.provenance}};
}

}  // namespace hemaclass
