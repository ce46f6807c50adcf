#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemaclass/classifiers/head.hpp"
#include "hemaclass/data_model.hpp"
#include "hemaclass/parallel.hpp"
#include "hemaclass/rng.hpp"

namespace hemaclass {

struct GridAxis {
  std::string name;
  std::vector<nlohmann::json> values;
};

// One named value per axis, in axis order.
using GridPoint = std::vector<std::pair<std::string, nlohmann::json>>;

struct GridSpec {
  HeadKind kind = HeadKind::Knn;
  std::vector<GridAxis> axes;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
};

// Axes come from a JSON object keyed by parameter name; nlohmann::json keeps
// keys sorted, so enumeration order is lexicographic in parameter name.
inline GridSpec grid_from_json(HeadKind kind, const nlohmann::json& axes, std::size_t folds, std::uint64_t seed) {
  if (!axes.is_object() || axes.empty()) throw ParameterError(std::string("grid for ") + head_kind_name(kind) + " must be a non-empty object");
  GridSpec g{kind, {}, folds, seed};
  for (const auto& [name, values] : axes.items()) {
    GridAxis axis{name, {}};
    if (values.is_array()) axis.values.assign(values.begin(), values.end());
    else axis.values.push_back(values);
    if (axis.values.empty()) throw ParameterError("grid axis '" + name + "' has no values");
    g.axes.push_back(std::move(axis));
  }
  return g;
}

inline nlohmann::json default_grid_json(HeadKind kind) {
  using nlohmann::json;
  switch (kind) {
    case HeadKind::Knn: return json{{"k", {1, 3, 5, 7, 9, 11}}};
    case HeadKind::Svm:
      return json{{"kernel", {"linear", "rbf"}}, {"C", {0.1, 1, 10, 100}}, {"gamma", {"1/D", 0.001, 0.01, 0.1}}};
    case HeadKind::Forest: return json{{"trees", {100, 300}}, {"max_depth", {8, 16, "inf"}}};
    case HeadKind::Gbt: return json{{"rounds", {100, 300}}, {"eta", {0.1, 0.3}}, {"max_depth", {3, 6}}, {"lambda", {1}}};
  }
  return {};
}

// Grid file: {"knn": {"k": [...]}, "svm": {...}, ...}. Heads missing from the
// file fall back to the default grid.
inline GridSpec load_grid(const nlohmann::json& file, HeadKind kind, std::size_t folds, std::uint64_t seed) {
  const auto key = head_kind_name(kind);
  if (file.is_object() && file.contains(key)) return grid_from_json(kind, file.at(key), folds, seed);
  return grid_from_json(kind, default_grid_json(kind), folds, seed);
}

inline std::vector<GridPoint> expand_grid(const GridSpec& g) {
  std::vector<GridPoint> out;
  std::vector<std::size_t> pos(g.axes.size(), 0);
  for (;;) {
    GridPoint p;
    for (std::size_t a = 0; a < g.axes.size(); ++a) p.emplace_back(g.axes[a].name, g.axes[a].values[pos[a]]);
    out.push_back(std::move(p));
    std::size_t a = g.axes.size();
    while (a > 0) {
      --a;
      if (++pos[a] < g.axes[a].values.size()) break;
      pos[a] = 0;
      if (a == 0) return out;
    }
    if (g.axes.empty()) return out;
  }
}

namespace detail {

inline double number_param(const nlohmann::json& v, const std::string& name) {
  if (!v.is_number()) throw ParameterError("grid parameter '" + name + "' must be numeric, got " + v.dump());
  return v.get<double>();
}

inline std::size_t count_param(const nlohmann::json& v, const std::string& name) {
  const double d = number_param(v, name);
  if (d < 0 || d != std::floor(d)) throw ParameterError("grid parameter '" + name + "' must be a non-negative integer");
  return static_cast<std::size_t>(d);
}

inline std::size_t depth_param(const nlohmann::json& v, const std::string& name) {
  if (v.is_null() || (v.is_string() && (v == "inf" || v == "none"))) return 0;
  const auto d = count_param(v, name);
  if (d == 0) throw ParameterError("grid parameter '" + name + "' must be >= 1 or \"inf\"");
  return d;
}

}  // namespace detail

// Resolves a grid point for a feature width `dim`; gamma "1/D" becomes 1/dim.
inline HeadParams params_from_point(HeadKind kind, const GridPoint& point, std::size_t dim, std::uint64_t seed) {
  auto unknown = [&](const std::string& name) {
    throw ParameterError(std::string("unknown ") + head_kind_name(kind) + " grid parameter '" + name + "'");
  };
  switch (kind) {
    case HeadKind::Knn: {
      KnnParams p;
      for (const auto& [name, v] : point) {
        if (name == "k") p.k = detail::count_param(v, name);
        else unknown(name);
      }
      return p;
    }
    case HeadKind::Svm: {
      SvmParams p;
      for (const auto& [name, v] : point) {
        if (name == "kernel") {
          if (v == "linear") p.kernel = KernelKind::Linear;
          else if (v == "rbf") p.kernel = KernelKind::Rbf;
          else throw ParameterError("svm kernel must be \"linear\" or \"rbf\", got " + v.dump());
        } else if (name == "C") {
          p.C = detail::number_param(v, name);
        } else if (name == "gamma") {
          p.gamma = (v.is_string() && (v == "1/D" || v == "scale_dim")) ? 1.0 / static_cast<double>(dim)
                                                                         : detail::number_param(v, name);
        } else if (name == "tolerance") {
          p.tolerance = detail::number_param(v, name);
        } else {
          unknown(name);
        }
      }
      if (p.kernel == KernelKind::Rbf && p.gamma == 0.0) p.gamma = 1.0 / static_cast<double>(dim);
      if (p.kernel == KernelKind::Linear) p.gamma = 0.0;
      return p;
    }
    case HeadKind::Forest: {
      ForestParams p;
      p.seed = seed;
      for (const auto& [name, v] : point) {
        if (name == "trees") p.trees = detail::count_param(v, name);
        else if (name == "max_depth") p.max_depth = detail::depth_param(v, name);
        else if (name == "max_features") p.max_features = detail::count_param(v, name);
        else unknown(name);
      }
      return p;
    }
    case HeadKind::Gbt: {
      GbtParams p;
      for (const auto& [name, v] : point) {
        if (name == "rounds") p.rounds = detail::count_param(v, name);
        else if (name == "eta") p.eta = detail::number_param(v, name);
        else if (name == "max_depth") p.max_depth = detail::count_param(v, name);
        else if (name == "lambda") p.lambda = detail::number_param(v, name);
        else if (name == "min_child_weight") p.min_child_weight = detail::number_param(v, name);
        else unknown(name);
      }
      return p;
    }
  }
  throw ParameterError("unknown head kind");
}

// Tie-break order among equal CV means; lexicographically smaller is simpler.
// KNN: larger k. SVM: linear before RBF, then smaller C, then smaller gamma.
// Forest: shallower, then fewer trees. GBT: shallower, fewer rounds, smaller eta.
inline std::vector<double> simplicity_key(const HeadParams& params) {
  return std::visit(
      [](const auto& p) -> std::vector<double> {
        using P = std::decay_t<decltype(p)>;
        constexpr double kInf = std::numeric_limits<double>::infinity();
        if constexpr (std::is_same_v<P, KnnParams>) return {-static_cast<double>(p.k)};
        else if constexpr (std::is_same_v<P, SvmParams>) return {p.kernel == KernelKind::Rbf ? 1.0 : 0.0, p.C, p.gamma};
        else if constexpr (std::is_same_v<P, ForestParams>) {
          return {p.max_depth == 0 ? kInf : static_cast<double>(p.max_depth), static_cast<double>(p.trees)};
        } else {
          return {static_cast<double>(p.max_depth), static_cast<double>(p.rounds), p.eta};
        }
      },
      params);
}

// Stratified folds: each class is shuffled with the seeded RNG and dealt
// round-robin, continuing the deal position across classes so fold sizes
// differ by at most one overall and per class.
inline std::vector<std::vector<std::size_t>> kfold_indices(std::span<const Label> labels, std::size_t k, std::uint64_t seed,
                                                           const std::vector<std::string>& class_names = {}) {
  if (k < 2) throw ParameterError("kfold: need k >= 2, got " + std::to_string(k));
  const auto classes = count_classes(labels);
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  for (std::size_t c = 0; c < classes; ++c) {
    if (!members[c].empty() && members[c].size() < k) {
      const auto name = c < class_names.size() ? "'" + class_names[c] + "'" : std::to_string(c);
      throw ParameterError("kfold: class " + name + " has " + std::to_string(members[c].size()) + " samples, fewer than k=" +
                           std::to_string(k) + " folds");
    }
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t deal = 0;
  for (auto& m : members) {
    seeded_shuffle(std::span<std::size_t>(m), rng);
    for (auto i : m) folds[deal++ % k].push_back(i);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

struct GridPointResult {
  GridPoint point;
  HeadParams params;
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
  std::size_t rank = 0;  // 1 = chosen; 0 = failed
  bool failed = false;
  std::string error;
};

struct CvResult {
  HeadKind kind = HeadKind::Knn;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  std::vector<GridPointResult> points;
  std::size_t best = 0;
  TrainedHead model;

  const GridPointResult& chosen() const { return points[best]; }
};

inline double accuracy_of(std::span<const Label> truth, std::span<const Label> pred) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return truth.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(truth.size());
}

// Exhaustive grid x fold evaluation on the training partition, argmax of
// mean fold accuracy, then a refit of the winner on all rows. Points whose
// training throws are recorded as failed and excluded from the argmax.
inline CvResult grid_search(const Matrix& x, std::span<const Label> y, std::size_t num_classes, const GridSpec& grid,
                            std::size_t jobs = 1, const std::vector<std::string>& class_names = {}) {
  check_training_input(x, y, "grid_search");
  std::vector<std::vector<std::size_t>> folds;
  try {
    folds = kfold_indices(y, grid.folds, grid.seed, class_names);
  } catch (const ParameterError& e) {
    throw TrainingError(std::string("grid search: ") + e.what());
  }
  const auto raw_points = expand_grid(grid);

  CvResult res;
  res.kind = grid.kind;
  res.folds = grid.folds;
  res.seed = grid.seed;
  std::vector<nlohmann::json> seen;
  for (const auto& pt : raw_points) {
    GridPointResult r;
    r.point = pt;
    try {
      r.params = params_from_point(grid.kind, pt, x.cols(), grid.seed);
    } catch (const ParameterError& e) {
      r.failed = true;
      r.error = e.what();
      res.points.push_back(std::move(r));
      continue;
    }
    // Collapse points that resolve to the same model (e.g. gamma under a linear kernel).
    const auto key = params_to_json(r.params);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    r.fold_accuracy.assign(grid.folds, 0.0);
    res.points.push_back(std::move(r));
  }

  const auto k = grid.folds;
  std::vector<std::string> task_error(res.points.size() * k);
  parallel_for(res.points.size() * k, jobs, [&](std::size_t task) {
    auto& pr = res.points[task / k];
    if (pr.failed) return;
    const auto f = task % k;
    std::vector<std::size_t> train_rows;
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    try {
      const auto y_train = select<Label>(y, train_rows);
      const auto head = fit_head(x.select_rows(train_rows), y_train, pr.params, num_classes, 1);
      const auto pred = predict_head(head, x.select_rows(folds[f]));
      pr.fold_accuracy[f] = accuracy_of(select<Label>(y, folds[f]), pred);
    } catch (const std::exception& e) {
      task_error[task] = e.what();
    }
  });

  std::vector<std::size_t> order;
  for (std::size_t p = 0; p < res.points.size(); ++p) {
    auto& pr = res.points[p];
    for (std::size_t f = 0; f < k && !pr.failed; ++f) {
      if (!task_error[p * k + f].empty()) {
        pr.failed = true;
        pr.error = "fold " + std::to_string(f + 1) + ": " + task_error[p * k + f];
      }
    }
    if (pr.failed) continue;
    pr.mean_accuracy = std::accumulate(pr.fold_accuracy.begin(), pr.fold_accuracy.end(), 0.0) / static_cast<double>(k);
    order.push_back(p);
  }
  if (order.empty()) {
    std::string why = res.points.empty() ? "empty grid" : res.points.front().error;
    throw TrainingError(std::string("grid search: all ") + std::to_string(res.points.size()) + " grid points failed; first error: " + why);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = res.points[a];
    const auto& pb = res.points[b];
    if (pa.mean_accuracy != pb.mean_accuracy) return pa.mean_accuracy > pb.mean_accuracy;
    const auto ka = simplicity_key(pa.params);
    const auto kb = simplicity_key(pb.params);
    if (ka != kb) return ka < kb;
    return a < b;
  });
  for (std::size_t r = 0; r < order.size(); ++r) res.points[order[r]].rank = r + 1;
  res.best = order.front();

  const auto& best = res.points[res.best];
  res.model = fit_head(x, y, best.params, num_classes, jobs);
  res.model.metadata["head"] = head_kind_name(grid.kind);
  res.model.metadata["params"] = params_to_json(best.params);
  res.model.metadata["cv_mean_accuracy"] = best.mean_accuracy;
  res.model.metadata["cv_folds"] = grid.folds;
  res.model.metadata["seed"] = grid.seed;
  return res;
}

inline CvResult grid_search(const FeatureMatrix& fm, const GridSpec& grid, std::size_t jobs = 1) {
  std::vector<std::string> names;
  if (fm.metadata.contains("class_names")) names = fm.metadata.at("class_names").get<std::vector<std::string>>();
  return grid_search(Matrix::from_features(fm), labels_of(fm), fm.num_classes, grid, jobs, names);
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// point,params,fold_1..fold_k,mean_accuracy,rank,status
inline std::string cv_result_csv(const CvResult& r) {
  std::string out = "point,params";
  for (std::size_t f = 0; f < r.folds; ++f) out += ",fold_" + std::to_string(f + 1);
  out += ",mean_accuracy,rank,status\n";
  for (std::size_t p = 0; p < r.points.size(); ++p) {
    const auto& pr = r.points[p];
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [name, v] : pr.point) params[name] = v;
    out += std::to_string(p) + "," + detail::csv_field(params.dump());
    for (std::size_t f = 0; f < r.folds; ++f) out += "," + (pr.failed ? std::string() : format_real(pr.fold_accuracy[f]));
    out += "," + (pr.failed ? std::string() : format_real(pr.mean_accuracy));
    out += "," + std::to_string(pr.rank);
    out += "," + (pr.failed ? detail::csv_field("failed: " + pr.error) : std::string(p == r.best ? "chosen" : "ok"));
    out += "\n";
  }
  return out;
}

}  // namespace hemaclass
