#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "hemaclass/classifiers/matrix.hpp"
#include "hemaclass/classifiers/tree.hpp"
#include "hemaclass/parallel.hpp"
#include "hemaclass/rng.hpp"

namespace hemaclass {

struct ForestParams {
  std::size_t trees = 100;
  std::size_t max_depth = 0;     // 0 = unlimited
  std::size_t max_features = 0;  // 0 = ceil(sqrt(D))
  std::uint64_t seed = 0;
};

struct ForestModel {
  ForestParams params;
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<std::uint64_t> tree_seeds;
  std::vector<DecisionTree> trees;
};

inline std::size_t default_max_features(std::size_t dim) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim)))));
}

namespace detail {

inline Label majority(std::span<const std::size_t> counts) {
  return static_cast<Label>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

struct GiniSplit {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double score = -1.0;  // sum over children of (sum_c n_c^2) / n_child; larger is purer
};

// Best Gini split on one feature by sorting the node's samples.
inline void best_gini_on_feature(const Matrix& x, std::span<const Label> y, std::span<const std::size_t> samples,
                                 std::size_t feature, std::size_t k, std::span<const std::size_t> parent_counts,
                                 std::vector<std::pair<double, Label>>& scratch, GiniSplit& best) {
  scratch.clear();
  for (auto s : samples) scratch.emplace_back(x(s, feature), y[s]);
  std::sort(scratch.begin(), scratch.end());
  if (scratch.front().first == scratch.back().first) return;
  std::vector<double> left(k, 0.0);
  std::vector<double> right(parent_counts.begin(), parent_counts.end());
  double left_sq = 0.0;
  double right_sq = 0.0;
  for (auto c : right) right_sq += c * c;
  const auto n = scratch.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto lbl = scratch[i].second;
    left_sq += 2.0 * left[lbl] + 1.0;
    left[lbl] += 1.0;
    right_sq -= 2.0 * right[lbl] - 1.0;
    right[lbl] -= 1.0;
    if (scratch[i].first == scratch[i + 1].first) continue;
    const double nl = static_cast<double>(i + 1);
    const double score = left_sq / nl + right_sq / (static_cast<double>(n) - nl);
    if (score > best.score) {
      best = {true, feature, midpoint_threshold(scratch[i].first, scratch[i + 1].first), score};
    }
  }
}

inline DecisionTree grow_gini_tree(const Matrix& x, std::span<const Label> y, std::vector<std::size_t> root_samples,
                                   std::size_t k, const ForestParams& p, Rng& rng) {
  const auto dim = x.cols();
  const auto mtry = p.max_features == 0 ? default_max_features(dim) : std::min(p.max_features, dim);
  DecisionTree tree;
  struct Pending {
    std::uint32_t node;
    std::size_t depth;
    std::vector<std::size_t> samples;
  };
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, 0, std::move(root_samples)});
  std::vector<std::size_t> features(dim);
  std::vector<std::pair<double, Label>> scratch;
  std::vector<std::size_t> counts(k);

  while (!stack.empty()) {
    auto job = std::move(stack.back());
    stack.pop_back();
    std::fill(counts.begin(), counts.end(), 0);
    for (auto s : job.samples) ++counts[y[s]];
    const auto pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    const bool depth_limited = p.max_depth != 0 && job.depth >= p.max_depth;

    GiniSplit best;
    if (!pure && !depth_limited && job.samples.size() >= 2) {
      // Draw features without replacement; keep drawing past mtry only while
      // every feature examined so far is constant on this node.
      std::iota(features.begin(), features.end(), 0);
      for (std::size_t drawn = 0; drawn < dim; ++drawn) {
        if (drawn >= mtry && best.found) break;
        const auto pick = drawn + static_cast<std::size_t>(uniform_below(rng, dim - drawn));
        std::swap(features[drawn], features[pick]);
        best_gini_on_feature(x, y, job.samples, features[drawn], k, counts, scratch, best);
      }
    }
    auto& node = tree.nodes[job.node];
    if (!best.found) {
      node.feature = -1;
      node.label = majority(counts);
      continue;
    }
    node.feature = static_cast<std::int32_t>(best.feature);
    node.threshold = best.threshold;
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto s : job.samples) (x(s, best.feature) <= best.threshold ? left : right).push_back(s);
    const auto l = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    tree.nodes[job.node].left = l;
    tree.nodes[job.node].right = l + 1;
    stack.push_back({l + 1, job.depth + 1, std::move(right)});
    stack.push_back({l, job.depth + 1, std::move(left)});
  }
  return tree;
}

}  // namespace detail

// Random forest: per-tree bootstrap of n rows, Gini splits over
// max_features random candidates, hard majority vote. Fully determined by
// (data, params); the worker count does not affect the result.
inline ForestModel train_forest(const Matrix& x, std::span<const Label> y, const ForestParams& params,
                                std::size_t num_classes = 0, std::size_t jobs = 1) {
  check_training_input(x, y, "forest");
  if (params.trees == 0) throw ParameterError("forest: need >= 1 tree");
  ForestModel m;
  m.params = params;
  m.num_classes = std::max(num_classes, count_classes(y));
  m.dim = x.cols();
  m.trees.resize(params.trees);
  m.tree_seeds.resize(params.trees);
  for (std::size_t t = 0; t < params.trees; ++t) m.tree_seeds[t] = derive_seed(params.seed, t);
  const auto n = x.rows();
  parallel_for(params.trees, jobs, [&](std::size_t t) {
    Rng rng(m.tree_seeds[t]);
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = static_cast<std::size_t>(uniform_below(rng, n));
    m.trees[t] = detail::grow_gini_tree(x, y, std::move(sample), m.num_classes, params, rng);
  });
  return m;
}

inline std::vector<Label> predict_forest(const ForestModel& m, const Matrix& q) {
  if (q.cols() != m.dim) throw DimensionMismatch("forest: query dim mismatch");
  std::vector<Label> out(q.rows());
  std::vector<std::size_t> votes(m.num_classes);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& t : m.trees) ++votes[t.leaf_for(q.row(i)).label];
    out[i] = detail::majority(votes);
  }
  return out;
}

}  // namespace hemaclass
