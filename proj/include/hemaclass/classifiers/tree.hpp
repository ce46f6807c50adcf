#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hemaclass/classifiers/matrix.hpp"

namespace hemaclass {

// Axis-aligned binary tree node; x[feature] <= threshold goes left.
struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  Label label = 0;     // classification leaves
  double value = 0.0;  // regression leaves

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Nodes are stored with the root at index 0.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[i];
  }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes[i].is_leaf()) {
        stack.emplace_back(nodes[i].left, d + 1);
        stack.emplace_back(nodes[i].right, d + 1);
      }
    }
    return best;
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

// Split threshold between two distinct sorted values.
inline double midpoint_threshold(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

}  // namespace hemaclass
