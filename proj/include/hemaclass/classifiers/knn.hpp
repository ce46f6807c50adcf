#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "hemaclass/classifiers/matrix.hpp"

namespace hemaclass {

struct KnnParams {
  std::size_t k = 5;
};

// Exact k-nearest-neighbour classifier, Euclidean metric.
struct KnnModel {
  KnnParams params;
  std::size_t num_classes = 0;
  Matrix train_x;
  std::vector<Label> train_y;
};

inline KnnModel train_knn(const Matrix& x, std::span<const Label> y, const KnnParams& params, std::size_t num_classes = 0) {
  check_training_input(x, y, "knn");
  if (params.k == 0) throw ParameterError("knn: k must be >= 1");
  if (params.k > x.rows()) {
    throw ParameterError("knn: k=" + std::to_string(params.k) + " exceeds training size " + std::to_string(x.rows()));
  }
  return {params, std::max(num_classes, count_classes(y)), x, {y.begin(), y.end()}};
}

// Neighbours are ordered by (distance, training index). The vote goes to the
// most frequent label; ties go to the smaller summed distance, then the
// lower class index.
inline Label predict_knn_one(const KnnModel& m, std::span<const double> q) {
  const auto n = m.train_x.rows();
  const auto k = m.params.k;
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = {squared_distance(q, m.train_x.row(i)), i};
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> votes(m.num_classes, 0);
  std::vector<double> summed(m.num_classes, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    const auto lbl = m.train_y[dist[r].second];
    ++votes[lbl];
    summed[lbl] += std::sqrt(dist[r].first);
  }
  Label best = 0;
  for (Label c = 1; c < m.num_classes; ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && summed[c] < summed[best])) best = c;
  }
  return best;
}

inline std::vector<Label> predict_knn(const KnnModel& m, const Matrix& q) {
  if (q.cols() != m.train_x.cols()) throw DimensionMismatch("knn: query dim mismatch");
  std::vector<Label> out(q.rows());
  for (std::size_t i = 0; i < q.rows(); ++i) out[i] = predict_knn_one(m, q.row(i));
  return out;
}

}  // namespace hemaclass
