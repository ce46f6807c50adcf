#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "hemaclass/classifiers/matrix.hpp"
#include "hemaclass/classifiers/tree.hpp"
#include "hemaclass/parallel.hpp"

namespace hemaclass {

struct GbtParams {
  std::size_t rounds = 100;
  double eta = 0.3;
  double lambda = 1.0;
  std::size_t max_depth = 6;
  double min_child_weight = 1.0;  // minimum hessian sum per child
  std::size_t max_bins = 256;
};

// Softmax-objective boosted trees: one regression tree per class per round,
// initial scores 0, leaf weight -G/(H + lambda), scores += eta * weight.
struct GbtModel {
  GbtParams params;
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<DecisionTree> trees;   // round-major: trees[r * K + k]
  std::vector<double> train_log_loss;  // after each round
};

namespace detail {

// Candidate thresholds per feature: midpoints between distinct values when
// there are at most max_bins of them, otherwise quantile cut values.
inline std::vector<std::vector<double>> gbt_cut_points(const Matrix& x, std::size_t max_bins) {
  std::vector<std::vector<double>> cuts(x.cols());
  std::vector<double> col(x.rows());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    for (std::size_t i = 0; i < x.rows(); ++i) col[i] = x(i, f);
    std::sort(col.begin(), col.end());
    std::vector<double> uniq;
    std::unique_copy(col.begin(), col.end(), std::back_inserter(uniq));
    auto& c = cuts[f];
    if (uniq.size() <= max_bins) {
      for (std::size_t i = 0; i + 1 < uniq.size(); ++i) c.push_back(midpoint_threshold(uniq[i], uniq[i + 1]));
    } else {
      for (std::size_t b = 1; b < max_bins; ++b) {
        const auto pos = b * (col.size() - 1) / max_bins;
        if (col[pos] < uniq.back() && (c.empty() || col[pos] > c.back())) c.push_back(col[pos]);
      }
    }
  }
  return cuts;
}

struct BinnedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<double>> cuts;
  std::vector<std::uint16_t> bins;  // column-major: bins[f * rows + i]

  std::size_t bin_count(std::size_t f) const { return cuts[f].size() + 1; }
};

inline BinnedMatrix bin_matrix(const Matrix& x, std::size_t max_bins) {
  BinnedMatrix b;
  b.rows = x.rows();
  b.cols = x.cols();
  b.cuts = gbt_cut_points(x, std::clamp<std::size_t>(max_bins, 2, 65535));
  b.bins.resize(b.rows * b.cols);
  for (std::size_t f = 0; f < b.cols; ++f) {
    const auto& c = b.cuts[f];
    for (std::size_t i = 0; i < b.rows; ++i) {
      b.bins[f * b.rows + i] = static_cast<std::uint16_t>(std::lower_bound(c.begin(), c.end(), x(i, f)) - c.begin());
    }
  }
  return b;
}

inline double leaf_objective(double g, double h, double lambda) { return g * g / (h + lambda); }

inline DecisionTree grow_newton_tree(const BinnedMatrix& xb, std::span<const double> grad, std::span<const double> hess,
                                     const GbtParams& p, std::vector<std::uint32_t>& leaf_of_row) {
  DecisionTree tree;
  struct Pending {
    std::uint32_t node;
    std::size_t depth;
    std::vector<std::uint32_t> rows;
  };
  std::vector<std::uint32_t> all(xb.rows);
  std::iota(all.begin(), all.end(), 0U);
  tree.nodes.emplace_back();
  std::vector<Pending> stack;
  stack.push_back({0, 0, std::move(all)});
  std::vector<double> hist_g;
  std::vector<double> hist_h;

  while (!stack.empty()) {
    auto job = std::move(stack.back());
    stack.pop_back();
    double g_sum = 0.0;
    double h_sum = 0.0;
    for (auto r : job.rows) {
      g_sum += grad[r];
      h_sum += hess[r];
    }
    double best_gain = 0.0;
    std::size_t best_feature = 0;
    std::size_t best_bin = 0;
    bool found = false;
    if (job.depth < p.max_depth && job.rows.size() >= 2) {
      const double parent = leaf_objective(g_sum, h_sum, p.lambda);
      for (std::size_t f = 0; f < xb.cols; ++f) {
        const auto nb = xb.bin_count(f);
        if (nb < 2) continue;
        hist_g.assign(nb, 0.0);
        hist_h.assign(nb, 0.0);
        const auto* col = xb.bins.data() + f * xb.rows;
        for (auto r : job.rows) {
          hist_g[col[r]] += grad[r];
          hist_h[col[r]] += hess[r];
        }
        double gl = 0.0;
        double hl = 0.0;
        for (std::size_t b = 0; b + 1 < nb; ++b) {
          gl += hist_g[b];
          hl += hist_h[b];
          const double gr = g_sum - gl;
          const double hr = h_sum - hl;
          if (hl < p.min_child_weight || hr < p.min_child_weight) continue;
          const double gain = 0.5 * (leaf_objective(gl, hl, p.lambda) + leaf_objective(gr, hr, p.lambda) - parent);
          if (gain > best_gain + 1e-12) {
            best_gain = gain;
            best_feature = f;
            best_bin = b;
            found = true;
          }
        }
      }
    }
    if (found) {
      std::vector<std::uint32_t> left;
      std::vector<std::uint32_t> right;
      const auto* col = xb.bins.data() + best_feature * xb.rows;
      for (auto r : job.rows) (col[r] <= best_bin ? left : right).push_back(r);
      if (left.empty() || right.empty()) found = false;
      else {
        auto& node = tree.nodes[job.node];
        node.feature = static_cast<std::int32_t>(best_feature);
        node.threshold = xb.cuts[best_feature][best_bin];
        const auto l = static_cast<std::uint32_t>(tree.nodes.size());
        tree.nodes[job.node].left = l;
        tree.nodes[job.node].right = l + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        stack.push_back({l + 1, job.depth + 1, std::move(right)});
        stack.push_back({l, job.depth + 1, std::move(left)});
        continue;
      }
    }
    auto& leaf = tree.nodes[job.node];
    leaf.feature = -1;
    leaf.value = -g_sum / (h_sum + p.lambda);
    for (auto r : job.rows) leaf_of_row[r] = job.node;
  }
  return tree;
}

inline double softmax_row(std::span<const double> scores, std::span<double> probs) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    probs[c] = std::exp(scores[c] - mx);
    sum += probs[c];
  }
  for (auto& v : probs) v /= sum;
  return sum;
}

inline double mean_log_loss(const std::vector<double>& scores, std::span<const Label> y, std::size_t k) {
  std::vector<double> probs(k);
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    softmax_row(std::span<const double>(scores.data() + i * k, k), probs);
    total -= std::log(std::max(probs[y[i]], 1e-300));
  }
  return total / static_cast<double>(y.size());
}

}  // namespace detail

inline GbtModel train_gbt(const Matrix& x, std::span<const Label> y, const GbtParams& params, std::size_t num_classes = 0,
                          std::size_t jobs = 1) {
  check_training_input(x, y, "gbt");
  if (params.rounds == 0) throw ParameterError("gbt: rounds must be >= 1");
  if (!(params.eta > 0.0 && params.eta <= 1.0)) throw ParameterError("gbt: eta must be in (0,1]");
  if (!(params.lambda >= 0.0)) throw ParameterError("gbt: lambda must be >= 0");
  GbtModel m;
  m.params = params;
  m.num_classes = std::max<std::size_t>({num_classes, count_classes(y), 2});
  m.dim = x.cols();
  const auto k = m.num_classes;
  const auto n = x.rows();
  const auto xb = detail::bin_matrix(x, params.max_bins);

  std::vector<double> scores(n * k, 0.0);
  std::vector<double> probs(n * k);
  std::vector<std::vector<double>> grad(k, std::vector<double>(n));
  std::vector<std::vector<double>> hess(k, std::vector<double>(n));
  std::vector<std::vector<std::uint32_t>> leaf_of_row(k, std::vector<std::uint32_t>(n));
  m.trees.resize(params.rounds * k);

  for (std::size_t round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      detail::softmax_row(std::span<const double>(scores.data() + i * k, k), std::span<double>(probs.data() + i * k, k));
      for (std::size_t c = 0; c < k; ++c) {
        const double pc = probs[i * k + c];
        grad[c][i] = pc - (y[i] == c ? 1.0 : 0.0);
        hess[c][i] = std::max(pc * (1.0 - pc), 1e-16);
      }
    }
    parallel_for(k, jobs, [&](std::size_t c) {
      m.trees[round * k + c] = detail::grow_newton_tree(xb, grad[c], hess[c], params, leaf_of_row[c]);
    });
    for (std::size_t c = 0; c < k; ++c) {
      const auto& tree = m.trees[round * k + c];
      for (std::size_t i = 0; i < n; ++i) scores[i * k + c] += params.eta * tree.nodes[leaf_of_row[c][i]].value;
    }
    m.train_log_loss.push_back(detail::mean_log_loss(scores, y, k));
  }
  return m;
}

// Raw additive scores, row-major N x K.
inline std::vector<double> gbt_scores(const GbtModel& m, const Matrix& q) {
  if (q.cols() != m.dim) throw DimensionMismatch("gbt: query dim mismatch");
  const auto k = m.num_classes;
  std::vector<double> scores(q.rows() * k, 0.0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t t = 0; t < m.trees.size(); ++t) scores[i * k + t % k] += m.params.eta * m.trees[t].leaf_for(q.row(i)).value;
  }
  return scores;
}

inline std::vector<Label> predict_gbt(const GbtModel& m, const Matrix& q) {
  const auto scores = gbt_scores(m, q);
  const auto k = m.num_classes;
  std::vector<Label> out(q.rows());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const auto* row = scores.data() + i * k;
    out[i] = static_cast<Label>(std::max_element(row, row + k) - row);
  }
  return out;
}

}  // namespace hemaclass
