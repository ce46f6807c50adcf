#pragma once

// Reference solutions used only by tests. Each one takes a deliberately
// different route from the library code it checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

namespace oracle {

using Rows = std::vector<std::vector<double>>;

// KNN by sorting every training point on (Euclidean distance, index) and
// tallying the first k. Ties: more votes, then smaller summed distance,
// then lower class.
inline unsigned knn_brute_force(const Rows& train, const std::vector<unsigned>& labels, const std::vector<double>& q, std::size_t k) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> d2(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += (q[j] - train[i][j]) * (q[j] - train[i][j]);
    d2[i] = s;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d2[a] < d2[b]; });
  std::map<unsigned, std::pair<std::size_t, double>> tally;
  for (std::size_t r = 0; r < k; ++r) {
    auto& t = tally[labels[order[r]]];
    ++t.first;
    t.second += std::sqrt(d2[order[r]]);
  }
  unsigned best = tally.begin()->first;
  for (const auto& [label, t] : tally) {
    const auto& b = tally[best];
    if (t.first > b.first || (t.first == b.first && t.second < b.second)) best = label;
  }
  return best;
}

inline double linear_kernel(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double rbf_kernel(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-gamma * s);
}

// Q_ij = y_i y_j K(x_i, x_j)
template <class Kernel>
Rows signed_gram(const Rows& x, const std::vector<int>& y, Kernel kernel) {
  Rows q(x.size(), std::vector<double>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) q[i][j] = y[i] * y[j] * kernel(x[i], x[j]);
  return q;
}

inline double dual_objective(const Rows& q, const std::vector<double>& a) {
  double lin = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    lin += a[i];
    for (std::size_t j = 0; j < a.size(); ++j) quad += a[i] * q[i][j] * a[j];
  }
  return lin - 0.5 * quad;
}

// Euclidean projection onto {0 <= a <= C, y.a = 0} by bisection on the
// multiplier of the equality constraint.
inline std::vector<double> project_feasible(const std::vector<double>& v, const std::vector<int>& y, double C) {
  auto h = [&](double mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += y[i] * std::clamp(v[i] - mu * y[i], 0.0, C);
    return s;
  };
  double lo = -1.0;
  double hi = 1.0;
  while (h(lo) < 0) lo *= 2;
  while (h(hi) > 0) hi *= 2;
  for (int it = 0; it < 100 && lo < hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (h(mid) > 0 ? lo : hi) = mid;
  }
  const double mu = 0.5 * (lo + hi);
  std::vector<double> a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::clamp(v[i] - mu * y[i], 0.0, C);
  return a;
}

// Accelerated projected gradient ascent on the SVM dual.
inline std::vector<double> svm_dual_pga(const Rows& q, const std::vector<int>& y, double C, int iterations = 20000) {
  const auto n = q.size();
  // Lipschitz constant of the gradient via power iteration.
  std::vector<double> v(n, 1.0);
  double lipschitz = 1.0;
  for (int it = 0; it < 500; ++it) {
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) w[i] += q[i][j] * v[j];
    const double norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
    if (norm == 0.0) break;
    lipschitz = norm / std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
  }
  const double step = 1.0 / (lipschitz * 1.01);
  std::vector<double> a(n, 0.0);
  std::vector<double> z = a;
  double t = 1.0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> g(n, 1.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i] -= q[i][j] * z[j];
    std::vector<double> cand(n);
    for (std::size_t i = 0; i < n; ++i) cand[i] = z[i] + step * g[i];
    const auto next = project_feasible(cand, y, C);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t i = 0; i < n; ++i) z[i] = next[i] + ((t - 1.0) / t_next) * (next[i] - a[i]);
    a = next;
    t = t_next;
  }
  return a;
}

// Maximal KKT violation m(a) - M(a) recomputed from scratch.
inline double kkt_gap(const Rows& q, const std::vector<int>& y, const std::vector<double>& a, double C) {
  const auto n = a.size();
  double up = -std::numeric_limits<double>::infinity();
  double low = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    double g = -1.0;
    for (std::size_t j = 0; j < n; ++j) g += q[t][j] * a[j];
    const double v = -y[t] * g;
    const bool in_up = y[t] > 0 ? a[t] < C : a[t] > 0;
    const bool in_low = y[t] > 0 ? a[t] > 0 : a[t] < C;
    if (in_up) up = std::max(up, v);
    if (in_low) low = std::min(low, v);
  }
  return std::max(0.0, up - low);
}

}  // namespace oracle
