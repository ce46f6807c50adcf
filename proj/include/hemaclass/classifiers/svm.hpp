#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <numeric>
#include <vector>

#include "hemaclass/classifiers/matrix.hpp"

namespace hemaclass {

enum class KernelKind : std::uint8_t { Linear = 0, Rbf = 1 };

inline const char* kernel_name(KernelKind k) { return k == KernelKind::Linear ? "linear" : "rbf"; }

struct SvmParams {
  KernelKind kernel = KernelKind::Rbf;
  double C = 1.0;
  double gamma = 0.0;  // RBF only, must be > 0
  double tolerance = 1e-3;
  std::size_t max_passes = 10000;  // iteration cap = max_passes * n
  std::size_t cache_rows = 2000;
};

inline double kernel_value(const SvmParams& p, std::span<const double> a, std::span<const double> b) {
  if (p.kernel == KernelKind::Linear) return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  return std::exp(-p.gamma * squared_distance(a, b));
}

// LRU cache of kernel matrix rows for one binary problem.
class KernelRowCache {
 public:
  KernelRowCache(const Matrix& x, const SvmParams& p, std::size_t capacity)
      : x_(x), params_(p), capacity_(std::max<std::size_t>(capacity, 2)), rows_(x.rows()), where_(x.rows()) {}

  const std::vector<double>& row(std::size_t i) {
    if (!rows_[i].empty()) {
      lru_.splice(lru_.begin(), lru_, where_[i]);
      return rows_[i];
    }
    if (lru_.size() >= capacity_) {
      const auto victim = lru_.back();
      lru_.pop_back();
      rows_[victim].clear();
      rows_[victim].shrink_to_fit();
    }
    auto& r = rows_[i];
    r.resize(x_.rows());
    const auto xi = x_.row(i);
    for (std::size_t t = 0; t < x_.rows(); ++t) r[t] = kernel_value(params_, xi, x_.row(t));
    lru_.push_front(i);
    where_[i] = lru_.begin();
    return r;
  }

 private:
  const Matrix& x_;
  const SvmParams& params_;
  std::size_t capacity_;
  std::vector<std::vector<double>> rows_;
  std::vector<std::list<std::size_t>::iterator> where_;
  std::list<std::size_t> lru_;
};

struct SmoResult {
  std::vector<double> alpha;
  double bias = 0.0;       // decision(x) = sum alpha_t y_t K(x_t, x) + bias
  double objective = 0.0;  // dual: sum(alpha) - 1/2 alpha^T Q alpha
  double kkt_gap = 0.0;    // max violating pair gap at exit
  std::size_t iterations = 0;
  bool converged = false;
};

// SMO on the C-SVC dual with maximal-violating-pair working-set selection.
// Labels are +1 / -1. Each step moves along alpha_i += y_i t,
// alpha_j -= y_j t, which keeps sum(alpha * y) fixed at zero.
inline SmoResult solve_smo(const Matrix& x, std::span<const int> y, const SvmParams& p) {
  const auto n = x.rows();
  if (n != y.size()) throw ParameterError("smo: row count != label count");
  if (!(p.C > 0.0)) throw ParameterError("svm: C must be > 0");
  if (p.kernel == KernelKind::Rbf && !(p.gamma > 0.0)) throw ParameterError("svm: RBF gamma must be > 0");
  const double C = p.C;
  SmoResult res;
  res.alpha.assign(n, 0.0);
  auto& a = res.alpha;
  std::vector<double> grad(n, -1.0);  // Q alpha - e
  std::vector<double> diag(n);
  for (std::size_t t = 0; t < n; ++t) diag[t] = kernel_value(p, x.row(t), x.row(t));
  KernelRowCache cache(x, p, std::min(n, p.cache_rows));

  const auto in_up = [&](std::size_t t) { return y[t] > 0 ? a[t] < C : a[t] > 0.0; };
  const auto in_low = [&](std::size_t t) { return y[t] > 0 ? a[t] > 0.0 : a[t] < C; };

  const std::size_t max_iter = p.max_passes * std::max<std::size_t>(n, 1);
  for (;;) {
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    std::size_t i = n;
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    res.kkt_gap = (i == n || j == n) ? 0.0 : g_max - g_min;
    if (res.kkt_gap < p.tolerance) {
      res.converged = true;
      break;
    }
    if (res.iterations >= max_iter) break;
    ++res.iterations;

    const auto& ki = cache.row(i);
    const auto& kj = cache.row(j);
    const double curvature = diag[i] + diag[j] - 2.0 * ki[j];
    const double bound_i = y[i] > 0 ? C - a[i] : a[i];
    const double bound_j = y[j] > 0 ? a[j] : C - a[j];
    const double t_max = std::min(bound_i, bound_j);
    double step = curvature > 1e-12 ? (g_max - g_min) / curvature : t_max;
    step = std::min(step, t_max);

    a[i] += y[i] * step;
    a[j] -= y[j] * step;
    // Snap to the box so bound membership tests stay exact.
    if (step == bound_i) a[i] = y[i] > 0 ? C : 0.0;
    if (step == bound_j) a[j] = y[j] > 0 ? 0.0 : C;
    a[i] = std::clamp(a[i], 0.0, C);
    a[j] = std::clamp(a[j], 0.0, C);

    for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * step * (ki[t] - kj[t]);
  }

  // rho from free vectors; fall back to the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (a[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (a[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  double rho = 0.0;
  if (free_count > 0) rho = free_sum / static_cast<double>(free_count);
  else if (std::isfinite(ub) && std::isfinite(lb)) rho = 0.5 * (ub + lb);
  else if (std::isfinite(ub)) rho = ub;
  else if (std::isfinite(lb)) rho = lb;
  res.bias = -rho;

  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += a[t] * (grad[t] - 1.0);
  res.objective = -0.5 * obj;
  return res;
}

// One one-vs-one sub-problem. `positive` is the lower class index.
struct BinarySvm {
  Label positive = 0;
  Label negative = 0;
  std::vector<std::uint32_t> support;  // rows of SvmModel::support_vectors
  std::vector<double> coef;            // alpha * y
  double bias = 0.0;
  double kkt_gap = 0.0;
  std::uint64_t iterations = 0;
};

struct SvmModel {
  SvmParams params;
  std::size_t num_classes = 0;
  Matrix support_vectors;
  std::vector<BinarySvm> machines;
};

inline SvmModel train_svm(const Matrix& x, std::span<const Label> y, const SvmParams& params, std::size_t num_classes = 0) {
  check_training_input(x, y, "svm");
  const auto k = std::max(num_classes, count_classes(y));
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
  const auto present = std::count_if(by_class.begin(), by_class.end(), [](const auto& v) { return !v.empty(); });
  if (present < 2) throw TrainingError("svm: need >= 2 classes in training data, got " + std::to_string(present));

  SvmModel model;
  model.params = params;
  model.num_classes = k;
  std::vector<std::int64_t> sv_slot(x.rows(), -1);
  std::vector<std::size_t> sv_rows;

  for (Label a = 0; a < k; ++a) {
    for (Label b = a + 1; b < k; ++b) {
      if (by_class[a].empty() || by_class[b].empty()) continue;
      std::vector<std::size_t> rows = by_class[a];
      rows.insert(rows.end(), by_class[b].begin(), by_class[b].end());
      std::vector<int> yy(rows.size(), -1);
      std::fill_n(yy.begin(), by_class[a].size(), 1);
      const auto sub = x.select_rows(rows);
      const auto res = solve_smo(sub, yy, params);
      if (!res.converged) {
        throw TrainingError("svm: SMO did not converge for classes (" + std::to_string(a) + "," + std::to_string(b) +
                            ") within " + std::to_string(res.iterations) + " iterations; gap " + std::to_string(res.kkt_gap));
      }
      BinarySvm m;
      m.positive = a;
      m.negative = b;
      m.bias = res.bias;
      m.kkt_gap = res.kkt_gap;
      m.iterations = res.iterations;
      for (std::size_t t = 0; t < rows.size(); ++t) {
        if (res.alpha[t] <= 0.0) continue;
        auto& slot = sv_slot[rows[t]];
        if (slot < 0) {
          slot = static_cast<std::int64_t>(sv_rows.size());
          sv_rows.push_back(rows[t]);
        }
        m.support.push_back(static_cast<std::uint32_t>(slot));
        m.coef.push_back(res.alpha[t] * yy[t]);
      }
      model.machines.push_back(std::move(m));
    }
  }
  model.support_vectors = x.select_rows(sv_rows);
  return model;
}

inline double svm_decision(const BinarySvm& m, std::span<const double> kernel_row) {
  double s = m.bias;
  for (std::size_t t = 0; t < m.support.size(); ++t) s += m.coef[t] * kernel_row[m.support[t]];
  return s;
}

// One-vs-one vote; decision >= 0 votes for the lower class, vote ties go to
// the lower class index.
inline std::vector<Label> predict_svm(const SvmModel& m, const Matrix& q) {
  if (q.cols() != m.support_vectors.cols() && m.support_vectors.rows() > 0) throw DimensionMismatch("svm: query dim mismatch");
  std::vector<Label> out(q.rows());
  std::vector<double> krow(m.support_vectors.rows());
  std::vector<std::size_t> votes(m.num_classes);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t s = 0; s < krow.size(); ++s) krow[s] = kernel_value(m.params, q.row(i), m.support_vectors.row(s));
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& bm : m.machines) ++votes[svm_decision(bm, krow) >= 0.0 ? bm.positive : bm.negative];
    out[i] = static_cast<Label>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return out;
}

}  // namespace hemaclass
