#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hemaclass/classifiers/matrix.hpp"

namespace hemaclass {

// Per-dimension z-scoring fitted on training rows. Constant dimensions
// (population sigma == 0) pass through unscaled and are flagged.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<std::uint8_t> constant;

  std::size_t dim() const { return mean.size(); }

  static Standardizer identity(std::size_t d) {
    return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0), std::vector<std::uint8_t>(d, 0)};
  }

  static Standardizer fit(const Matrix& x) {
    if (x.rows() < 2) throw ParameterError("standardizer: need >= 2 rows");
    const auto n = static_cast<double>(x.rows());
    Standardizer s;
    s.mean.assign(x.cols(), 0.0);
    s.scale.assign(x.cols(), 1.0);
    s.constant.assign(x.cols(), 0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) s.mean[j] += x(i, j);
    }
    for (auto& m : s.mean) m /= n;
    std::vector<double> var(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) {
        const double d = x(i, j) - s.mean[j];
        var[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double sd = std::sqrt(var[j] / n);
      if (sd > 0.0) {
        s.scale[j] = sd;
      } else {
        s.constant[j] = 1;
        s.mean[j] = 0.0;
      }
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    if (x.cols() != dim()) throw DimensionMismatch("standardizer: expected dim " + std::to_string(dim()) + ", got " + std::to_string(x.cols()));
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      auto r = out.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - mean[j]) / scale[j];
    }
    return out;
  }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

}  // namespace hemaclass
