#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "hemaclass/errors.hpp"
#include "hemaclass/features.hpp"

namespace hemaclass {

using Label = std::uint32_t;

// Dense row-major double matrix used by the classifier heads.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw ParameterError("matrix: data size != rows*cols");
  }

  static Matrix from_features(const FeatureMatrix& fm) {
    return {fm.rows, fm.dim, std::vector<double>(fm.values.begin(), fm.values.end())};
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const std::vector<double>& data() const { return data_; }

  Matrix select_rows(std::span<const std::size_t> idx) const {
    Matrix out(idx.size(), cols_);
    for (std::size_t r = 0; r < idx.size(); ++r) std::copy_n(row(idx[r]).begin(), cols_, out.row(r).begin());
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::vector<Label> labels_of(const FeatureMatrix& fm) { return {fm.labels.begin(), fm.labels.end()}; }

template <class T>
std::vector<T> select(std::span<const T> values, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(values[i]);
  return out;
}

inline std::size_t count_classes(std::span<const Label> y) {
  Label mx = 0;
  for (auto l : y) mx = std::max(mx, l);
  return y.empty() ? 0 : static_cast<std::size_t>(mx) + 1;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline void check_training_input(const Matrix& x, std::span<const Label> y, const char* who) {
  if (x.rows() != y.size()) throw ParameterError(std::string(who) + ": row count != label count");
  if (x.rows() == 0) throw ParameterError(std::string(who) + ": empty training set");
}

}  // namespace hemaclass
