// Copyright 2026 The bmm-lab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bmm/error.hpp"

namespace bmm {

/// Dense row-major matrix of doubles. Rows are samples wherever a matrix
/// holds a batch.
class Array2 {
 public:
  Array2() = default;
  Array2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Array2(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("Array2: data length " + std::to_string(data_.size()) +
                           " does not match " + shape_string(rows_, cols_));
    }
  }

  static Array2 from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Array2 out(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("Array2::from_rows: ragged rows");
      std::copy(row.begin(), row.end(), out.data_.begin() + static_cast<std::ptrdiff_t>(i * c));
      ++i;
    }
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(const Array2& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape() const { return shape_string(rows_, cols_); }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Array2& operator+=(const Array2& o) {
    require_same_shape(*this, o, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  friend bool operator==(const Array2& a, const Array2& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

  static std::string shape_string(std::size_t r, std::size_t c) {
    return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
  }

  static void require_same_shape(const Array2& a, const Array2& b, const char* what) {
    if (!a.same_shape(b)) {
      throw DimensionError(std::string(what) + ": shape mismatch " + a.shape() + " vs " +
                           b.shape());
    }
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace ops {

/// out = x * w + b, b broadcast over rows. b may be empty (no bias).
inline Array2 affine(const Array2& x, const Array2& w, const Array2* b) {
  if (x.cols() != w.rows()) {
    throw DimensionError("linear: x " + x.shape() + " incompatible with W " + w.shape());
  }
  if (b != nullptr && (b->rows() != 1 || b->cols() != w.cols())) {
    throw DimensionError("linear: W " + w.shape() + " incompatible with b " + b->shape());
  }
  const std::size_t n = x.rows(), d = x.cols(), k = w.cols();
  Array2 out(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = &out(i, 0);
    if (b != nullptr) std::copy_n(b->row(0).data(), k, orow);
    for (std::size_t p = 0; p < d; ++p) {
      const double xv = x(i, p);
      if (xv == 0.0) continue;
      const double* wrow = w.row(p).data();
      for (std::size_t j = 0; j < k; ++j) orow[j] += xv * wrow[j];
    }
  }
  return out;
}

inline Array2 matmul(const Array2& x, const Array2& w) { return affine(x, w, nullptr); }

/// a^T * b, accumulated into out (shape a.cols x b.cols).
inline void accumulate_at_b(const Array2& a, const Array2& b, Array2& out) {
  assert(a.rows() == b.rows() && out.rows() == a.cols() && out.cols() == b.cols());
  const std::size_t n = a.rows(), d = a.cols(), k = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double* brow = b.row(i).data();
    for (std::size_t p = 0; p < d; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      double* orow = &out(p, 0);
      for (std::size_t j = 0; j < k; ++j) orow[j] += av * brow[j];
    }
  }
}

/// a * b^T, accumulated into out (shape a.rows x b.rows).
inline void accumulate_a_bt(const Array2& a, const Array2& b, Array2& out) {
  assert(a.cols() == b.cols() && out.rows() == a.rows() && out.cols() == b.rows());
  const std::size_t n = a.rows(), k = a.cols(), d = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row(i).data();
    for (std::size_t p = 0; p < d; ++p) {
      const double* brow = b.row(p).data();
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += arow[j] * brow[j];
      out(i, p) += s;
    }
  }
}

inline Array2 add(const Array2& a, const Array2& b) {
  Array2 out = a;
  out += b;
  return out;
}

inline Array2 relu(const Array2& x) {
  Array2 out = x;
  for (double& v : out.flat()) v = v > 0.0 ? v : 0.0;
  return out;
}

inline Array2 scale(const Array2& x, double s) {
  Array2 out = x;
  for (double& v : out.flat()) v *= s;
  return out;
}

/// Row-wise softmax with max subtraction.
inline Array2 softmax_rows(const Array2& logits) {
  Array2 out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto in = logits.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      z += o[c];
    }
    for (double& v : o) v /= z;
  }
  return out;
}

/// Index of the row maximum; ties resolve to the lowest index.
inline std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

}  // namespace ops
}  // namespace bmm
