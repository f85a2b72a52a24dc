// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "dtdenoise/errors.hpp"

namespace dtd {

using i64 = std::int64_t;
using Shape = std::vector<i64>;

inline i64 shape_size(const Shape& s) {
  i64 n = 1;
  for (i64 d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

/// Dense row-major array of real values.
///
/// Copies are shallow: tensors share their buffer. Code that builds
/// computation graphs treats tensors as immutable once published; call
/// clone() when an independent copy is needed. A default-constructed
/// tensor is "undefined" (rank 0, no storage) and acts as the absent
/// value for optional inputs such as biases.
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>, "Tensor requires float or double");

 public:
  Tensor() : buf_(std::make_shared<std::vector<T>>()) {}

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    validate_shape(shape_);
    buf_ = std::make_shared<std::vector<T>>(static_cast<std::size_t>(shape_size(shape_)), fill);
  }

  static Tensor from_data(Shape shape, std::vector<T> data) {
    validate_shape(shape);
    if (shape_size(shape) != static_cast<i64>(data.size())) {
      throw ShapeError("from_data: " + shape_str(shape) + " does not hold " +
                       std::to_string(data.size()) + " values");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.buf_ = std::make_shared<std::vector<T>>(std::move(data));
    return t;
  }

  bool defined() const { return !shape_.empty(); }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  i64 dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  i64 size() const { return static_cast<i64>(buf_->size()); }

  T* data() { return buf_->data(); }
  const T* data() const { return buf_->data(); }

  T& operator[](i64 i) { return (*buf_)[static_cast<std::size_t>(i)]; }
  const T& operator[](i64 i) const { return (*buf_)[static_cast<std::size_t>(i)]; }

  // Flat index helpers for the common ranks.
  i64 idx2(i64 i, i64 j) const { return i * shape_[1] + j; }
  i64 idx3(i64 i, i64 j, i64 k) const { return (i * shape_[1] + j) * shape_[2] + k; }
  i64 idx4(i64 n, i64 h, i64 w, i64 c) const {
    return ((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c;
  }

  T& at2(i64 i, i64 j) { return (*buf_)[static_cast<std::size_t>(idx2(i, j))]; }
  const T& at2(i64 i, i64 j) const { return (*buf_)[static_cast<std::size_t>(idx2(i, j))]; }
  T& at3(i64 i, i64 j, i64 k) { return (*buf_)[static_cast<std::size_t>(idx3(i, j, k))]; }
  const T& at3(i64 i, i64 j, i64 k) const { return (*buf_)[static_cast<std::size_t>(idx3(i, j, k))]; }
  T& at4(i64 n, i64 h, i64 w, i64 c) { return (*buf_)[static_cast<std::size_t>(idx4(n, h, w, c))]; }
  const T& at4(i64 n, i64 h, i64 w, i64 c) const {
    return (*buf_)[static_cast<std::size_t>(idx4(n, h, w, c))];
  }

  /// Same buffer, new shape. Sizes must match.
  Tensor reshaped(Shape new_shape) const {
    validate_shape(new_shape);
    if (shape_size(new_shape) != size()) {
      throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(new_shape));
    }
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.buf_ = buf_;
    return t;
  }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.buf_ = std::make_shared<std::vector<T>>(*buf_);
    return t;
  }

  void fill(T v) {
    for (T& x : *buf_) x = v;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  static void validate_shape(const Shape& s) {
    if (s.empty()) throw ShapeError("empty shape");
    for (i64 d : s) {
      if (d <= 0) throw ShapeError("non-positive dimension in " + shape_str(s));
    }
  }

  Shape shape_;
  std::shared_ptr<std::vector<T>> buf_;
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
  const T* p = t.data();
  for (i64 i = 0; i < t.size(); ++i) {
    if (!std::isfinite(p[i])) return false;
  }
  return true;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
  T m = 0;
  for (i64 i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace dtd
