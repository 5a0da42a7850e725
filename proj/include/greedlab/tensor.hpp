/*
 * Copyright 2026 The greedlab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "greedlab/errors.hpp"

namespace greedlab {

/// Rank 0 (scalar), 1 (vector) or 2 (matrix, rows = samples). A vector acts as a
/// single row wherever a matrix view is needed.
class Shape {
 public:
  constexpr Shape() = default;

  static constexpr Shape scalar() { return Shape(); }
  static constexpr Shape vector(std::size_t n) { return Shape(1, {n, 1}); }
  static constexpr Shape matrix(std::size_t rows, std::size_t cols) { return Shape(2, {rows, cols}); }

  constexpr std::size_t rank() const { return rank_; }
  constexpr std::size_t rows() const { return rank_ == 2 ? dims_[0] : 1; }
  constexpr std::size_t cols() const {
    return rank_ == 2 ? dims_[1] : (rank_ == 1 ? dims_[0] : 1);
  }
  constexpr std::size_t size() const { return rows() * cols(); }

  constexpr bool operator==(const Shape&) const = default;

  std::string str() const {
    switch (rank_) {
      case 0: return "[]";
      case 1: return "[" + std::to_string(dims_[0]) + "]";
      default: return "[" + std::to_string(dims_[0]) + "x" + std::to_string(dims_[1]) + "]";
    }
  }

 private:
  constexpr Shape(std::size_t rank, std::array<std::size_t, 2> dims) : rank_(rank), dims_(dims) {}

  std::size_t rank_ = 0;
  std::array<std::size_t, 2> dims_{1, 1};
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
// Storage is aligned for the widest packet so vectorized reductions visit
// elements in the same order regardless of allocation history.
using MatrixMap = Eigen::Map<RowMatrix, Eigen::AlignedMax>;
using ConstMatrixMap = Eigen::Map<const RowMatrix, Eigen::AlignedMax>;

/// Dense row-major array of doubles with a rank <= 2 shape.
class Tensor {
 public:
  Tensor() : Tensor(Shape::scalar()) {}
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, const std::vector<double>& values) : shape_(shape), data_(values.begin(), values.end()) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor: " + std::to_string(data_.size()) + " values do not fill shape " +
                       shape_.str());
    }
  }

  static Tensor scalar(double v) { return Tensor(Shape::scalar(), v); }
  static Tensor vector(std::vector<double> values) {
    const auto n = values.size();
    return Tensor(Shape::vector(n), std::move(values));
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor(Shape::matrix(rows, cols), std::move(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.rows(); }
  std::size_t cols() const { return shape_.cols(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  double item() const {
    if (data_.size() != 1) throw ShapeError("item: tensor of shape " + shape_.str() + " is not a scalar");
    return data_[0];
  }

  MatrixMap mat() { return MatrixMap(data_.data(), rows(), cols()); }
  ConstMatrixMap mat() const { return ConstMatrixMap(data_.data(), rows(), cols()); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double, Eigen::aligned_allocator<double>> data_;
};

}  // namespace greedlab
