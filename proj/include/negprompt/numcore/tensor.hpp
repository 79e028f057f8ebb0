// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace negprompt {

/// Dense row-major tensor of doubles.
///
/// Values are plain data: copying a Tensor copies its storage. Every entry
/// is required to be finite; `check_finite()` enforces that at the boundaries
/// where untrusted data enters (file loaders, request payloads).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  Tensor(std::vector<std::size_t> dims, std::vector<double> data);

  /// Builds a 2-D tensor from nested rows. All rows must share a length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(std::vector<double> values);
  static Tensor identity(std::size_t n);

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Rows/cols view for 2-D tensors. A rank-1 tensor reads as 1×n.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;
  double& at(std::size_t c, std::size_t y, std::size_t x);
  double at(std::size_t c, std::size_t y, std::size_t x) const;

  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  Tensor reshaped(std::vector<std::size_t> dims) const;
  void fill(double v);

  /// Throws ShapeError / EvaluationError naming `what` on violation.
  void check_finite(const std::string& what) const;

  bool same_shape(const Tensor& other) const noexcept { return dims_ == other.dims_; }
  std::string shape_string() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

std::size_t element_count(const std::vector<std::size_t>& dims);

/// Non-differentiable helpers used by inference paths and tests.
namespace tensor_ops {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor sigmoid(const Tensor& x);
double sigmoid(double x);
/// Softmax along `axis` with max-subtraction.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
/// Returns a copy scaled to unit length; zero vectors are returned unchanged.
Tensor normalized(const Tensor& v);
/// Bilinear interpolation of a C×H×W map at continuous (x, y) points.
/// Returns P×C. Points outside [0,W-1]×[0,H-1] raise RangeError.
Tensor bilinear_sample(const Tensor& feature_map, std::span<const double> xs,
                       std::span<const double> ys);

}  // namespace tensor_ops

}  // namespace negprompt
