// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/numcore/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "negprompt/errors.hpp"
#include "negprompt/numcore/kernels.hpp"

namespace negprompt {

std::size_t element_count(const std::vector<std::size_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return dims.empty() ? 0 : n;
}

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : dims_(std::move(dims)), data_(element_count(dims_), fill) {
  for (auto d : dims_)
    if (d == 0) throw ShapeError("tensor dims must be positive: " + shape_string());
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  for (auto d : dims_)
    if (d == 0) throw ShapeError("tensor dims must be positive: " + shape_string());
  if (data_.size() != element_count(dims_))
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match dims " + shape_string());
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= dims_.size()) throw ShapeError("axis out of range for " + shape_string());
  return dims_[axis];
}

std::size_t Tensor::rows() const {
  if (dims_.size() == 1) return 1;
  if (dims_.size() != 2) throw ShapeError("expected matrix, got " + shape_string());
  return dims_[0];
}

std::size_t Tensor::cols() const {
  if (dims_.size() == 1) return dims_[0];
  if (dims_.size() != 2) throw ShapeError("expected matrix, got " + shape_string());
  return dims_[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

double& Tensor::at(std::size_t c, std::size_t y, std::size_t x) {
  return data_[(c * dims_[1] + y) * dims_[2] + x];
}
double Tensor::at(std::size_t c, std::size_t y, std::size_t x) const {
  return data_[(c * dims_[1] + y) * dims_[2] + x];
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t n = cols();
  return std::span<double>(data_).subspan(r * n, n);
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t n = cols();
  return std::span<const double>(data_).subspan(r * n, n);
}

Tensor Tensor::reshaped(std::vector<std::size_t> dims) const {
  if (element_count(dims) != data_.size())
    throw ShapeError("cannot reshape " + shape_string() + " to " +
                     std::to_string(element_count(dims)) + " elements");
  return Tensor(std::move(dims), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::check_finite(const std::string& what) const {
  for (double v : data_)
    if (!std::isfinite(v)) throw EvaluationError(what + ": non-finite entry");
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "x" : "") << dims_[i];
  os << ']';
  return os.str();
}

namespace tensor_ops {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul inner dims disagree: " + a.shape_string() + " x " +
                     b.shape_string());
  Tensor out({a.rows(), b.cols()});
  kernels::parallel::matmul(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt inner dims disagree: " + a.shape_string() + " x " +
                     b.shape_string() + "^T");
  Tensor out({a.rows(), b.rows()});
  kernels::parallel::matmul_nt(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.rows());
  return out;
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = x;
  for (auto& v : out.storage()) v = sigmoid(v);
  return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw ShapeError("softmax axis out of range for " + x.shape_string());
  const auto& d = x.dims();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= d[i];
  for (std::size_t i = axis + 1; i < d.size(); ++i) inner *= d[i];
  const std::size_t n = d[axis];
  Tensor out = x;
  auto& o = out.storage();
  for (std::size_t a = 0; a < outer; ++a) {
    for (std::size_t b = 0; b < inner; ++b) {
      const std::size_t base = a * n * inner + b;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, o[base + i * inner]);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double& v = o[base + i * inner];
        v = std::exp(v - mx);
        sum += v;
      }
      for (std::size_t i = 0; i < n; ++i) o[base + i * inner] /= sum;
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("add shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (auto& v : out.storage()) v *= s;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Tensor normalized(const Tensor& v) {
  const double n = l2_norm(v.data());
  if (n == 0.0) return v;
  return scale(v, 1.0 / n);
}

Tensor bilinear_sample(const Tensor& fm, std::span<const double> xs,
                       std::span<const double> ys) {
  if (fm.rank() != 3) throw ShapeError("bilinear_sample expects C×H×W, got " + fm.shape_string());
  if (xs.size() != ys.size()) throw ShapeError("bilinear_sample point arrays differ in length");
  const std::size_t C = fm.dim(0), H = fm.dim(1), W = fm.dim(2);
  const std::size_t P = xs.size();
  if (P == 0) throw ShapeError("bilinear_sample needs at least one point");
  Tensor out({P, C});
  for (std::size_t p = 0; p < P; ++p) {
    const double x = xs[p], y = ys[p];
    if (!(x >= 0.0 && y >= 0.0 && x <= static_cast<double>(W - 1) &&
          y <= static_cast<double>(H - 1)))
      throw RangeError("bilinear_sample point outside feature map");
    const auto x0 = std::min(static_cast<std::size_t>(x), W - 1);
    const auto y0 = std::min(static_cast<std::size_t>(y), H - 1);
    const std::size_t x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
    const double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
    for (std::size_t c = 0; c < C; ++c) {
      const double v = (1 - fy) * ((1 - fx) * fm.at(c, y0, x0) + fx * fm.at(c, y0, x1)) +
                       fy * ((1 - fx) * fm.at(c, y1, x0) + fx * fm.at(c, y1, x1));
      out.at(p, c) = v;
    }
  }
  return out;
}

}  // namespace tensor_ops

}  // namespace negprompt
