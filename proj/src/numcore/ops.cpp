// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "negprompt/errors.hpp"
#include "negprompt/numcore/kernels.hpp"

namespace negprompt::ad {

namespace kp = kernels::parallel;

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw EvaluationError("op on an unbound Var");
  return *a.tape;
}

void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw EvaluationError("op mixes Vars from different tapes");
}

void accumulate(Tape& t, int id, const Tensor& delta) {
  if (!t.needs_grad(id)) return;
  auto& g = t.grad(id).storage();
  const auto& d = delta.storage();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return (h ^ v) * 0x100000001b3ULL; }

}  // namespace

Var add(Var a, Var b) {
  same_tape(a, b);
  Tape& t = tape_of(a);
  if (!a.value().same_shape(b.value()))
    throw ShapeError("add: " + a.value().shape_string() + " vs " + b.value().shape_string());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    accumulate(tp, ia, g);
    accumulate(tp, ib, g);
  });
}

Var sub(Var a, Var b) {
  same_tape(a, b);
  Tape& t = tape_of(a);
  if (!a.value().same_shape(b.value()))
    throw ShapeError("sub: " + a.value().shape_string() + " vs " + b.value().shape_string());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    accumulate(tp, ia, g);
    if (tp.needs_grad(ib)) {
      auto& gb = tp.grad(ib).storage();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  same_tape(a, b);
  Tape& t = tape_of(a);
  if (!a.value().same_shape(b.value()))
    throw ShapeError("mul: " + a.value().shape_string() + " vs " + b.value().shape_string());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& va = tp.value(ia);
    const Tensor& vb = tp.value(ib);
    if (tp.needs_grad(ia)) {
      auto& ga = tp.grad(ia).storage();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (tp.needs_grad(ib)) {
      auto& gb = tp.grad(ib).storage();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (auto& v : out.storage()) v *= s;
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia, s](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    auto& ga = tp.grad(ia).storage();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * g[i];
  });
}

Var add_row(Var a, Var bias) {
  same_tape(a, bias);
  Tape& t = tape_of(a);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (bias.value().size() != n)
    throw ShapeError("add_row: bias " + bias.value().shape_string() + " vs " +
                     a.value().shape_string());
  Tensor out = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias.value()[j];
  const int ia = a.id, ib = bias.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib, m, n](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    accumulate(tp, ia, g);
    if (tp.needs_grad(ib)) {
      auto& gb = tp.grad(ib).storage();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
}

Var matmul(Var a, Var b) {
  same_tape(a, b);
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  if (B.rows() != k)
    throw ShapeError("matmul inner dims disagree: " + A.shape_string() + " x " + B.shape_string());
  Tensor out({m, n});
  kp::matmul(A.data(), B.data(), out.data(), m, k, n);
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    if (tp.needs_grad(ia))
      kp::matmul_nt(g.data(), tp.value(ib).data(), tp.grad(ia).data(), m, n, k, true);
    if (tp.needs_grad(ib))
      kp::matmul_tn(tp.value(ia).data(), g.data(), tp.grad(ib).data(), k, m, n, true);
  });
}

Var matmul_nt(Var a, Var b) {
  same_tape(a, b);
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  if (B.cols() != k)
    throw ShapeError("matmul_nt inner dims disagree: " + A.shape_string() + " x " +
                     B.shape_string() + "^T");
  Tensor out({m, n});
  kp::matmul_nt(A.data(), B.data(), out.data(), m, k, n);
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    if (tp.needs_grad(ia))
      kp::matmul(g.data(), tp.value(ib).data(), tp.grad(ia).data(), m, n, k, true);
    if (tp.needs_grad(ib))
      kp::matmul_tn(g.data(), tp.value(ia).data(), tp.grad(ib).data(), n, m, k, true);
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const std::size_t r = a.value().rows(), c = a.value().cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.value()[i * c + j];
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia, r, c](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    auto& ga = tp.grad(ia).storage();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

Var reshape(Var a, std::vector<std::size_t> dims) {
  Tape& t = tape_of(a);
  Tensor out = a.value().reshaped(std::move(dims));
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    auto& ga = tp.grad(ia).storage();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
}

Var relu(Var x) {
  Tape& t = tape_of(x);
  Tensor out = x.value();
  std::uint64_t h = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool on = out[i] > 0.0;
    if (!on) out[i] = 0.0;
    if (t.tracking()) h = mix(h, on ? i + 1 : 0);
  }
  if (t.tracking()) t.note_branch(h);
  const int ix = x.id;
  return t.record(std::move(out), {ix}, [ix](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& v = tp.value(ix);
    auto& gx = tp.grad(ix).storage();
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (v[i] > 0.0) gx[i] += g[i];
  });
}

Var sigmoid(Var x) {
  Tape& t = tape_of(x);
  Tensor out = tensor_ops::sigmoid(x.value());
  const int ix = x.id;
  return t.record(std::move(out), {ix}, [ix](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.value(self);
    auto& gx = tp.grad(ix).storage();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var softmax_rows(Var x) {
  Tape& t = tape_of(x);
  const std::size_t m = x.value().rows(), n = x.value().cols();
  Tensor out = tensor_ops::softmax(x.value().reshaped({m, n}), 1);
  const int ix = x.id;
  return t.record(std::move(out), {ix}, [ix, m, n](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.value(self);
    auto& gx = tp.grad(ix).storage();
    for (std::size_t i = 0; i < m; ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < n; ++j) d += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (g[i * n + j] - d);
    }
  });
}

Var layer_norm_rows(Var x, Var gain, Var shift, double eps) {
  same_tape(x, gain);
  same_tape(x, shift);
  Tape& t = tape_of(x);
  const std::size_t m = x.value().rows(), n = x.value().cols();
  if (gain.value().size() != n || shift.value().size() != n)
    throw ShapeError("layer_norm_rows: gain/shift length must equal row length");
  auto xhat = std::make_shared<Tensor>(std::vector<std::size_t>{m, n});
  auto inv_std = std::make_shared<std::vector<double>>(m);
  Tensor out({m, n});
  const auto& xv = x.value();
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xv[i * n + j] - mu) * (xv[i * n + j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (xv[i * n + j] - mu) * is;
      (*xhat)[i * n + j] = h;
      out[i * n + j] = h * gain.value()[j] + shift.value()[j];
    }
  }
  const int ix = x.id, ig = gain.id, ib = shift.id;
  return t.record(std::move(out), {ix, ig, ib},
                  [ix, ig, ib, m, n, xhat, inv_std](Tape& tp, int self) {
                    const Tensor& g = tp.grad(self);
                    const Tensor& gv = tp.value(ig);
                    if (tp.needs_grad(ig) || tp.needs_grad(ib)) {
                      std::vector<double> dg(n, 0.0), db(n, 0.0);
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < n; ++j) {
                          dg[j] += g[i * n + j] * (*xhat)[i * n + j];
                          db[j] += g[i * n + j];
                        }
                      if (tp.needs_grad(ig))
                        for (std::size_t j = 0; j < n; ++j) tp.grad(ig)[j] += dg[j];
                      if (tp.needs_grad(ib))
                        for (std::size_t j = 0; j < n; ++j) tp.grad(ib)[j] += db[j];
                    }
                    if (!tp.needs_grad(ix)) return;
                    auto& gx = tp.grad(ix).storage();
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t i = 0; i < m; ++i) {
                      double mean_d = 0.0, mean_dh = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        const double d = g[i * n + j] * gv[j];
                        mean_d += d;
                        mean_dh += d * (*xhat)[i * n + j];
                      }
                      mean_d *= inv_n;
                      mean_dh *= inv_n;
                      for (std::size_t j = 0; j < n; ++j) {
                        const double d = g[i * n + j] * gv[j];
                        gx[i * n + j] +=
                            (*inv_std)[i] * (d - mean_d - (*xhat)[i * n + j] * mean_dh);
                      }
                    }
                  });
}

Var l2_normalize_rows(Var x) {
  Tape& t = tape_of(x);
  const std::size_t m = x.value().rows(), n = x.value().cols();
  auto norms = std::make_shared<std::vector<double>>(m);
  Tensor out = x.value().reshaped({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += out[i * n + j] * out[i * n + j];
    const double nr = std::max(std::sqrt(s), 1e-12);
    (*norms)[i] = nr;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= nr;
  }
  const int ix = x.id;
  return t.record(std::move(out), {ix}, [ix, m, n, norms](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.value(self);
    auto& gx = tp.grad(ix).storage();
    for (std::size_t i = 0; i < m; ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < n; ++j) d += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        gx[i * n + j] += (g[i * n + j] - y[i * n + j] * d) / (*norms)[i];
    }
  });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  double s = 0.0;
  for (double v : x.value().storage()) s += v;
  const int ix = x.id;
  return t.record(Tensor({1}, s), {ix}, [ix](Tape& tp, int self) {
    const double g = tp.grad(self)[0];
    for (auto& v : tp.grad(ix).storage()) v += g;
  });
}

Var mean_rows(Var x) {
  Tape& t = tape_of(x);
  const std::size_t m = x.value().rows(), n = x.value().cols();
  Tensor out({1, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += x.value()[i * n + j];
  for (auto& v : out.storage()) v /= static_cast<double>(m);
  const int ix = x.id;
  return t.record(std::move(out), {ix}, [ix, m, n](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    auto& gx = tp.grad(ix).storage();
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[j] * inv;
  });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  Tape& t = tape_of(a);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (count == 0 || start + count > m) throw ShapeError("slice_rows out of range");
  std::vector<double> data(a.value().storage().begin() + static_cast<long>(start * n),
                           a.value().storage().begin() + static_cast<long>((start + count) * n));
  const int ia = a.id;
  return t.record(Tensor({count, n}, std::move(data)), {ia},
                  [ia, start, count, n](Tape& tp, int self) {
                    const Tensor& g = tp.grad(self);
                    auto& ga = tp.grad(ia).storage();
                    for (std::size_t i = 0; i < count * n; ++i) ga[start * n + i] += g[i];
                  });
}

Var gather_rows(Var a, const std::vector<std::size_t>& rows) {
  Tape& t = tape_of(a);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (rows.empty()) throw ShapeError("gather_rows needs at least one row");
  Tensor out({rows.size(), n});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m) throw ShapeError("gather_rows index out of range");
    std::copy_n(a.value().storage().begin() + static_cast<long>(rows[r] * n), n,
                out.storage().begin() + static_cast<long>(r * n));
  }
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia, rows, n](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    auto& ga = tp.grad(ia).storage();
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t j = 0; j < n; ++j) ga[rows[r] * n + j] += g[r * n + j];
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows needs at least one part");
  Tape& t = tape_of(parts.front());
  const std::size_t n = parts.front().value().cols();
  std::size_t total = 0;
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    if (p.value().cols() != n) throw ShapeError("concat_rows column mismatch");
    offsets.push_back(total * n);
    total += p.value().rows();
    ids.push_back(p.id);
  }
  Tensor out({total, n});
  for (std::size_t i = 0; i < parts.size(); ++i)
    std::copy(parts[i].value().storage().begin(), parts[i].value().storage().end(),
              out.storage().begin() + static_cast<long>(offsets[i]));
  return t.record(std::move(out), ids, [ids, offsets](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!tp.needs_grad(ids[i])) continue;
      auto& gi = tp.grad(ids[i]).storage();
      for (std::size_t j = 0; j < gi.size(); ++j) gi[j] += g[offsets[i] + j];
    }
  });
}

Var gather_entries(Var a, const std::vector<std::pair<std::size_t, std::size_t>>& cells) {
  Tape& t = tape_of(a);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (cells.empty()) throw ShapeError("gather_entries needs at least one cell");
  Tensor out({cells.size(), 1});
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto [r, c] = cells[i];
    if (r >= m || c >= n) throw ShapeError("gather_entries index out of range");
    out[i] = a.value()[r * n + c];
  }
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia, cells, n](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    auto& ga = tp.grad(ia).storage();
    for (std::size_t i = 0; i < cells.size(); ++i)
      ga[cells[i].first * n + cells[i].second] += g[i];
  });
}

Var group_max(Var a, std::size_t k) {
  Tape& t = tape_of(a);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (k == 0 || n % k != 0) throw ShapeError("group_max: columns not divisible by group size");
  const std::size_t groups = n / k;
  Tensor out({m, groups});
  std::vector<std::size_t> arg(m * groups);
  std::uint64_t h = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t gidx = 0; gidx < groups; ++gidx) {
      std::size_t best = gidx * k;
      for (std::size_t j = gidx * k + 1; j < (gidx + 1) * k; ++j)
        if (a.value()[i * n + j] > a.value()[i * n + best]) best = j;
      arg[i * groups + gidx] = best;
      out[i * groups + gidx] = a.value()[i * n + best];
      h = mix(h, best);
    }
  if (t.tracking()) t.note_branch(h);
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia, arg, n, m, groups](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    auto& ga = tp.grad(ia).storage();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t gidx = 0; gidx < groups; ++gidx)
        ga[i * n + arg[i * groups + gidx]] += g[i * groups + gidx];
  });
}

Var conv2d(Var image, Var weight, Var bias, std::size_t stride, std::size_t pad) {
  same_tape(image, weight);
  same_tape(image, bias);
  Tape& t = tape_of(image);
  const Tensor& x = image.value();
  const Tensor& w = weight.value();
  if (x.rank() != 3 || w.rank() != 4 || w.dim(1) != x.dim(0) || w.dim(2) != w.dim(3))
    throw ShapeError("conv2d: image " + x.shape_string() + " weight " + w.shape_string());
  const std::size_t O = w.dim(0);
  if (bias.value().size() != O) throw ShapeError("conv2d: bias length must equal out channels");
  kernels::ConvGeometry geo{x.dim(0), x.dim(1), x.dim(2), w.dim(2), stride, pad};
  if (x.dim(1) + 2 * pad < geo.kernel || x.dim(2) + 2 * pad < geo.kernel)
    throw ShapeError("conv2d: kernel larger than padded image");
  const std::size_t rows = geo.col_rows(), cols = geo.col_cols();
  auto col = std::make_shared<std::vector<double>>(rows * cols);
  kp::im2col(x.data(), geo, *col);
  Tensor out({O, geo.out_height(), geo.out_width()});
  kp::matmul(w.data(), *col, out.data(), O, rows, cols);
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t p = 0; p < cols; ++p) out[o * cols + p] += bias.value()[o];
  const int ix = image.id, iw = weight.id, ib = bias.id;
  return t.record(std::move(out), {ix, iw, ib},
                  [ix, iw, ib, geo, col, O, rows, cols](Tape& tp, int self) {
                    const Tensor& g = tp.grad(self);
                    if (tp.needs_grad(iw))
                      kp::matmul_nt(g.data(), *col, tp.grad(iw).data(), O, cols, rows, true);
                    if (tp.needs_grad(ib)) {
                      auto& gb = tp.grad(ib).storage();
                      for (std::size_t o = 0; o < O; ++o) {
                        double s = 0.0;
                        for (std::size_t p = 0; p < cols; ++p) s += g[o * cols + p];
                        gb[o] += s;
                      }
                    }
                    if (tp.needs_grad(ix)) {
                      std::vector<double> dcol(rows * cols);
                      kp::matmul_tn(tp.value(iw).data(), g.data(), dcol, rows, O, cols);
                      kp::col2im(dcol, geo, tp.grad(ix).data());
                    }
                  });
}

Var bilinear_sample(Var feature_map, std::span<const double> xs, std::span<const double> ys) {
  Tape& t = tape_of(feature_map);
  const Tensor& fm = feature_map.value();
  Tensor out = tensor_ops::bilinear_sample(fm, xs, ys);
  const std::size_t H = fm.dim(1), W = fm.dim(2), C = fm.dim(0);
  std::vector<double> px(xs.begin(), xs.end()), py(ys.begin(), ys.end());
  const int ifm = feature_map.id;
  return t.record(std::move(out), {ifm}, [ifm, px, py, C, H, W](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    auto& gf = tp.grad(ifm);
    for (std::size_t p = 0; p < px.size(); ++p) {
      const auto x0 = std::min(static_cast<std::size_t>(px[p]), W - 1);
      const auto y0 = std::min(static_cast<std::size_t>(py[p]), H - 1);
      const std::size_t x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
      const double fx = px[p] - static_cast<double>(x0), fy = py[p] - static_cast<double>(y0);
      for (std::size_t c = 0; c < C; ++c) {
        const double gv = g[p * C + c];
        gf.at(c, y0, x0) += gv * (1 - fy) * (1 - fx);
        gf.at(c, y0, x1) += gv * (1 - fy) * fx;
        gf.at(c, y1, x0) += gv * fy * (1 - fx);
        gf.at(c, y1, x1) += gv * fy * fx;
      }
    }
  });
}

}  // namespace negprompt::ad
