// Copyright 2026 The UVR Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "uvr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uvr/error.hpp"
#include "uvr/rng.hpp"

namespace uvr {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    std::ostringstream msg;
    msg << "matrix data has " << data_.size() << " values, expected " << rows << "x" << cols;
    throw ShapeError(msg.str());
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t d = n == 0 ? 0 : rows.begin()->size();
  Matrix m(n, d);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != d) throw ShapeError("from_rows: ragged rows");
    std::copy(row.begin(), row.end(), m.row(r++).begin());
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::uniform(std::size_t rows, std::size_t cols, double lo, double hi, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](double v) { return std::isfinite(v); });
}

void require_finite(const Matrix& m, const std::string& what) {
  if (!all_finite(m)) throw NumericalError(what + " contains non-finite values");
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + a.shape_string() + " * " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: shape mismatch " + a.shape_string() + " * (" +
                     b.shape_string() + ")^T");
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto a_row = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto b_row = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a_row[k] * b_row[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: shape mismatch (" + a.shape_string() + ")^T * " +
                     b.shape_string());
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto a_row = a.row(k);
    const auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

namespace {

template <typename Op>
Matrix zip(const Matrix& a, const Matrix& b, const char* name, Op op) {
  require_same_shape(a, b, name);
  Matrix out(a.rows(), a.cols());
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = op(av[i], bv[i]);
  return out;
}

template <typename Op>
Matrix map(const Matrix& a, Op op) {
  Matrix out(a.rows(), a.cols());
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = op(av[i]);
  return out;
}

}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  return zip(a, b, "subtract", [](double x, double y) { return x - y; });
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  return zip(a, b, "hadamard", [](double x, double y) { return x * y; });
}

Matrix scaled(const Matrix& a, double s) {
  return map(a, [s](double x) { return x * s; });
}

void add_in_place(Matrix& acc, const Matrix& b) {
  require_same_shape(acc, b, "add_in_place");
  auto av = acc.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] += bv[i];
}

Matrix add_row_broadcast(const Matrix& a, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row_broadcast: " + a.shape_string() + " + " + row.shape_string());
  }
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) r[j] += row(0, j);
  }
  return out;
}

Matrix column_sums(const Matrix& a) {
  Matrix out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(0, j) += a(i, j);
  return out;
}

double sum(const Matrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows()) throw ShapeError("slice_rows: out of range on " + a.shape_string());
  Matrix out(count, a.cols());
  for (std::size_t i = 0; i < count; ++i)
    std::copy(a.row(begin + i).begin(), a.row(begin + i).end(), out.row(i).begin());
  return out;
}

Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) throw ShapeError("slice_cols: out of range on " + a.shape_string());
  Matrix out(a.rows(), count);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = a(i, begin + j);
  return out;
}

void set_cols(Matrix& a, std::size_t begin, const Matrix& block) {
  if (block.rows() != a.rows() || begin + block.cols() > a.cols()) {
    throw ShapeError("set_cols: block " + block.shape_string() + " does not fit " +
                     a.shape_string());
  }
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < block.cols(); ++j) a(i, begin + j) = block(i, j);
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("vstack: column mismatch " + a.shape_string() + " / " + b.shape_string());
  }
  Matrix out(a.rows() + b.rows(), a.cols());
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + a.size());
  return out;
}

Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto in = x.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (double& v : o) v /= z;
  }
  return out;
}

Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy) {
  require_same_shape(y, dy, "softmax_rows_backward");
  Matrix dx(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) dot += y(i, j) * dy(i, j);
    for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) = y(i, j) * (dy(i, j) - dot);
  }
  return dx;
}

Matrix sigmoid(const Matrix& x) {
  return map(x, [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Matrix relu(const Matrix& x) {
  return map(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Matrix layer_norm(const Matrix& x, const Matrix& scale, const Matrix& shift, double eps,
                  LayerNormCache* cache) {
  if (scale.rows() != 1 || scale.cols() != x.cols() || shift.rows() != 1 ||
      shift.cols() != x.cols()) {
    throw ShapeError("layer_norm: input " + x.shape_string() + " with scale " +
                     scale.shape_string() + " and shift " + shift.shape_string());
  }
  if (!(eps > 0.0)) throw ValidationError("layer_norm: eps must be positive");
  const std::size_t d = x.cols();
  Matrix normalized(x.rows(), d);
  std::vector<double> inv_std(x.rows());
  std::vector<bool> floored(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto in = x.row(i);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    floored[i] = var <= eps;
    inv_std[i] = 1.0 / std::sqrt(floored[i] ? eps : var);
    auto o = normalized.row(i);
    for (std::size_t j = 0; j < d; ++j) o[j] = (in[j] - mean) * inv_std[i];
  }
  Matrix out(x.rows(), d);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = normalized(i, j) * scale(0, j) + shift(0, j);
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->floored = std::move(floored);
  }
  return out;
}

LayerNormGrads layer_norm_backward(const LayerNormCache& cache, const Matrix& scale,
                                   const Matrix& dy) {
  const Matrix& xhat = cache.normalized;
  require_same_shape(xhat, dy, "layer_norm_backward");
  const std::size_t d = xhat.cols();
  const double inv_d = 1.0 / static_cast<double>(d);
  LayerNormGrads g{Matrix(xhat.rows(), d), Matrix(1, d), Matrix(1, d)};
  std::vector<double> dxhat(d);
  for (std::size_t i = 0; i < xhat.rows(); ++i) {
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      g.dscale(0, j) += dy(i, j) * xhat(i, j);
      g.dshift(0, j) += dy(i, j);
      dxhat[j] = dy(i, j) * scale(0, j);
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xhat(i, j);
    }
    mean_dxhat *= inv_d;
    mean_dxhat_xhat *= inv_d;
    // With a floored variance the denominator is a constant.
    if (cache.floored[i]) mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      g.dx(i, j) = cache.inv_std[i] * (dxhat[j] - mean_dxhat - xhat(i, j) * mean_dxhat_xhat);
    }
  }
  return g;
}

FfnParams FfnParams::zeros(std::size_t d_in, std::size_t d_hidden, std::size_t d_out) {
  return {Matrix(d_in, d_hidden), Matrix(1, d_hidden), Matrix(d_hidden, d_out), Matrix(1, d_out)};
}

FfnParams FfnParams::uniform(std::size_t d_in, std::size_t d_hidden, std::size_t d_out,
                             double range, Rng& rng) {
  FfnParams p;
  p.w1 = Matrix::uniform(d_in, d_hidden, -range, range, rng);
  p.b1 = Matrix::uniform(1, d_hidden, -range, range, rng);
  p.w2 = Matrix::uniform(d_hidden, d_out, -range, range, rng);
  p.b2 = Matrix::uniform(1, d_out, -range, range, rng);
  return p;
}

Matrix ffn(const Matrix& x, const FfnParams& p, FfnCache* cache) {
  if (p.w1.cols() != p.b1.cols() || p.w1.cols() != p.w2.rows() || p.w2.cols() != p.b2.cols()) {
    throw ShapeError("ffn: inconsistent parameter shapes w1 " + p.w1.shape_string() + ", w2 " +
                     p.w2.shape_string());
  }
  Matrix pre = add_row_broadcast(matmul(x, p.w1), p.b1);
  Matrix hidden = relu(pre);
  Matrix out = add_row_broadcast(matmul(hidden, p.w2), p.b2);
  if (cache != nullptr) {
    cache->input = x;
    cache->pre_activation = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out;
}

FfnGrads ffn_backward(const FfnCache& cache, const FfnParams& p, const Matrix& dy) {
  FfnGrads g;
  g.dparams.w2 = matmul_tn(cache.hidden, dy);
  g.dparams.b2 = column_sums(dy);
  Matrix dhidden = matmul_nt(dy, p.w2);
  for (std::size_t i = 0; i < dhidden.size(); ++i) {
    if (!(cache.pre_activation.values()[i] > 0.0)) dhidden.values()[i] = 0.0;
  }
  g.dparams.w1 = matmul_tn(cache.input, dhidden);
  g.dparams.b1 = column_sums(dhidden);
  g.dx = matmul_nt(dhidden, p.w1);
  return g;
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& theta,
                        double h) {
  if (!(h > 0.0)) throw ValidationError("finite_diff_grad: step must be positive");
  Matrix probe = theta;
  Matrix grad(theta.rows(), theta.cols());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = probe.values()[i];
    probe.values()[i] = orig + h;
    const double up = f(probe);
    probe.values()[i] = orig - h;
    const double down = f(probe);
    probe.values()[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("finite_diff_grad: non-finite evaluation at entry " +
                           std::to_string(i));
    }
    grad.values()[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace uvr
