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

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace uvr {

class Rng;

/// Dense row-major matrix of doubles. Row vectors (biases, layer-norm scale
/// and shift) are 1 x d matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);
  static Matrix uniform(std::size_t rows, std::size_t cols, double lo, double hi, Rng& rng);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Throws ShapeError unless a and b have identical shapes.
void require_same_shape(const Matrix& a, const Matrix& b, const char* op);
/// Throws NumericalError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, const std::string& what);
bool all_finite(const Matrix& m);

Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& a, double s);
void add_in_place(Matrix& acc, const Matrix& b);
/// Adds the 1 x cols row vector to every row of a.
Matrix add_row_broadcast(const Matrix& a, const Matrix& row);
/// 1 x cols matrix of column sums.
Matrix column_sums(const Matrix& a);
double sum(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);

/// Rows [begin, begin + count) of a.
Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t count);
/// Columns [begin, begin + count) of a.
Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t count);
/// Writes block into a starting at column `begin`.
void set_cols(Matrix& a, std::size_t begin, const Matrix& block);
/// Stacks a on top of b; column counts must agree.
Matrix vstack(const Matrix& a, const Matrix& b);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& x);
/// Gradient through softmax_rows given its output y and upstream dy.
Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy);

Matrix sigmoid(const Matrix& x);
Matrix relu(const Matrix& x);

struct LayerNormCache {
  Matrix normalized;   // x-hat, before scale/shift
  std::vector<double> inv_std;
  std::vector<bool> floored;  // row variance was below eps
};

/// Normalizes each row to zero mean and unit population variance, then
/// applies scale and shift (both 1 x cols). eps floors the variance: rows whose
/// variance exceeds eps come out with variance exactly 1.
Matrix layer_norm(const Matrix& x, const Matrix& scale, const Matrix& shift, double eps = 1e-5,
                  LayerNormCache* cache = nullptr);

struct LayerNormGrads {
  Matrix dx;
  Matrix dscale;
  Matrix dshift;
};

LayerNormGrads layer_norm_backward(const LayerNormCache& cache, const Matrix& scale,
                                   const Matrix& dy);

/// Two-layer ReLU feed-forward block: relu(x w1 + b1) w2 + b2, row-wise.
struct FfnParams {
  Matrix w1;  // d_in x d_hidden
  Matrix b1;  // 1 x d_hidden
  Matrix w2;  // d_hidden x d_out
  Matrix b2;  // 1 x d_out

  static FfnParams zeros(std::size_t d_in, std::size_t d_hidden, std::size_t d_out);
  static FfnParams uniform(std::size_t d_in, std::size_t d_hidden, std::size_t d_out,
                           double range, Rng& rng);

  std::size_t d_in() const { return w1.rows(); }
  std::size_t d_out() const { return w2.cols(); }

  template <typename F>
  void for_each_tensor(const std::string& prefix, F&& f) {
    f(prefix + ".w1", w1);
    f(prefix + ".b1", b1);
    f(prefix + ".w2", w2);
    f(prefix + ".b2", b2);
  }

  friend bool operator==(const FfnParams&, const FfnParams&) = default;
};

struct FfnCache {
  Matrix input;
  Matrix pre_activation;
  Matrix hidden;
};

Matrix ffn(const Matrix& x, const FfnParams& p, FfnCache* cache = nullptr);

struct FfnGrads {
  Matrix dx;
  FfnParams dparams;
};

FfnGrads ffn_backward(const FfnCache& cache, const FfnParams& p, const Matrix& dy);

/// Central-difference gradient of f at theta, one entry at a time.
/// Throws NumericalError if any evaluation is non-finite.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& theta,
                        double h = 1e-5);

}  // namespace uvr
