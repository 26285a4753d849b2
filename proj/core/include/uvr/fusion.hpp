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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uvr/corpus.hpp"
#include "uvr/tensor.hpp"
#include "uvr/tilt.hpp"

namespace uvr {

/// Single Transformer block: multi-head self-attention (K = Q = V drawn from
/// the same input) and a ReLU FFN, each wrapped in residual + layer norm.
struct EncoderParams {
  std::size_t heads = 8;
  Matrix token_table;  // V x d
  Matrix wq, wk, wv;   // d x d, head h owns columns [h*d/heads, (h+1)*d/heads)
  Matrix wo;           // d x d
  Matrix ln1_scale, ln1_shift;
  FfnParams ffn;       // d -> d_ff -> d
  Matrix ln2_scale, ln2_shift;

  std::size_t dim() const { return wq.rows(); }
  std::size_t vocab_size() const { return token_table.rows(); }

  template <typename F>
  void for_each_tensor(F&& f) {
    f("encoder.token_table", token_table);
    f("encoder.wq", wq);
    f("encoder.wk", wk);
    f("encoder.wv", wv);
    f("encoder.wo", wo);
    f("encoder.ln1_scale", ln1_scale);
    f("encoder.ln1_shift", ln1_shift);
    ffn.for_each_tensor("encoder.ffn", f);
    f("encoder.ln2_scale", ln2_scale);
    f("encoder.ln2_shift", ln2_shift);
  }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

/// Parameters of the image projection, image-text attention and gate.
struct FusionParams {
  Matrix w_g;       // d x d, applied as M w_g^T
  Matrix b_g;       // 1 x d, added to every projected image row
  Matrix w_lambda;  // d x d, applied as H' w_lambda^T
  Matrix u_lambda;  // d x d, applied as H u_lambda^T
  FfnParams image_ffn;  // d_m -> d_hidden -> d
  Matrix ln_scale, ln_shift;

  std::size_t dim() const { return w_g.rows(); }
  std::size_t feature_dim() const { return image_ffn.d_in(); }

  template <typename F>
  void for_each_tensor(F&& f) {
    f("fusion.w_g", w_g);
    f("fusion.b_g", b_g);
    f("fusion.w_lambda", w_lambda);
    f("fusion.u_lambda", u_lambda);
    image_ffn.for_each_tensor("fusion.image_ffn", f);
    f("fusion.ln_scale", ln_scale);
    f("fusion.ln_shift", ln_shift);
  }

  friend bool operator==(const FusionParams&, const FusionParams&) = default;
};

struct FusionModelConfig {
  std::size_t dim = 16;
  std::size_t heads = 8;
  std::size_t ffn_hidden = 32;
  std::size_t image_hidden = 32;
  double init_range = 0.1;
  double ln_eps = 1e-5;
  std::uint64_t seed = 7;
};

/// Encoder and fusion parameters trained together.
struct FusionModel {
  EncoderParams encoder;
  FusionParams fusion;
  double ln_eps = 1e-5;

  /// Weights uniform(-range, range), layer-norm scale 1 and shift 0.
  static FusionModel init(std::size_t vocab_size, std::size_t feature_dim,
                          const FusionModelConfig& config);

  template <typename F>
  void for_each_tensor(F&& f) {
    encoder.for_each_tensor(f);
    fusion.for_each_tensor(f);
  }

  friend bool operator==(const FusionModel&, const FusionModel&) = default;
};

/// Returns a model of the same shapes with every tensor zeroed.
FusionModel zeros_like(const FusionModel& model);

struct TextRepr {
  Matrix h;  // n x d
  std::size_t n() const { return h.rows(); }
  std::size_t d() const { return h.cols(); }
};

struct ImageRepr {
  Matrix m;  // m x d, rows in retrieval order
  std::size_t count() const { return m.rows(); }
};

struct EncoderTrace {
  std::vector<TokenId> tokens;
  Matrix x;  // embeddings + positions
  Matrix q, k, v;
  std::vector<Matrix> attention;  // per head, n x n
  Matrix heads_out;               // concatenated head outputs, n x d
  LayerNormCache ln1;
  Matrix y1;
  FfnCache ffn;
  LayerNormCache ln2;
};

/// Sinusoidal position table, n x d.
Matrix positional_encoding(std::size_t n, std::size_t d);

TextRepr encode_text(const Sentence& sentence, const EncoderParams& params, double ln_eps = 1e-5,
                     EncoderTrace* trace = nullptr);

struct ImageTrace {
  FfnCache ffn;
};

/// Gathers feature rows in ranked order (id 0 is the blank row) and applies
/// the image FFN. Throws ValidationError for ids outside the table.
ImageRepr project_images(const RankedImages& ranked, const FeatureTable& features,
                         const FusionParams& params, ImageTrace* trace = nullptr);

struct Attention {
  Matrix alpha;    // n x m, rows sum to 1
  Matrix h_prime;  // n x d
};

struct AttendTrace {
  Matrix projected;  // M w_g^T + b_g
};

/// alpha = softmax_over_images(H (M w_g^T + b_g)^T), H' = alpha M.
Attention attend(const Matrix& h, const Matrix& m, const FusionParams& params,
                 AttendTrace* trace = nullptr);

struct FusionOutput {
  Matrix h_hat;    // n x d
  Matrix alpha;    // n x m (empty when produced by gate_fuse alone)
  Matrix lambda;   // n x d
  Matrix h_prime;  // n x d
};

/// lambda = sigmoid(H' w_lambda^T + H u_lambda^T), or the constant
/// `fixed_lambda` when given; H_hat = LayerNorm(H + lambda * H').
FusionOutput gate_fuse(const Matrix& h, const Matrix& h_prime, const FusionParams& params,
                       std::optional<double> fixed_lambda = std::nullopt, double ln_eps = 1e-5,
                       LayerNormCache* ln_cache = nullptr);

/// Mean of all gate values.
double mean_gate(const FusionOutput& out);

struct FusionOptions {
  std::optional<double> fixed_lambda;
};

/// Intermediates of one sentence's forward pass, kept for backward().
struct FusionTrace {
  EncoderTrace encoder;
  TextRepr text;
  ImageTrace image;
  ImageRepr images;
  AttendTrace attend;
  LayerNormCache ln;
  FusionOutput out;
  std::optional<double> fixed_lambda;
  bool complete = false;
};

/// Encode, project, attend and gate one sentence with its retrieved images.
FusionTrace fuse_sentence(const Sentence& sentence, const RankedImages& ranked,
                          const FeatureTable& features, const FusionModel& model,
                          const FusionOptions& options = {});

/// Fuses precomputed representations (no encoder in the trace).
FusionTrace fuse_representations(const TextRepr& text, const ImageRepr& images,
                                 const FusionParams& params, const FusionOptions& options = {},
                                 double ln_eps = 1e-5);

struct PairFusionOutput {
  Matrix h_hat;  // (n1 + n2) x d
  FusionOutput first;
  FusionOutput second;
};

/// Fuses both sides of a sentence pair with shared parameters and stacks the
/// results along the token axis.
PairFusionOutput fuse_pair(const TextRepr& h1, const TextRepr& h2, const ImageRepr& m1,
                           const ImageRepr& m2, const FusionParams& params,
                           const FusionOptions& options = {}, double ln_eps = 1e-5);

/// Analytic gradients of every encoder and fusion tensor given dL/dH_hat.
/// Encoder gradients are zero when the trace holds no encoder pass.
/// Throws ValidationError if the trace is incomplete.
FusionModel backward(const FusionTrace& trace, const FusionModel& model, const Matrix& d_h_hat);

std::vector<std::uint8_t> serialize_fusion_model(const FusionModel& model);
FusionModel deserialize_fusion_model(const std::vector<std::uint8_t>& bytes);
void save_fusion_model(const FusionModel& model, const std::filesystem::path& path);
FusionModel load_fusion_model(const std::filesystem::path& path);

}  // namespace uvr
