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

#include "uvr/fusion.hpp"

#include <cmath>

#include "uvr/binary_io.hpp"
#include "uvr/error.hpp"
#include "uvr/rng.hpp"

namespace uvr {

namespace {

constexpr Magic kModelMagic = {'U', 'V', 'R', 'P'};
constexpr std::uint32_t kModelVersion = 1;

Matrix ones_row(std::size_t d) { return Matrix(1, d, 1.0); }

std::size_t head_dim(const EncoderParams& p) {
  if (p.heads == 0 || p.dim() % p.heads != 0) {
    throw ValidationError("hidden size " + std::to_string(p.dim()) + " is not divisible by " +
                          std::to_string(p.heads) + " heads");
  }
  return p.dim() / p.heads;
}

void require_square(const Matrix& w, std::size_t d, const char* name) {
  if (w.rows() != d || w.cols() != d) {
    throw ShapeError(std::string(name) + " must be " + std::to_string(d) + "x" +
                     std::to_string(d) + ", got " + w.shape_string());
  }
}

}  // namespace

FusionModel FusionModel::init(std::size_t vocab_size, std::size_t feature_dim,
                              const FusionModelConfig& config) {
  if (config.dim == 0 || config.heads == 0 || config.dim % config.heads != 0) {
    throw ValidationError("hidden size must be a positive multiple of the head count");
  }
  if (feature_dim == 0) throw ValidationError("feature dimension must be positive");
  Rng rng(config.seed);
  const double r = config.init_range;
  const std::size_t d = config.dim;
  FusionModel model;
  model.ln_eps = config.ln_eps;
  auto& e = model.encoder;
  e.heads = config.heads;
  e.token_table = Matrix::uniform(vocab_size, d, -r, r, rng);
  e.wq = Matrix::uniform(d, d, -r, r, rng);
  e.wk = Matrix::uniform(d, d, -r, r, rng);
  e.wv = Matrix::uniform(d, d, -r, r, rng);
  e.wo = Matrix::uniform(d, d, -r, r, rng);
  e.ln1_scale = ones_row(d);
  e.ln1_shift = Matrix(1, d);
  e.ffn = FfnParams::uniform(d, config.ffn_hidden, d, r, rng);
  e.ln2_scale = ones_row(d);
  e.ln2_shift = Matrix(1, d);
  auto& f = model.fusion;
  f.w_g = Matrix::uniform(d, d, -r, r, rng);
  f.b_g = Matrix::uniform(1, d, -r, r, rng);
  f.w_lambda = Matrix::uniform(d, d, -r, r, rng);
  f.u_lambda = Matrix::uniform(d, d, -r, r, rng);
  f.image_ffn = FfnParams::uniform(feature_dim, config.image_hidden, d, r, rng);
  f.ln_scale = ones_row(d);
  f.ln_shift = Matrix(1, d);
  return model;
}

FusionModel zeros_like(const FusionModel& model) {
  FusionModel z = model;
  z.for_each_tensor([](const std::string&, Matrix& t) {
    for (double& v : t.values()) v = 0.0;
  });
  return z;
}

Matrix positional_encoding(std::size_t n, std::size_t d) {
  Matrix pe(n, d);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * freq;
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

TextRepr encode_text(const Sentence& sentence, const EncoderParams& params, double ln_eps,
                     EncoderTrace* trace) {
  if (sentence.empty()) throw ValidationError("encode_text: sentence has no tokens");
  const std::size_t d = params.dim();
  const std::size_t dh = head_dim(params);
  const std::size_t n = sentence.tokens.size();
  for (const Matrix* w : {&params.wk, &params.wv, &params.wo}) require_square(*w, d, "attention weight");
  if (params.token_table.cols() != d) throw ShapeError("token table width differs from hidden size");

  Matrix x = positional_encoding(n, d);
  std::vector<TokenId> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TokenId t = sentence.tokens[i].id;
    if (t >= params.vocab_size()) {
      throw ValidationError("encode_text: token id " + std::to_string(t) + " outside vocabulary of " +
                            std::to_string(params.vocab_size()));
    }
    ids.push_back(t);
    const auto row = params.token_table.row(t);
    for (std::size_t j = 0; j < d; ++j) x(i, j) += row[j];
  }

  Matrix q = matmul(x, params.wq);
  Matrix k = matmul(x, params.wk);
  Matrix v = matmul(x, params.wv);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix heads_out(n, d);
  std::vector<Matrix> attention;
  attention.reserve(params.heads);
  for (std::size_t h = 0; h < params.heads; ++h) {
    const Matrix qh = slice_cols(q, h * dh, dh);
    const Matrix kh = slice_cols(k, h * dh, dh);
    const Matrix vh = slice_cols(v, h * dh, dh);
    Matrix a = softmax_rows(scaled(matmul_nt(qh, kh), inv_sqrt));
    set_cols(heads_out, h * dh, matmul(a, vh));
    attention.push_back(std::move(a));
  }
  const Matrix attn_out = matmul(heads_out, params.wo);

  LayerNormCache ln1;
  Matrix y1 = layer_norm(add(x, attn_out), params.ln1_scale, params.ln1_shift, ln_eps, &ln1);
  FfnCache ffn_cache;
  const Matrix f = ffn(y1, params.ffn, &ffn_cache);
  LayerNormCache ln2;
  Matrix out = layer_norm(add(y1, f), params.ln2_scale, params.ln2_shift, ln_eps, &ln2);
  require_finite(out, "encoder output");

  if (trace != nullptr) {
    trace->tokens = std::move(ids);
    trace->x = std::move(x);
    trace->q = std::move(q);
    trace->k = std::move(k);
    trace->v = std::move(v);
    trace->attention = std::move(attention);
    trace->heads_out = std::move(heads_out);
    trace->ln1 = std::move(ln1);
    trace->y1 = std::move(y1);
    trace->ffn = std::move(ffn_cache);
    trace->ln2 = std::move(ln2);
  }
  return {std::move(out)};
}

ImageRepr project_images(const RankedImages& ranked, const FeatureTable& features,
                         const FusionParams& params, ImageTrace* trace) {
  if (ranked.images.empty()) throw ValidationError("project_images: no image ids");
  if (params.feature_dim() != features.dim()) {
    throw ShapeError("project_images: image FFN expects " + std::to_string(params.feature_dim()) +
                     "-d features, table has " + std::to_string(features.dim()));
  }
  Matrix gathered(ranked.images.size(), features.dim());
  for (std::size_t i = 0; i < ranked.images.size(); ++i) {
    const ImageId id = ranked.images[i];
    if (id >= features.n_rows()) {
      throw ValidationError("project_images: image id " + std::to_string(id) +
                            " outside feature table of " + std::to_string(features.n_rows()) +
                            " rows");
    }
    const auto row = features.row(id);
    std::copy(row.begin(), row.end(), gathered.row(i).begin());
  }
  ImageRepr repr{ffn(gathered, params.image_ffn, trace != nullptr ? &trace->ffn : nullptr)};
  require_finite(repr.m, "image representation");
  return repr;
}

Attention attend(const Matrix& h, const Matrix& m, const FusionParams& params, AttendTrace* trace) {
  const std::size_t d = params.dim();
  require_square(params.w_g, d, "w_g");
  if (h.cols() != d || m.cols() != d) {
    throw ShapeError("attend: H " + h.shape_string() + " and M " + m.shape_string() +
                     " must both have " + std::to_string(d) + " columns");
  }
  if (m.rows() == 0) throw ShapeError("attend: image representation has no rows");
  Matrix projected = add_row_broadcast(matmul_nt(m, params.w_g), params.b_g);
  Attention out;
  out.alpha = softmax_rows(matmul_nt(h, projected));
  out.h_prime = matmul(out.alpha, m);
  if (trace != nullptr) trace->projected = std::move(projected);
  return out;
}

FusionOutput gate_fuse(const Matrix& h, const Matrix& h_prime, const FusionParams& params,
                       std::optional<double> fixed_lambda, double ln_eps, LayerNormCache* ln_cache) {
  require_same_shape(h, h_prime, "gate_fuse");
  FusionOutput out;
  if (fixed_lambda) {
    if (!(*fixed_lambda >= 0.0 && *fixed_lambda <= 1.0)) {
      throw ValidationError("fixed gate value must lie in [0, 1]");
    }
    out.lambda = Matrix(h.rows(), h.cols(), *fixed_lambda);
  } else {
    require_square(params.w_lambda, h.cols(), "w_lambda");
    require_square(params.u_lambda, h.cols(), "u_lambda");
    out.lambda = sigmoid(add(matmul_nt(h_prime, params.w_lambda), matmul_nt(h, params.u_lambda)));
  }
  out.h_hat = layer_norm(add(h, hadamard(out.lambda, h_prime)), params.ln_scale, params.ln_shift,
                         ln_eps, ln_cache);
  out.h_prime = h_prime;
  require_finite(out.h_hat, "fused representation");
  return out;
}

double mean_gate(const FusionOutput& out) {
  if (out.lambda.empty()) throw ValidationError("mean_gate: no gate values");
  return sum(out.lambda) / static_cast<double>(out.lambda.size());
}

FusionTrace fuse_representations(const TextRepr& text, const ImageRepr& images,
                                 const FusionParams& params, const FusionOptions& options,
                                 double ln_eps) {
  FusionTrace t;
  t.text = text;
  t.images = images;
  t.fixed_lambda = options.fixed_lambda;
  Attention a = attend(text.h, images.m, params, &t.attend);
  t.out = gate_fuse(text.h, a.h_prime, params, options.fixed_lambda, ln_eps, &t.ln);
  t.out.alpha = std::move(a.alpha);
  t.complete = true;
  return t;
}

FusionTrace fuse_sentence(const Sentence& sentence, const RankedImages& ranked,
                          const FeatureTable& features, const FusionModel& model,
                          const FusionOptions& options) {
  EncoderTrace enc;
  ImageTrace img;
  const TextRepr text = encode_text(sentence, model.encoder, model.ln_eps, &enc);
  const ImageRepr images = project_images(ranked, features, model.fusion, &img);
  FusionTrace t = fuse_representations(text, images, model.fusion, options, model.ln_eps);
  t.encoder = std::move(enc);
  t.image = std::move(img);
  return t;
}

PairFusionOutput fuse_pair(const TextRepr& h1, const TextRepr& h2, const ImageRepr& m1,
                           const ImageRepr& m2, const FusionParams& params,
                           const FusionOptions& options, double ln_eps) {
  if (h1.d() != h2.d() || m1.m.cols() != m2.m.cols()) {
    throw ShapeError("fuse_pair: hidden sizes differ between the two sides");
  }
  PairFusionOutput out;
  out.first = fuse_representations(h1, m1, params, options, ln_eps).out;
  out.second = fuse_representations(h2, m2, params, options, ln_eps).out;
  out.h_hat = vstack(out.first.h_hat, out.second.h_hat);
  return out;
}

namespace {

/// Backward through the encoder given dL/dH; accumulates into g.
void encoder_backward(const EncoderTrace& t, const EncoderParams& p, const Matrix& dh,
                      EncoderParams& g) {
  const std::size_t dh_size = head_dim(p);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh_size));

  const LayerNormGrads ln2 = layer_norm_backward(t.ln2, p.ln2_scale, dh);
  add_in_place(g.ln2_scale, ln2.dscale);
  add_in_place(g.ln2_shift, ln2.dshift);
  const FfnGrads fg = ffn_backward(t.ffn, p.ffn, ln2.dx);
  add_in_place(g.ffn.w1, fg.dparams.w1);
  add_in_place(g.ffn.b1, fg.dparams.b1);
  add_in_place(g.ffn.w2, fg.dparams.w2);
  add_in_place(g.ffn.b2, fg.dparams.b2);
  const Matrix dy1 = add(ln2.dx, fg.dx);

  const LayerNormGrads ln1 = layer_norm_backward(t.ln1, p.ln1_scale, dy1);
  add_in_place(g.ln1_scale, ln1.dscale);
  add_in_place(g.ln1_shift, ln1.dshift);
  Matrix dx = ln1.dx;
  const Matrix& d_attn_out = ln1.dx;

  add_in_place(g.wo, matmul_tn(t.heads_out, d_attn_out));
  const Matrix d_heads = matmul_nt(d_attn_out, p.wo);

  const std::size_t n = t.x.rows();
  Matrix dq(n, p.dim()), dk(n, p.dim()), dv(n, p.dim());
  for (std::size_t h = 0; h < p.heads; ++h) {
    const std::size_t c0 = h * dh_size;
    const Matrix qh = slice_cols(t.q, c0, dh_size);
    const Matrix kh = slice_cols(t.k, c0, dh_size);
    const Matrix vh = slice_cols(t.v, c0, dh_size);
    const Matrix& a = t.attention[h];
    const Matrix d_oh = slice_cols(d_heads, c0, dh_size);
    const Matrix da = matmul_nt(d_oh, vh);
    set_cols(dv, c0, matmul_tn(a, d_oh));
    const Matrix ds = scaled(softmax_rows_backward(a, da), inv_sqrt);
    set_cols(dq, c0, matmul(ds, kh));
    set_cols(dk, c0, matmul_tn(ds, qh));
  }
  add_in_place(g.wq, matmul_tn(t.x, dq));
  add_in_place(g.wk, matmul_tn(t.x, dk));
  add_in_place(g.wv, matmul_tn(t.x, dv));
  add_in_place(dx, matmul_nt(dq, p.wq));
  add_in_place(dx, matmul_nt(dk, p.wk));
  add_in_place(dx, matmul_nt(dv, p.wv));

  for (std::size_t i = 0; i < n; ++i) {
    auto row = g.token_table.row(t.tokens[i]);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += dx(i, j);
  }
}

}  // namespace

FusionModel backward(const FusionTrace& trace, const FusionModel& model, const Matrix& d_h_hat) {
  if (!trace.complete || trace.ln.normalized.empty()) {
    throw ValidationError("backward: forward intermediates are missing");
  }
  const Matrix& h = trace.text.h;
  const Matrix& m = trace.images.m;
  const FusionOutput& out = trace.out;
  const FusionParams& p = model.fusion;
  require_same_shape(out.h_hat, d_h_hat, "backward");

  FusionModel grads = zeros_like(model);
  FusionParams& g = grads.fusion;

  // H_hat = LayerNorm(R), R = H + lambda * H'
  const LayerNormGrads ln = layer_norm_backward(trace.ln, p.ln_scale, d_h_hat);
  g.ln_scale = ln.dscale;
  g.ln_shift = ln.dshift;
  const Matrix& dr = ln.dx;
  Matrix dh = dr;
  Matrix dh_prime = hadamard(dr, out.lambda);

  if (!trace.fixed_lambda) {
    // lambda = sigmoid(Z), Z = H' w_lambda^T + H u_lambda^T
    Matrix dz = hadamard(dr, out.h_prime);
    for (std::size_t i = 0; i < dz.size(); ++i) {
      const double l = out.lambda.values()[i];
      dz.values()[i] *= l * (1.0 - l);
    }
    g.w_lambda = matmul_tn(dz, out.h_prime);
    g.u_lambda = matmul_tn(dz, h);
    add_in_place(dh_prime, matmul(dz, p.w_lambda));
    add_in_place(dh, matmul(dz, p.u_lambda));
  }

  // H' = alpha M, alpha = softmax(S), S = H G^T, G = M w_g^T + b_g
  const Matrix d_alpha = matmul_nt(dh_prime, m);
  Matrix dm = matmul_tn(out.alpha, dh_prime);
  const Matrix ds = softmax_rows_backward(out.alpha, d_alpha);
  add_in_place(dh, matmul(ds, trace.attend.projected));
  const Matrix d_projected = matmul_tn(ds, h);
  add_in_place(dm, matmul(d_projected, p.w_g));
  g.w_g = matmul_tn(d_projected, m);
  g.b_g = column_sums(d_projected);

  if (!trace.image.ffn.input.empty()) {
    const FfnGrads fg = ffn_backward(trace.image.ffn, p.image_ffn, dm);
    g.image_ffn = fg.dparams;
  }
  if (!trace.encoder.tokens.empty()) {
    encoder_backward(trace.encoder, model.encoder, dh, grads.encoder);
  }
  return grads;
}

std::vector<std::uint8_t> serialize_fusion_model(const FusionModel& model) {
  ByteWriter w;
  w.u64(model.encoder.heads);
  w.f64(model.ln_eps);
  FusionModel copy = model;
  copy.for_each_tensor([&](const std::string&, Matrix& t) { w.matrix(t); });
  return wrap_container(kModelMagic, kModelVersion, w.buffer());
}

FusionModel deserialize_fusion_model(const std::vector<std::uint8_t>& bytes) {
  const auto payload = unwrap_container(bytes, kModelMagic, kModelVersion);
  ByteReader r(payload);
  FusionModel model;
  model.encoder.heads = r.u64();
  model.ln_eps = r.f64();
  if (!(model.ln_eps > 0.0) || !std::isfinite(model.ln_eps)) throw LoadError("UVRP eps must be positive");
  model.for_each_tensor([&](const std::string&, Matrix& t) { t = r.matrix(); });
  r.expect_end("UVRP payload");

  const std::size_t d = model.encoder.wq.rows();
  const auto& e = model.encoder;
  const auto& f = model.fusion;
  auto square = [d](const Matrix& m) { return m.rows() == d && m.cols() == d; };
  auto row = [d](const Matrix& m) { return m.rows() == 1 && m.cols() == d; };
  const bool ok = d > 0 && e.heads > 0 && d % e.heads == 0 && e.token_table.cols() == d &&
                  square(e.wq) && square(e.wk) && square(e.wv) && square(e.wo) &&
                  row(e.ln1_scale) && row(e.ln1_shift) && row(e.ln2_scale) && row(e.ln2_shift) &&
                  e.ffn.w1.rows() == d && e.ffn.w2.cols() == d && e.ffn.w1.cols() == e.ffn.w2.rows() &&
                  e.ffn.b1.cols() == e.ffn.w1.cols() && row(e.ffn.b2) && square(f.w_g) &&
                  row(f.b_g) && square(f.w_lambda) && square(f.u_lambda) && f.image_ffn.w2.cols() == d &&
                  f.image_ffn.w1.cols() == f.image_ffn.w2.rows() &&
                  f.image_ffn.b1.cols() == f.image_ffn.w1.cols() && row(f.image_ffn.b2) &&
                  row(f.ln_scale) && row(f.ln_shift);
  if (!ok) throw LoadError("UVRP parameter shapes are inconsistent");
  return model;
}

void save_fusion_model(const FusionModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_fusion_model(model));
}

FusionModel load_fusion_model(const std::filesystem::path& path) {
  return deserialize_fusion_model(read_file(path));
}

}  // namespace uvr
