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

#include "uvr/cmrm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>
#include "uvr/binary_io.hpp"
#include "uvr/error.hpp"
#include "uvr/rng.hpp"

namespace uvr {

namespace {

constexpr Magic kIndexMagic = {'U', 'V', 'R', 'E'};
constexpr std::uint32_t kIndexVersion = 1;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Normalized {
  Matrix unit;  // 1 x d_e
  double norm = 0.0;
};

Normalized normalize(Matrix raw, const char* what) {
  double sq = 0.0;
  for (double v : raw.values()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw NumericalError(std::string(what) + ": projected vector has zero or non-finite norm");
  }
  for (double& v : raw.values()) v /= norm;
  return {std::move(raw), norm};
}

/// Gradient of a loss w.r.t. the pre-normalization vector given the gradient
/// w.r.t. the unit vector: (g - u (u.g)) / |v|.
Matrix normalize_backward(const Normalized& n, const Matrix& g) {
  const double ug = dot(n.unit.values(), g.values());
  Matrix dv(1, g.cols());
  for (std::size_t j = 0; j < g.cols(); ++j) dv(0, j) = (g(0, j) - n.unit(0, j) * ug) / n.norm;
  return dv;
}

Matrix mean_token_row(const Sentence& sentence, const Matrix& table) {
  Matrix mean(1, table.cols());
  for (const auto& tok : sentence.tokens) {
    if (tok.id >= table.rows()) {
      throw ValidationError("token id " + std::to_string(tok.id) + " outside the embedding table");
    }
    const auto row = table.row(tok.id);
    for (std::size_t j = 0; j < row.size(); ++j) mean(0, j) += row[j];
  }
  const double inv = 1.0 / static_cast<double>(sentence.tokens.size());
  for (double& v : mean.values()) v *= inv;
  return mean;
}

struct TextForward {
  Matrix mean;
  Normalized out;
};

TextForward text_forward(const Sentence& sentence, const TextEmbedParams& p) {
  if (sentence.empty()) throw ValidationError("cannot embed an empty sentence");
  Matrix mean = mean_token_row(sentence, p.token_table);
  Matrix raw = add_row_broadcast(matmul(mean, p.proj), p.bias);
  return {std::move(mean), normalize(std::move(raw), "embed_text")};
}

Matrix as_row(std::span<const double> v) { return Matrix(1, v.size(), {v.begin(), v.end()}); }

Normalized image_forward(std::span<const double> feature, const ImageEmbedParams& p) {
  if (feature.size() != p.proj.rows()) {
    throw ShapeError("embed_image: feature has " + std::to_string(feature.size()) +
                     " values, projection expects " + std::to_string(p.proj.rows()));
  }
  for (double v : feature) {
    if (!std::isfinite(v)) throw ValidationError("embed_image: non-finite feature value");
  }
  Matrix raw = add_row_broadcast(matmul(as_row(feature), p.proj), p.bias);
  return normalize(std::move(raw), "embed_image");
}

void accumulate_text_grad(const Sentence& sentence, const TextEmbedParams& p, const TextForward& fw,
                          const Matrix& d_unit, TextEmbedParams& g) {
  const Matrix dv = normalize_backward(fw.out, d_unit);
  add_in_place(g.proj, matmul_tn(fw.mean, dv));
  add_in_place(g.bias, dv);
  const Matrix dmean = matmul_nt(dv, p.proj);
  const double inv = 1.0 / static_cast<double>(sentence.tokens.size());
  for (const auto& tok : sentence.tokens) {
    auto row = g.token_table.row(tok.id);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += dmean(0, j) * inv;
  }
}

CmrmParams zeros_like(const CmrmParams& p) {
  CmrmParams z;
  z.text.token_table = Matrix(p.text.token_table.rows(), p.text.token_table.cols());
  z.text.proj = Matrix(p.text.proj.rows(), p.text.proj.cols());
  z.text.bias = Matrix(1, p.text.bias.cols());
  z.image.proj = Matrix(p.image.proj.rows(), p.image.proj.cols());
  z.image.bias = Matrix(1, p.image.bias.cols());
  return z;
}

}  // namespace

Matrix embed_text(const Sentence& sentence, const TextEmbedParams& params) {
  return text_forward(sentence, params).out.unit;
}

Matrix embed_image(std::span<const double> feature, const ImageEmbedParams& params) {
  return image_forward(feature, params).unit;
}

double triplet_loss(std::span<const double> x, std::span<const double> y,
                    std::span<const double> z, double margin) {
  if (x.size() != y.size() || x.size() != z.size()) {
    throw ShapeError("triplet_loss: embedding sizes differ");
  }
  return std::max(0.0, margin - dot(x, y) + dot(x, z));
}

Matrix embed_all_images(const FeatureTable& features, const ImageEmbedParams& params) {
  Matrix vecs(features.n_images(), params.proj.cols());
  for (std::size_t i = 1; i < features.n_rows(); ++i) {
    const Matrix u = embed_image(features.row(i), params);
    std::copy(u.values().begin(), u.values().end(), vecs.row(i - 1).begin());
  }
  return vecs;
}

ImageId mine_hard_negative(std::span<const double> text_vec, const std::set<ImageId>& excluded,
                           const JointEmbeddingIndex& index) {
  std::optional<ImageId> best;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < index.n_images(); ++i) {
    const auto id = static_cast<ImageId>(i + 1);
    if (excluded.contains(id)) continue;
    const double sim = dot(text_vec, index.image_vecs.row(i));
    if (!best || sim > best_sim) {
      best = id;
      best_sim = sim;
    }
  }
  if (!best) throw ValidationError("mine_hard_negative: every indexed image is associated");
  return *best;
}

RankedImages retrieve_cmrm(const Sentence& sentence, const JointEmbeddingIndex& index,
                           double threshold, std::size_t m) {
  if (m == 0) throw ValidationError("retrieval budget m must be at least 1");
  if (!(threshold >= -1.0 && threshold <= 1.0)) {
    throw ValidationError("similarity threshold must lie in [-1, 1]");
  }
  if (sentence.empty()) return RankedImages::blank(m);
  const Matrix x = embed_text(sentence, index.params.text);
  std::vector<std::pair<double, ImageId>> hits;
  for (std::size_t i = 0; i < index.n_images(); ++i) {
    const double sim = dot(x.values(), index.image_vecs.row(i));
    if (sim >= threshold) hits.emplace_back(sim, static_cast<ImageId>(i + 1));
  }
  if (hits.empty()) return RankedImages::blank(m);
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  RankedImages out;
  out.m = m;
  for (std::size_t i = 0; i < hits.size() && i < m; ++i) {
    out.images.push_back(hits[i].second);
    out.scores.push_back(hits[i].first);
  }
  return out;
}

CmrmParams init_cmrm_params(std::size_t vocab_size, std::size_t feature_dim,
                            const CmrmConfig& config) {
  if (config.text_dim == 0 || config.embed_dim == 0 || feature_dim == 0) {
    throw ValidationError("embedding dimensions must be positive");
  }
  Rng rng(derive_seed(config.seed, 0));
  const double r = config.init_range;
  const double text_scale = 1.0 / std::sqrt(static_cast<double>(config.text_dim));
  const double image_scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  CmrmParams p;
  p.text.token_table = Matrix::uniform(vocab_size, config.text_dim, -r, r, rng);
  p.text.proj = Matrix::uniform(config.text_dim, config.embed_dim, -text_scale, text_scale, rng);
  p.text.bias = Matrix(1, config.embed_dim);
  p.image.proj = Matrix::uniform(feature_dim, config.embed_dim, -image_scale, image_scale, rng);
  p.image.bias = Matrix(1, config.embed_dim);
  return p;
}

ObjectiveResult triplet_objective(const CmrmParams& params, const FeatureTable& features,
                                  std::span<const TripletSample> batch, double margin,
                                  NegativeScope scope, CmrmParams* grad) {
  ObjectiveResult result;
  result.kink_distance = std::numeric_limits<double>::infinity();
  result.mining_gap = std::numeric_limits<double>::infinity();
  if (grad != nullptr) *grad = zeros_like(params);
  if (batch.empty()) return result;

  std::vector<ImageId> candidates;
  if (scope == NegativeScope::kBatch) {
    for (const auto& s : batch) candidates.push_back(s.positive);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  } else {
    candidates.resize(features.n_images());
    std::iota(candidates.begin(), candidates.end(), ImageId{1});
  }
  std::map<ImageId, Normalized> images;
  for (ImageId id : candidates) images.emplace(id, image_forward(features.row(id), params.image));
  for (const auto& s : batch) {
    if (!images.contains(s.positive)) {
      images.emplace(s.positive, image_forward(features.row(s.positive), params.image));
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  std::map<ImageId, Matrix> image_grads;
  double total = 0.0;
  for (const auto& sample : batch) {
    if (sample.sentence == nullptr || sample.sentence->empty()) continue;
    const TextForward text = text_forward(*sample.sentence, params.text);
    const auto x = text.out.unit.values();

    std::optional<ImageId> negative;
    double best = -std::numeric_limits<double>::infinity();
    double runner_up = -std::numeric_limits<double>::infinity();
    for (ImageId id : candidates) {
      if (id == sample.positive) continue;
      const double sim = dot(x, images.at(id).unit.values());
      if (!negative || sim > best) {
        runner_up = best;
        best = sim;
        negative = id;
      } else if (sim > runner_up) {
        runner_up = sim;
      }
    }
    if (!negative) continue;
    result.mining_gap = std::min(result.mining_gap, best - runner_up);

    const Normalized& pos = images.at(sample.positive);
    const Normalized& neg = images.at(*negative);
    const double hinge = margin - dot(x, pos.unit.values()) + best;
    result.kink_distance = std::min(result.kink_distance, std::abs(hinge));
    if (hinge <= 0.0) continue;
    total += hinge;
    if (grad == nullptr) continue;

    const Matrix dx = scaled(subtract(neg.unit, pos.unit), inv_batch);
    accumulate_text_grad(*sample.sentence, params.text, text, dx, grad->text);
    auto add_image_grad = [&](ImageId id, double sign) {
      Matrix g = scaled(text.out.unit, sign * inv_batch);
      auto [it, inserted] = image_grads.try_emplace(id, g);
      if (!inserted) add_in_place(it->second, g);
    };
    add_image_grad(sample.positive, -1.0);
    add_image_grad(*negative, 1.0);
  }
  result.loss = total * inv_batch;

  if (grad != nullptr) {
    for (const auto& [id, g] : image_grads) {
      const Matrix dv = normalize_backward(images.at(id), g);
      add_in_place(grad->image.proj, matmul_tn(as_row(features.row(id)), dv));
      add_in_place(grad->image.bias, dv);
    }
  }
  return result;
}

namespace {

std::vector<TripletSample> samples_of(const CaptionCorpus& corpus) {
  std::vector<TripletSample> out;
  out.reserve(corpus.pairs.size());
  for (const auto& p : corpus.pairs) out.push_back({&p.sentence, p.image.image_id});
  return out;
}

double evaluate_loss(const CmrmParams& params, const FeatureTable& features,
                     const std::vector<TripletSample>& samples, const CmrmConfig& config) {
  if (samples.empty()) return 0.0;
  double weighted = 0.0;
  for (std::size_t begin = 0; begin < samples.size(); begin += config.batch) {
    const std::size_t n = std::min(config.batch, samples.size() - begin);
    std::span<const TripletSample> chunk(samples.data() + begin, n);
    weighted += triplet_objective(params, features, chunk, config.margin, config.negatives).loss *
                static_cast<double>(n);
  }
  return weighted / static_cast<double>(samples.size());
}

void sgd_step(CmrmParams& params, CmrmParams& grad, double lr) {
  std::vector<Matrix*> grads;
  grad.for_each_tensor([&](const std::string&, Matrix& g) { grads.push_back(&g); });
  std::size_t i = 0;
  params.for_each_tensor([&](const std::string&, Matrix& p) {
    auto pv = p.values();
    auto gv = grads[i++]->values();
    for (std::size_t k = 0; k < pv.size(); ++k) pv[k] -= lr * gv[k];
  });
}

}  // namespace

TrainResult train_cmrm(const CaptionCorpus& corpus, const FeatureTable& features,
                       const CmrmConfig& config, const CaptionCorpus* heldout) {
  if (config.batch == 0) throw ValidationError("batch size must be at least 1");
  if (config.margin < 0.0) throw ValidationError("margin must be non-negative");
  if (!std::isfinite(config.lr) || config.lr < 0.0) throw ValidationError("lr must be finite and >= 0");
  require_aligned(corpus, features);

  CmrmParams params = init_cmrm_params(corpus.lexicon.vocab.size(), features.dim(), config);
  const std::vector<TripletSample> samples = samples_of(corpus);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config.seed, 1));

  TrainReport report;
  report.seed = config.seed;
  report.recall_k = config.recall_k;
  CmrmParams grad;
  std::vector<TripletSample> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double weighted = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch, ++batch_no) {
      const std::size_t n = std::min(config.batch, order.size() - begin);
      batch.clear();
      for (std::size_t k = 0; k < n; ++k) batch.push_back(samples[order[begin + k]]);
      const std::string where =
          "epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(batch_no + 1);
      double loss = 0.0;
      try {
        loss = triplet_objective(params, features, batch, config.margin, config.negatives, &grad).loss;
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at " + where);
      }
      if (!std::isfinite(loss)) throw NumericalError("non-finite loss at " + where);
      weighted += loss * static_cast<double>(n);
      sgd_step(params, grad, config.lr);
    }
    report.epoch_batch_loss.push_back(samples.empty() ? 0.0
                                                      : weighted / static_cast<double>(samples.size()));
    double eval = 0.0;
    try {
      eval = evaluate_loss(params, features, samples, config);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " after epoch " + std::to_string(epoch + 1));
    }
    if (!std::isfinite(eval)) {
      throw NumericalError("non-finite evaluation loss after epoch " + std::to_string(epoch + 1));
    }
    report.epoch_loss.push_back(eval);
  }

  JointEmbeddingIndex index;
  index.lexicon = corpus.lexicon;
  index.params = std::move(params);
  index.image_vecs = embed_all_images(features, index.params.image);
  index.margin = config.margin;
  index.default_threshold = config.default_threshold;
  index.seed = config.seed;
  if (heldout != nullptr) report.heldout_recall = recall_at_k(*heldout, index, config.recall_k);
  return {std::move(index), std::move(report)};
}

double recall_at_k(const CaptionCorpus& queries, const JointEmbeddingIndex& index, std::size_t k) {
  if (queries.pairs.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : queries.pairs) {
    const RankedImages ranked = retrieve_cmrm(p.sentence, index, -1.0, k);
    if (std::find(ranked.images.begin(), ranked.images.end(), p.image.image_id) !=
        ranked.images.end()) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(queries.pairs.size());
}

std::string TrainReport::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["epoch_loss"] = epoch_loss;
  j["epoch_batch_loss"] = epoch_batch_loss;
  j["recall_k"] = recall_k;
  j["heldout_recall"] = heldout_recall ? nlohmann::json(*heldout_recall) : nlohmann::json(nullptr);
  return j.dump();
}

std::vector<std::uint8_t> serialize_index(const JointEmbeddingIndex& index) {
  ByteWriter w;
  write_lexicon(w, index.lexicon);
  w.u64(index.seed);
  w.f64(index.margin);
  w.f64(index.default_threshold);
  w.matrix(index.params.text.token_table);
  w.matrix(index.params.text.proj);
  w.matrix(index.params.text.bias);
  w.matrix(index.params.image.proj);
  w.matrix(index.params.image.bias);
  w.matrix(index.image_vecs);
  return wrap_container(kIndexMagic, kIndexVersion, w.buffer());
}

JointEmbeddingIndex deserialize_index(const std::vector<std::uint8_t>& bytes) {
  const auto payload = unwrap_container(bytes, kIndexMagic, kIndexVersion);
  ByteReader r(payload);
  JointEmbeddingIndex index;
  index.lexicon = read_lexicon(r);
  index.seed = r.u64();
  index.margin = r.f64();
  index.default_threshold = r.f64();
  index.params.text.token_table = r.matrix();
  index.params.text.proj = r.matrix();
  index.params.text.bias = r.matrix();
  index.params.image.proj = r.matrix();
  index.params.image.bias = r.matrix();
  index.image_vecs = r.matrix();
  r.expect_end("UVRE payload");

  const auto& p = index.params;
  const std::size_t de = p.text.proj.cols();
  const bool shapes_ok = p.text.token_table.rows() == index.lexicon.vocab.size() &&
                         p.text.token_table.cols() == p.text.proj.rows() && p.text.bias.rows() == 1 &&
                         p.text.bias.cols() == de && p.image.proj.cols() == de &&
                         p.image.bias.rows() == 1 && p.image.bias.cols() == de &&
                         (index.image_vecs.rows() == 0 || index.image_vecs.cols() == de);
  if (!shapes_ok) throw LoadError("UVRE parameter shapes are inconsistent");
  if (!std::isfinite(index.margin) || index.margin < 0.0 || !(index.default_threshold >= -1.0) ||
      !(index.default_threshold <= 1.0)) {
    throw LoadError("UVRE margin or threshold out of range");
  }
  for (std::size_t i = 0; i < index.image_vecs.rows(); ++i) {
    const auto row = index.image_vecs.row(i);
    if (std::abs(std::sqrt(dot(row, row)) - 1.0) > 1e-9) {
      throw LoadError("UVRE image vector " + std::to_string(i + 1) + " is not unit norm");
    }
  }
  return index;
}

void save_index(const JointEmbeddingIndex& index, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_index(index));
}

JointEmbeddingIndex load_index(const std::filesystem::path& path) {
  return deserialize_index(read_file(path));
}

}  // namespace uvr
