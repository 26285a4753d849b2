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
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "uvr/corpus.hpp"
#include "uvr/tensor.hpp"
#include "uvr/tilt.hpp"

namespace uvr {

/// Text path: mean of token embeddings, affine projection, L2 normalization.
struct TextEmbedParams {
  Matrix token_table;  // V x d_t
  Matrix proj;         // d_t x d_e
  Matrix bias;         // 1 x d_e

  template <typename F>
  void for_each_tensor(F&& f) {
    f("text.token_table", token_table);
    f("text.proj", proj);
    f("text.bias", bias);
  }

  friend bool operator==(const TextEmbedParams&, const TextEmbedParams&) = default;
};

/// Image path: affine projection of an ingested feature, L2 normalization.
struct ImageEmbedParams {
  Matrix proj;  // d_m x d_e
  Matrix bias;  // 1 x d_e

  template <typename F>
  void for_each_tensor(F&& f) {
    f("image.proj", proj);
    f("image.bias", bias);
  }

  friend bool operator==(const ImageEmbedParams&, const ImageEmbedParams&) = default;
};

struct CmrmParams {
  TextEmbedParams text;
  ImageEmbedParams image;

  std::size_t embed_dim() const { return text.proj.cols(); }

  template <typename F>
  void for_each_tensor(F&& f) {
    text.for_each_tensor(f);
    image.for_each_tensor(f);
  }

  friend bool operator==(const CmrmParams&, const CmrmParams&) = default;
};

/// 1 x d_e unit vector. Throws ValidationError on an empty sentence and
/// NumericalError when the projection is exactly zero.
Matrix embed_text(const Sentence& sentence, const TextEmbedParams& params);
Matrix embed_image(std::span<const double> feature, const ImageEmbedParams& params);

/// max(0, margin - x.y + x.z)
double triplet_loss(std::span<const double> x, std::span<const double> y,
                    std::span<const double> z, double margin);

/// Trained joint space plus the unit-norm embedding of every indexed image.
/// Row i - 1 of `image_vecs` belongs to image id i.
struct JointEmbeddingIndex {
  Lexicon lexicon;
  CmrmParams params;
  Matrix image_vecs;
  double margin = 0.2;
  double default_threshold = 0.4;
  std::uint64_t seed = 0;

  std::size_t n_images() const { return image_vecs.rows(); }
  std::span<const double> image_vec(ImageId id) const { return image_vecs.row(id - 1); }
};

/// Embeds every image of the feature table with the given parameters.
Matrix embed_all_images(const FeatureTable& features, const ImageEmbedParams& params);

/// Most similar image outside `excluded`; ties go to the lowest id.
/// Throws ValidationError when every image is excluded.
ImageId mine_hard_negative(std::span<const double> text_vec, const std::set<ImageId>& excluded,
                           const JointEmbeddingIndex& index);

/// Cosine retrieval: keep similarities >= threshold, order by (sim desc, id
/// asc), keep m. Empty survivors or an empty sentence give the blank sentinel.
RankedImages retrieve_cmrm(const Sentence& sentence, const JointEmbeddingIndex& index,
                           double threshold, std::size_t m);

enum class NegativeScope { kBatch, kGlobal };

struct CmrmConfig {
  std::size_t epochs = 50;
  double lr = 0.5;
  double margin = 0.2;
  std::size_t batch = 16;
  std::uint64_t seed = 42;
  std::size_t text_dim = 32;
  std::size_t embed_dim = 64;
  double init_range = 0.1;
  NegativeScope negatives = NegativeScope::kBatch;
  double default_threshold = 0.4;
  std::size_t recall_k = 5;
};

CmrmParams init_cmrm_params(std::size_t vocab_size, std::size_t feature_dim,
                            const CmrmConfig& config);

struct TripletSample {
  const Sentence* sentence = nullptr;
  ImageId positive = 1;
};

struct ObjectiveResult {
  double loss = 0.0;
  /// Smallest |margin - x.y + x.z| over the scored samples; gradient checks
  /// skip fixtures that sit on the hinge.
  double kink_distance = 0.0;
  /// Smallest similarity gap between the mined negative and the runner-up.
  double mining_gap = 0.0;
};

/// Mean triplet loss of a batch with hard negatives mined under `params`.
/// When `grad` is non-null it receives the analytic gradient (same shapes as
/// params, zero-initialized by the callee). Samples without any eligible
/// negative contribute zero.
ObjectiveResult triplet_objective(const CmrmParams& params, const FeatureTable& features,
                                  std::span<const TripletSample> batch, double margin,
                                  NegativeScope scope, CmrmParams* grad = nullptr);

struct TrainReport {
  std::uint64_t seed = 0;
  /// Mean loss over the whole training set after each epoch, evaluated on the
  /// fixed corpus-order batch partition.
  std::vector<double> epoch_loss;
  /// Mean of the mini-batch losses seen while training each epoch.
  std::vector<double> epoch_batch_loss;
  std::size_t recall_k = 5;
  std::optional<double> heldout_recall;

  std::string to_json() const;
};

struct TrainResult {
  JointEmbeddingIndex index;
  TrainReport report;
};

/// Plain SGD on the mean triplet loss. Deterministic for a fixed seed.
/// Throws NumericalError naming the epoch and batch if the loss goes non-finite.
TrainResult train_cmrm(const CaptionCorpus& corpus, const FeatureTable& features,
                       const CmrmConfig& config, const CaptionCorpus* heldout = nullptr);

/// Fraction of pairs whose image appears among the top-k cosine matches.
double recall_at_k(const CaptionCorpus& queries, const JointEmbeddingIndex& index, std::size_t k);

std::vector<std::uint8_t> serialize_index(const JointEmbeddingIndex& index);
JointEmbeddingIndex deserialize_index(const std::vector<std::uint8_t>& bytes);
void save_index(const JointEmbeddingIndex& index, const std::filesystem::path& path);
JointEmbeddingIndex load_index(const std::filesystem::path& path);

}  // namespace uvr
