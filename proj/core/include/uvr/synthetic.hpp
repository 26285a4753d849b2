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
#include <vector>

#include "uvr/corpus.hpp"

namespace uvr {

/// Shape of a planted caption corpus: `topics` x `per_topic` images, one
/// training caption and one held-out caption per image. Each image within a
/// topic has a distinct (colour, size) attribute pair that its captions name
/// and its feature encodes on top of the topic centroid.
struct PlantedCorpusShape {
  std::size_t topics = 10;
  std::size_t per_topic = 20;
  std::size_t feature_dim = 48;
  double centroid_norm = 3.0;
  double attribute_norm = 1.5;
  double noise = 0.1;
  std::uint64_t seed = 2024;
};

struct PlantedCorpus {
  std::vector<CorpusRecord> train;
  std::vector<CorpusRecord> heldout;
  StopwordList stopwords;
  FeatureTable features;
  std::vector<std::size_t> topic_of_image;  // indexed by image id; [0] unused
};

/// Feature values are rounded to f32 so the in-memory table equals one read
/// back from disk.
PlantedCorpus make_planted_corpus(const PlantedCorpusShape& shape = {});

/// Writes corpus.jsonl, heldout.jsonl, stopwords.txt and features.uvrf.
void write_planted_corpus(const PlantedCorpus& corpus, const std::filesystem::path& dir);

}  // namespace uvr
