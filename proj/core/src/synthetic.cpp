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

#include "uvr/synthetic.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>
#include "uvr/error.hpp"
#include "uvr/rng.hpp"

namespace uvr {

namespace {

constexpr std::array<std::array<const char*, 2>, 10> kNouns = {{
    {"dog", "puppy"}, {"cat", "kitten"}, {"car", "automobile"}, {"horse", "pony"},
    {"bird", "sparrow"}, {"boat", "ship"}, {"tree", "oak"}, {"house", "cottage"},
    {"bike", "bicycle"}, {"child", "kid"},
}};
constexpr std::array<const char*, 5> kColours = {"red", "blue", "green", "yellow", "white"};
constexpr std::array<const char*, 4> kSizes = {"tiny", "small", "large", "huge"};
constexpr std::array<const char*, 10> kFillers = {"photo", "picture", "scene", "shot",   "view",
                                                  "image", "outdoors", "today", "nice", "pretty"};
constexpr std::array<const char*, 10> kStopwords = {"a",  "an", "the",  "of",   "in",
                                                    "on", "is", "with", "this", "that"};

Matrix random_direction(std::size_t dim, double norm, Rng& rng) {
  Matrix v(1, dim);
  double sq = 0.0;
  for (double& x : v.values()) {
    x = rng.normal();
    sq += x * x;
  }
  const double s = norm / std::sqrt(sq);
  for (double& x : v.values()) x *= s;
  return v;
}

std::string noun_for(std::size_t topic, std::size_t variant) {
  if (topic < kNouns.size()) return kNouns[topic][variant % 2];
  return "topic" + std::to_string(topic) + (variant % 2 == 0 ? "a" : "b");
}

}  // namespace

PlantedCorpus make_planted_corpus(const PlantedCorpusShape& shape) {
  if (shape.topics == 0 || shape.per_topic == 0 || shape.feature_dim == 0) {
    throw ValidationError("planted corpus dimensions must be positive");
  }
  if (shape.per_topic > kColours.size() * kSizes.size()) {
    throw ValidationError("planted corpus supports at most " +
                          std::to_string(kColours.size() * kSizes.size()) + " images per topic");
  }
  Rng rng(shape.seed);
  std::vector<Matrix> centroids;
  for (std::size_t t = 0; t < shape.topics; ++t) {
    centroids.push_back(random_direction(shape.feature_dim, shape.centroid_norm, rng));
  }
  std::vector<Matrix> colours, sizes;
  for (std::size_t c = 0; c < kColours.size(); ++c) {
    colours.push_back(random_direction(shape.feature_dim, shape.attribute_norm, rng));
  }
  for (std::size_t s = 0; s < kSizes.size(); ++s) {
    sizes.push_back(random_direction(shape.feature_dim, shape.attribute_norm, rng));
  }

  PlantedCorpus out;
  const std::size_t n_images = shape.topics * shape.per_topic;
  Matrix rows(n_images, shape.feature_dim);
  out.topic_of_image.assign(n_images + 1, 0);
  auto filler = [&rng]() { return std::string(kFillers[rng.below(kFillers.size())]); };

  for (std::size_t t = 0; t < shape.topics; ++t) {
    for (std::size_t j = 0; j < shape.per_topic; ++j) {
      const std::size_t idx = t * shape.per_topic + j;
      const auto image_id = static_cast<std::int64_t>(idx + 1);
      const std::size_t colour = j % kColours.size();
      const std::size_t size = j / kColours.size();
      out.topic_of_image[idx + 1] = t;
      for (std::size_t k = 0; k < shape.feature_dim; ++k) {
        const double v = centroids[t](0, k) + colours[colour](0, k) + sizes[size](0, k) +
                         shape.noise * rng.normal();
        rows(idx, k) = static_cast<double>(static_cast<float>(v));
      }
      const std::string c = kColours[colour];
      const std::string s = kSizes[size];
      out.train.push_back({image_id,
                           "A " + s + " " + c + " " + noun_for(t, j) + " in the " + filler(),
                           image_id});
      out.heldout.push_back({image_id,
                             "The " + c + " " + noun_for(t, j + 1) + " is " + s + " " + filler() +
                                 " " + filler(),
                             image_id});
    }
  }
  out.features = FeatureTable::from_image_rows(rows);
  out.stopwords = StopwordList({kStopwords.begin(), kStopwords.end()});
  return out;
}

void write_planted_corpus(const PlantedCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write_jsonl = [](const std::vector<CorpusRecord>& records, const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw LoadError("cannot write " + p.string());
    for (const auto& r : records) {
      nlohmann::ordered_json j;
      j["id"] = r.id;
      j["text"] = r.text;
      j["image_id"] = r.image_id;
      out << j.dump() << '\n';
    }
  };
  write_jsonl(corpus.train, dir / "corpus.jsonl");
  write_jsonl(corpus.heldout, dir / "heldout.jsonl");
  {
    std::ofstream out(dir / "stopwords.txt", std::ios::trunc);
    for (const auto& w : corpus.stopwords.words()) out << w << '\n';
  }
  save_features(corpus.features, dir / "features.uvrf");
}

}  // namespace uvr
