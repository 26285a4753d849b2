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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "uvr/corpus.hpp"

namespace uvr {

struct TopicScore {
  TokenId token = 0;
  double score = 0.0;

  friend bool operator==(const TopicScore&, const TopicScore&) = default;
};

/// TF-IDF statistics of a corpus where every sentence is one document.
///
/// `scores[j]` lists the TI value of every distinct token of document j in
/// ascending token order. Loaded artifacts carry only `df` and the document
/// count; per-document scores exist only on freshly built dictionaries.
struct TfIdfDictionary {
  std::size_t document_count = 0;
  std::vector<std::uint64_t> df;  // indexed by token id
  std::vector<std::vector<TopicScore>> scores;

  std::uint64_t doc_freq(TokenId t) const { return t < df.size() ? df[t] : 0; }
};

/// TI = (o / sum_k o_k) * ln(|G| / (1 + df)).
inline double tfidf_value(std::uint64_t occurrences, std::uint64_t doc_length,
                          std::size_t document_count, std::uint64_t doc_freq) {
  return (static_cast<double>(occurrences) / static_cast<double>(doc_length)) *
         std::log(static_cast<double>(document_count) / (1.0 + static_cast<double>(doc_freq)));
}

TfIdfDictionary compute_tfidf(const CaptionCorpus& corpus);

/// Scores every distinct token of `sentence` as a new document against the
/// dictionary's frozen df statistics. Ascending token order.
std::vector<TopicScore> score_sentence(const Sentence& sentence, const TfIdfDictionary& dict);

struct TopicList {
  std::vector<TokenId> topics;
  std::size_t w = 8;
};

/// Top-w distinct tokens by TI, ties broken by ascending token id.
TopicList topic_words(const Sentence& sentence, const TfIdfDictionary& dict, std::size_t w);

/// Inverted index topic token -> distinct image ids in corpus order.
struct TopicImageTable {
  std::map<TokenId, std::vector<ImageId>> index;
  std::size_t w = 8;

  const std::vector<ImageId>* images_for(TokenId t) const;
  std::size_t topic_count() const { return index.size(); }
  double mean_images_per_topic() const;

  friend bool operator==(const TopicImageTable&, const TopicImageTable&) = default;
};

TopicImageTable build_table(const CaptionCorpus& corpus, const TfIdfDictionary& dict,
                            std::size_t w);

/// Ranked retrieval result shared by both retrievers.
///
/// `scores` parallels `images`: occurrence counts for the lookup table, cosine
/// similarities for the embedding index. A result of exactly [0] is the blank
/// sentinel.
struct RankedImages {
  std::vector<ImageId> images;
  std::vector<double> scores;
  std::size_t m = 0;

  static RankedImages blank(std::size_t m) { return {{kBlankImage}, {0.0}, m}; }
  bool is_blank() const { return images.size() == 1 && images.front() == kBlankImage; }

  friend bool operator==(const RankedImages&, const RankedImages&) = default;
};

/// Gathers the image lists of the query's topic words and returns the m most
/// frequent images (count desc, id asc), or the blank sentinel.
RankedImages retrieve_tilt(const Sentence& sentence, const TopicImageTable& table,
                           const TfIdfDictionary& dict, std::size_t w, std::size_t m);

/// Everything needed to answer lookup-table queries from raw text.
struct TiltArtifact {
  Lexicon lexicon;
  TfIdfDictionary dict;
  TopicImageTable table;
};

TiltArtifact build_tilt(const CaptionCorpus& corpus, std::size_t w);

std::vector<std::uint8_t> serialize_tilt(const TiltArtifact& artifact);
TiltArtifact deserialize_tilt(const std::vector<std::uint8_t>& bytes);
void save_table(const TiltArtifact& artifact, const std::filesystem::path& path);
TiltArtifact load_table(const std::filesystem::path& path);

}  // namespace uvr
