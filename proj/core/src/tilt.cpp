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

#include "uvr/tilt.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "uvr/binary_io.hpp"
#include "uvr/error.hpp"

namespace uvr {

namespace {

constexpr Magic kTiltMagic = {'U', 'V', 'R', 'T'};
constexpr std::uint32_t kTiltVersion = 1;

/// (token, occurrences) for each distinct token, ascending token id.
std::vector<std::pair<TokenId, std::uint64_t>> count_tokens(const Sentence& s) {
  std::map<TokenId, std::uint64_t> counts;
  for (const auto& t : s.tokens) ++counts[t.id];
  return {counts.begin(), counts.end()};
}

std::vector<TopicScore> score_counts(const std::vector<std::pair<TokenId, std::uint64_t>>& counts,
                                     std::uint64_t length, const TfIdfDictionary& dict) {
  std::vector<TopicScore> out;
  out.reserve(counts.size());
  for (const auto& [token, occ] : counts) {
    out.push_back({token, tfidf_value(occ, length, dict.document_count, dict.doc_freq(token))});
  }
  return out;
}

}  // namespace

TfIdfDictionary compute_tfidf(const CaptionCorpus& corpus) {
  TfIdfDictionary dict;
  dict.document_count = corpus.document_count();
  dict.df.assign(corpus.lexicon.vocab.size(), 0);
  std::vector<std::vector<std::pair<TokenId, std::uint64_t>>> per_doc;
  per_doc.reserve(corpus.pairs.size());
  for (const auto& pair : corpus.pairs) {
    auto counts = count_tokens(pair.sentence);
    for (const auto& [token, occ] : counts) {
      if (token >= dict.df.size()) dict.df.resize(token + 1, 0);
      ++dict.df[token];
    }
    per_doc.push_back(std::move(counts));
  }
  dict.scores.reserve(per_doc.size());
  for (std::size_t j = 0; j < per_doc.size(); ++j) {
    dict.scores.push_back(score_counts(per_doc[j], corpus.pairs[j].sentence.tokens.size(), dict));
  }
  return dict;
}

std::vector<TopicScore> score_sentence(const Sentence& sentence, const TfIdfDictionary& dict) {
  return score_counts(count_tokens(sentence), sentence.tokens.size(), dict);
}

TopicList topic_words(const Sentence& sentence, const TfIdfDictionary& dict, std::size_t w) {
  if (w == 0) throw ValidationError("topic budget w must be at least 1");
  auto scored = score_sentence(sentence, dict);
  std::stable_sort(scored.begin(), scored.end(), [](const TopicScore& a, const TopicScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.token < b.token;
  });
  TopicList list;
  list.w = w;
  for (std::size_t i = 0; i < scored.size() && i < w; ++i) list.topics.push_back(scored[i].token);
  return list;
}

const std::vector<ImageId>* TopicImageTable::images_for(TokenId t) const {
  auto it = index.find(t);
  return it == index.end() ? nullptr : &it->second;
}

double TopicImageTable::mean_images_per_topic() const {
  if (index.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& [token, images] : index) total += images.size();
  return static_cast<double>(total) / static_cast<double>(index.size());
}

TopicImageTable build_table(const CaptionCorpus& corpus, const TfIdfDictionary& dict,
                            std::size_t w) {
  TopicImageTable table;
  table.w = w;
  std::map<TokenId, std::unordered_set<ImageId>> seen;
  for (const auto& pair : corpus.pairs) {
    const ImageId image = pair.image.image_id;
    for (TokenId topic : topic_words(pair.sentence, dict, w).topics) {
      if (seen[topic].insert(image).second) table.index[topic].push_back(image);
    }
  }
  return table;
}

RankedImages retrieve_tilt(const Sentence& sentence, const TopicImageTable& table,
                           const TfIdfDictionary& dict, std::size_t w, std::size_t m) {
  if (m == 0) throw ValidationError("retrieval budget m must be at least 1");
  std::map<ImageId, std::size_t> counts;
  for (TokenId topic : topic_words(sentence, dict, w).topics) {
    if (const auto* images = table.images_for(topic)) {
      for (ImageId id : *images) ++counts[id];
    }
  }
  if (counts.empty()) return RankedImages::blank(m);

  std::vector<std::pair<ImageId, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is keyed by id, so a stable sort on count alone keeps ids ascending.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  RankedImages out;
  out.m = m;
  for (std::size_t i = 0; i < ranked.size() && i < m; ++i) {
    out.images.push_back(ranked[i].first);
    out.scores.push_back(static_cast<double>(ranked[i].second));
  }
  return out;
}

TiltArtifact build_tilt(const CaptionCorpus& corpus, std::size_t w) {
  TiltArtifact artifact;
  artifact.lexicon = corpus.lexicon;
  artifact.dict = compute_tfidf(corpus);
  artifact.table = build_table(corpus, artifact.dict, w);
  return artifact;
}

std::vector<std::uint8_t> serialize_tilt(const TiltArtifact& artifact) {
  const auto& dict = artifact.dict;
  const std::size_t vocab = artifact.lexicon.vocab.size();
  if (dict.df.size() > vocab) throw ValidationError("df table larger than vocabulary");
  ByteWriter w;
  write_lexicon(w, artifact.lexicon);
  w.u64(dict.document_count);
  w.u64(vocab);
  for (std::size_t t = 0; t < vocab; ++t) w.u64(dict.doc_freq(static_cast<TokenId>(t)));
  w.u64(artifact.table.w);
  w.u64(artifact.table.index.size());
  for (const auto& [token, images] : artifact.table.index) {
    if (token >= vocab) throw ValidationError("table topic outside vocabulary");
    w.u32(token);
    w.u64(images.size());
    for (ImageId id : images) w.u32(id);
  }
  return wrap_container(kTiltMagic, kTiltVersion, w.buffer());
}

TiltArtifact deserialize_tilt(const std::vector<std::uint8_t>& bytes) {
  const auto payload = unwrap_container(bytes, kTiltMagic, kTiltVersion);
  ByteReader r(payload);
  TiltArtifact a;
  a.lexicon = read_lexicon(r);
  a.dict.document_count = r.u64();
  const std::uint64_t n_df = r.u64();
  if (n_df != a.lexicon.vocab.size()) throw LoadError("df count does not match vocabulary");
  r.require(n_df, 8, "document frequencies");
  a.dict.df.resize(n_df);
  for (auto& df : a.dict.df) {
    df = r.u64();
    if (df > a.dict.document_count) throw LoadError("document frequency exceeds document count");
  }
  a.table.w = r.u64();
  if (a.table.w == 0) throw LoadError("topic budget w must be at least 1");
  const std::uint64_t n_topics = r.u64();
  r.require(n_topics, 12, "topic index");
  for (std::uint64_t i = 0; i < n_topics; ++i) {
    const TokenId token = r.u32();
    if (token >= n_df) throw LoadError("topic token outside vocabulary");
    if (!a.table.index.empty() && token <= a.table.index.rbegin()->first) {
      throw LoadError("topic index not in ascending token order");
    }
    const std::uint64_t n = r.u64();
    r.require(n, 4, "topic image list");
    std::vector<ImageId> images(n);
    std::unordered_set<ImageId> distinct;
    for (auto& id : images) {
      id = r.u32();
      if (id == kBlankImage || !distinct.insert(id).second) {
        throw LoadError("topic image list holds a blank or duplicate id");
      }
    }
    a.table.index.emplace(token, std::move(images));
  }
  r.expect_end("UVRT payload");
  return a;
}

void save_table(const TiltArtifact& artifact, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_tilt(artifact));
}

TiltArtifact load_table(const std::filesystem::path& path) {
  return deserialize_tilt(read_file(path));
}

}  // namespace uvr
