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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uvr/tensor.hpp"

namespace uvr {

class ByteWriter;
class ByteReader;

using TokenId = std::uint32_t;
using ImageId = std::uint32_t;

/// Image id 0 addresses the all-zero blank feature row.
inline constexpr ImageId kBlankImage = 0;

struct Token {
  std::string surface;
  TokenId id = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

struct Sentence {
  std::int64_t sent_id = 0;
  std::vector<Token> tokens;
  std::string raw_text;

  bool empty() const { return tokens.empty(); }
  std::vector<TokenId> token_ids() const;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct ImageRef {
  ImageId image_id = 1;

  std::size_t feature_row() const { return image_id; }

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

/// Dense surface <-> id bijection, ids assigned in first-seen order.
class Vocabulary {
 public:
  TokenId intern(std::string_view surface);
  std::optional<TokenId> find(std::string_view surface) const;
  const std::string& surface(TokenId id) const;
  std::size_t size() const { return surfaces_.size(); }
  const std::vector<std::string>& surfaces() const { return surfaces_; }

  static Vocabulary from_surfaces(std::vector<std::string> surfaces);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.surfaces_ == b.surfaces_;
  }

 private:
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Set of lowercase stopwords; kept sorted for deterministic serialization.
class StopwordList {
 public:
  StopwordList() = default;
  explicit StopwordList(std::vector<std::string> words);

  bool contains(std::string_view word) const;
  const std::vector<std::string>& words() const { return words_; }
  std::size_t size() const { return words_.size(); }

  friend bool operator==(const StopwordList&, const StopwordList&) = default;

 private:
  std::vector<std::string> words_;
};

StopwordList load_stopwords(const std::filesystem::path& path);

/// Splits raw text into lowercase surface tokens.
using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

/// Default tokenizer: ASCII lowercasing and a split on Unicode whitespace.
std::vector<std::string> whitespace_tokenize(std::string_view text);

/// Vocabulary plus the stopword list it was built with. Artifacts carry one so
/// that queries are tokenized exactly like the build-time corpus.
struct Lexicon {
  Vocabulary vocab;
  StopwordList stopwords;

  friend bool operator==(const Lexicon&, const Lexicon&) = default;
};

void write_lexicon(ByteWriter& w, const Lexicon& lexicon);
Lexicon read_lexicon(ByteReader& r);

struct CorpusOptions {
  std::size_t max_len = 128;
  Tokenizer tokenizer = whitespace_tokenize;
};

/// One raw JSONL line.
struct CorpusRecord {
  std::int64_t id = 0;
  std::string text;
  std::int64_t image_id = 1;
};

struct CaptionPair {
  Sentence sentence;
  ImageRef image;
};

struct CaptionCorpus {
  std::vector<CaptionPair> pairs;
  Lexicon lexicon;
  /// Non-fatal notes collected while loading (empty texts, truncation).
  std::vector<std::string> warnings;

  std::size_t document_count() const { return pairs.size(); }
  ImageId max_image_id() const;
};

/// Parses `{"id":..,"text":..,"image_id":..}` lines. Blank lines are skipped.
/// Throws ParseError naming the 1-based line number, ValidationError when
/// image_id < 1.
std::vector<CorpusRecord> parse_corpus_jsonl(std::istream& in);

/// Tokenizes, filters stopwords and interns a vocabulary over the records.
CaptionCorpus build_corpus(std::span<const CorpusRecord> records, StopwordList stopwords,
                           const CorpusOptions& options = {});

CaptionCorpus load_corpus(const std::filesystem::path& path,
                          const std::filesystem::path& stopwords_path,
                          const CorpusOptions& options = {});

/// Reads more records against an existing lexicon (e.g. a held-out split).
/// Tokens missing from the vocabulary are dropped.
CaptionCorpus load_corpus_with_lexicon(const std::filesystem::path& path, const Lexicon& lexicon,
                                       const CorpusOptions& options = {});
CaptionCorpus build_corpus_with_lexicon(std::span<const CorpusRecord> records,
                                        const Lexicon& lexicon, const CorpusOptions& options = {});

/// Tokenizes a free-text query against a frozen lexicon. Stopwords and
/// out-of-vocabulary tokens are dropped, so the result may be empty.
Sentence encode_query(std::string_view text, const Lexicon& lexicon,
                      const CorpusOptions& options = {});

/// Image feature lookup table. Row 0 is the all-zero blank feature and row i
/// holds the feature of image id i.
class FeatureTable {
 public:
  FeatureTable() : data_(1, 0) {}

  /// Builds a table from the n_images x dim feature rows of ids 1..n_images.
  static FeatureTable from_image_rows(const Matrix& images);

  std::size_t n_rows() const { return data_.rows(); }
  std::size_t n_images() const { return data_.rows() - 1; }
  std::size_t dim() const { return data_.cols(); }
  std::span<const double> row(std::size_t r) const;
  const Matrix& matrix() const { return data_; }
  /// Rows 1..n_images as an n_images x dim matrix.
  Matrix image_rows() const;

  friend bool operator==(const FeatureTable&, const FeatureTable&) = default;

 private:
  explicit FeatureTable(Matrix data) : data_(std::move(data)) {}
  Matrix data_;
};

/// Reads the "UVRF" binary feature format (little-endian f32 payload).
FeatureTable load_features(const std::filesystem::path& path);
/// Writes the "UVRF" format; values are narrowed to f32.
void save_features(const FeatureTable& table, const std::filesystem::path& path);

/// Throws ValidationError if any pair references a row missing from features.
void require_aligned(const CaptionCorpus& corpus, const FeatureTable& features);

}  // namespace uvr
