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

#include "uvr/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>
#include "uvr/binary_io.hpp"
#include "uvr/error.hpp"

namespace uvr {

std::vector<TokenId> Sentence::token_ids() const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(t.id);
  return ids;
}

TokenId Vocabulary::intern(std::string_view surface) {
  std::string key(surface);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(surfaces_.size());
  ids_.emplace(key, id);
  surfaces_.push_back(std::move(key));
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view surface) const {
  if (auto it = ids_.find(std::string(surface)); it != ids_.end()) return it->second;
  return std::nullopt;
}

const std::string& Vocabulary::surface(TokenId id) const {
  if (id >= surfaces_.size()) throw ValidationError("token id " + std::to_string(id) + " out of range");
  return surfaces_[id];
}

Vocabulary Vocabulary::from_surfaces(std::vector<std::string> surfaces) {
  Vocabulary v;
  for (auto& s : surfaces) {
    const std::size_t before = v.size();
    v.intern(s);
    if (v.size() == before) throw ValidationError("duplicate vocabulary entry '" + s + "'");
  }
  return v;
}

StopwordList::StopwordList(std::vector<std::string> words) : words_(std::move(words)) {
  std::sort(words_.begin(), words_.end());
  words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
}

bool StopwordList::contains(std::string_view word) const {
  return std::binary_search(words_.begin(), words_.end(), word);
}

namespace {

/// Length in bytes of a Unicode whitespace sequence at s[i], or 0.
std::size_t whitespace_len(std::string_view s, std::size_t i) {
  const auto b = [&](std::size_t k) {
    return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0u;
  };
  const unsigned char c = b(0);
  if (c == ' ' || (c >= 0x09 && c <= 0x0D) || (c >= 0x1C && c <= 0x1F)) return 1;
  if (c == 0xC2 && (b(1) == 0x85 || b(1) == 0xA0)) return 2;
  if (c == 0xE1 && b(1) == 0x9A && b(2) == 0x80) return 3;
  if (c == 0xE2 && b(1) == 0x80 &&
      ((b(2) >= 0x80 && b(2) <= 0x8A) || b(2) == 0xA8 || b(2) == 0xA9 || b(2) == 0xAF)) {
    return 3;
  }
  if (c == 0xE2 && b(1) == 0x81 && b(2) == 0x9F) return 3;
  if (c == 0xE3 && b(1) == 0x80 && b(2) == 0x80) return 3;
  return 0;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  return out;
}

}  // namespace

std::vector<std::string> whitespace_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  std::size_t start = 0;
  while (i < text.size()) {
    if (const std::size_t ws = whitespace_len(text, i); ws > 0) {
      if (i > start) tokens.push_back(ascii_lower(text.substr(start, i - start)));
      i += ws;
      start = i;
    } else {
      ++i;
    }
  }
  if (i > start) tokens.push_back(ascii_lower(text.substr(start, i - start)));
  return tokens;
}

StopwordList load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open stopword list " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    for (auto& w : whitespace_tokenize(line)) words.push_back(std::move(w));
  }
  return StopwordList(std::move(words));
}

void write_lexicon(ByteWriter& w, const Lexicon& lexicon) {
  w.u64(lexicon.vocab.size());
  for (const auto& s : lexicon.vocab.surfaces()) w.string(s);
  w.u64(lexicon.stopwords.size());
  for (const auto& s : lexicon.stopwords.words()) w.string(s);
}

Lexicon read_lexicon(ByteReader& r) {
  const std::uint64_t n_vocab = r.u64();
  r.require(n_vocab, 4, "vocabulary");
  std::vector<std::string> surfaces;
  surfaces.reserve(n_vocab);
  for (std::uint64_t i = 0; i < n_vocab; ++i) surfaces.push_back(r.string());
  const std::uint64_t n_stop = r.u64();
  r.require(n_stop, 4, "stopwords");
  std::vector<std::string> stop;
  stop.reserve(n_stop);
  for (std::uint64_t i = 0; i < n_stop; ++i) stop.push_back(r.string());
  Lexicon lex;
  try {
    lex.vocab = Vocabulary::from_surfaces(std::move(surfaces));
  } catch (const ValidationError& e) {
    throw LoadError(e.what());
  }
  lex.stopwords = StopwordList(std::move(stop));
  return lex;
}

ImageId CaptionCorpus::max_image_id() const {
  ImageId m = 0;
  for (const auto& p : pairs) m = std::max(m, p.image.image_id);
  return m;
}

std::vector<CorpusRecord> parse_corpus_jsonl(std::istream& in) {
  std::vector<CorpusRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (whitespace_tokenize(line).empty()) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw ParseError(where + "expected a JSON object");
    for (const char* field : {"id", "text", "image_id"}) {
      if (!j.contains(field)) throw ParseError(where + "missing field '" + field + "'");
    }
    if (!j["id"].is_number_integer()) throw ParseError(where + "'id' must be an integer");
    if (!j["text"].is_string()) throw ParseError(where + "'text' must be a string");
    if (!j["image_id"].is_number_integer()) {
      throw ParseError(where + "'image_id' must be an integer");
    }
    CorpusRecord rec;
    rec.id = j["id"].get<std::int64_t>();
    rec.text = j["text"].get<std::string>();
    rec.image_id = j["image_id"].get<std::int64_t>();
    if (rec.image_id < 1 || rec.image_id > std::numeric_limits<ImageId>::max()) {
      throw ValidationError(where + "image_id must be >= 1, got " + std::to_string(rec.image_id));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

using Resolver = std::function<std::optional<TokenId>(const std::string&)>;

/// Shared tokenization path. Surfaces the resolver rejects are dropped.
Sentence make_sentence(std::int64_t sent_id, std::string_view text, const Resolver& resolve,
                       const StopwordList& stopwords, const CorpusOptions& options,
                       std::vector<std::string>* warnings) {
  Sentence s;
  s.sent_id = sent_id;
  s.raw_text = std::string(text);
  std::size_t dropped = 0;
  for (auto& surface : options.tokenizer(text)) {
    if (stopwords.contains(surface)) continue;
    if (s.tokens.size() == options.max_len) {
      ++dropped;
      continue;
    }
    const std::optional<TokenId> id = resolve(surface);
    if (!id) continue;
    s.tokens.push_back({std::move(surface), *id});
  }
  if (dropped > 0 && warnings != nullptr) {
    warnings->push_back("sentence " + std::to_string(sent_id) + " truncated to " +
                        std::to_string(options.max_len) + " tokens (" + std::to_string(dropped) +
                        " dropped)");
  }
  return s;
}

CaptionCorpus assemble(std::span<const CorpusRecord> records, Lexicon lexicon, bool grow,
                       const CorpusOptions& options) {
  CaptionCorpus corpus;
  corpus.lexicon = std::move(lexicon);
  corpus.pairs.reserve(records.size());
  for (const auto& rec : records) {
    if (rec.image_id < 1) {
      throw ValidationError("record " + std::to_string(rec.id) + ": image_id must be >= 1");
    }
    if (rec.text.empty()) {
      corpus.warnings.push_back("sentence " + std::to_string(rec.id) + " has empty text");
    }
    Vocabulary& vocab = corpus.lexicon.vocab;
    const Resolver resolve = [&vocab, grow](const std::string& surface) -> std::optional<TokenId> {
      if (grow) return vocab.intern(surface);
      return vocab.find(surface);
    };
    Sentence s = make_sentence(rec.id, rec.text, resolve, corpus.lexicon.stopwords, options,
                               &corpus.warnings);
    corpus.pairs.push_back({std::move(s), ImageRef{static_cast<ImageId>(rec.image_id)}});
  }
  return corpus;
}

std::vector<CorpusRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open corpus " + path.string());
  return parse_corpus_jsonl(in);
}

}  // namespace

CaptionCorpus build_corpus(std::span<const CorpusRecord> records, StopwordList stopwords,
                           const CorpusOptions& options) {
  return assemble(records, Lexicon{Vocabulary{}, std::move(stopwords)}, true, options);
}

CaptionCorpus build_corpus_with_lexicon(std::span<const CorpusRecord> records,
                                        const Lexicon& lexicon, const CorpusOptions& options) {
  return assemble(records, lexicon, false, options);
}

CaptionCorpus load_corpus(const std::filesystem::path& path,
                          const std::filesystem::path& stopwords_path,
                          const CorpusOptions& options) {
  StopwordList stopwords = stopwords_path.empty() ? StopwordList{} : load_stopwords(stopwords_path);
  const auto records = read_records(path);
  return build_corpus(records, std::move(stopwords), options);
}

CaptionCorpus load_corpus_with_lexicon(const std::filesystem::path& path, const Lexicon& lexicon,
                                       const CorpusOptions& options) {
  const auto records = read_records(path);
  return build_corpus_with_lexicon(records, lexicon, options);
}

Sentence encode_query(std::string_view text, const Lexicon& lexicon, const CorpusOptions& options) {
  const Resolver resolve = [&lexicon](const std::string& surface) {
    return lexicon.vocab.find(surface);
  };
  return make_sentence(0, text, resolve, lexicon.stopwords, options, nullptr);
}

FeatureTable FeatureTable::from_image_rows(const Matrix& images) {
  require_finite(images, "feature table");
  const std::size_t dim = images.cols();
  Matrix data(images.rows() + 1, dim);
  std::copy(images.values().begin(), images.values().end(), data.values().begin() + dim);
  return FeatureTable(std::move(data));
}

std::span<const double> FeatureTable::row(std::size_t r) const {
  if (r >= data_.rows()) {
    throw ValidationError("feature row " + std::to_string(r) + " out of range (table has " +
                          std::to_string(data_.rows()) + " rows)");
  }
  return data_.row(r);
}

Matrix FeatureTable::image_rows() const { return slice_rows(data_, 1, data_.rows() - 1); }

namespace {
constexpr std::string_view kFeatureMagic = "UVRF";
constexpr std::uint32_t kFeatureVersion = 1;
}  // namespace

FeatureTable load_features(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != kFeatureMagic) {
    throw LoadError(path.string() + ": not a UVRF feature file (magic mismatch)");
  }
  const std::uint32_t version = r.u32();
  if (version != kFeatureVersion) {
    throw IncompatibleVersionError(path.string() + ": UVRF version " + std::to_string(version) +
                                   " is not supported");
  }
  const std::uint64_t n_images = r.u64();
  const std::uint64_t dim = r.u64();
  if (dim == 0) throw LoadError(path.string() + ": feature dimension must be positive");
  if (n_images > std::numeric_limits<std::uint64_t>::max() / dim) {
    throw LoadError(path.string() + ": header dimensions overflow");
  }
  r.require(n_images * dim, 4, "UVRF payload");
  std::vector<double> values(n_images * dim);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = r.f32();
    if (!std::isfinite(v)) {
      throw LoadError(path.string() + ": non-finite value at image " +
                      std::to_string(i / dim + 1) + ", column " + std::to_string(i % dim));
    }
    values[i] = static_cast<double>(v);
  }
  r.expect_end("UVRF payload");
  return FeatureTable::from_image_rows(Matrix(n_images, dim, std::move(values)));
}

void save_features(const FeatureTable& table, const std::filesystem::path& path) {
  ByteWriter w;
  w.bytes(kFeatureMagic);
  w.u32(kFeatureVersion);
  w.u64(table.n_images());
  w.u64(table.dim());
  for (std::size_t r = 1; r < table.n_rows(); ++r) {
    for (double v : table.row(r)) w.f32(static_cast<float>(v));
  }
  write_file_atomic(path, w.buffer());
}

void require_aligned(const CaptionCorpus& corpus, const FeatureTable& features) {
  for (const auto& p : corpus.pairs) {
    if (p.image.feature_row() >= features.n_rows()) {
      throw ValidationError("sentence " + std::to_string(p.sentence.sent_id) +
                            " references image " + std::to_string(p.image.image_id) +
                            " but the feature table has " + std::to_string(features.n_images()) +
                            " images");
    }
  }
}

}  // namespace uvr
