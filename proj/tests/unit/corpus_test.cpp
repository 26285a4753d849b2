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

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "uvr/binary_io.hpp"
#include "uvr/corpus.hpp"
#include "uvr/error.hpp"

namespace uvr {
namespace {

using testing::TempDir;

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::vector<std::string> surfaces(const Sentence& s) {
  std::vector<std::string> out;
  for (const auto& t : s.tokens) out.push_back(t.surface);
  return out;
}

TEST(LoadCorpus, StopwordsAndLowercase) {
  TempDir dir("corpus");
  write_text(dir / "c.jsonl", R"({"id":1,"text":"A dog in the park","image_id":7})" "\n");
  write_text(dir / "s.txt", "a\nin\nthe\n");
  const CaptionCorpus c = load_corpus(dir / "c.jsonl", dir / "s.txt");
  ASSERT_EQ(c.pairs.size(), 1u);
  EXPECT_EQ(surfaces(c.pairs[0].sentence), (std::vector<std::string>{"dog", "park"}));
  EXPECT_EQ(c.pairs[0].image.image_id, 7u);
  EXPECT_EQ(c.pairs[0].image.feature_row(), 7u);
  EXPECT_EQ(c.pairs[0].sentence.raw_text, "A dog in the park");
  EXPECT_EQ(c.document_count(), 1u);
}

TEST(LoadCorpus, VocabularyInFirstOccurrenceOrder) {
  std::istringstream in(R"({"id":1,"text":"b a","image_id":1}
{"id":2,"text":"c b","image_id":2}
)");
  const auto c = build_corpus(parse_corpus_jsonl(in), StopwordList{});
  EXPECT_EQ(c.lexicon.vocab.surfaces(), (std::vector<std::string>{"b", "a", "c"}));
  EXPECT_EQ(c.pairs[1].sentence.token_ids(), (std::vector<TokenId>{2, 0}));
}

TEST(LoadCorpus, EmptyTextAcceptedWithWarning) {
  std::istringstream in(R"({"id":1,"text":"","image_id":3})" "\n");
  const auto c = build_corpus(parse_corpus_jsonl(in), StopwordList{});
  ASSERT_EQ(c.pairs.size(), 1u);
  EXPECT_TRUE(c.pairs[0].sentence.empty());
  EXPECT_FALSE(c.warnings.empty());
}

TEST(LoadCorpus, DuplicateSentIdsAccepted) {
  std::istringstream in(R"({"id":5,"text":"x","image_id":1}
{"id":5,"text":"y","image_id":2}
)");
  const auto c = build_corpus(parse_corpus_jsonl(in), StopwordList{});
  ASSERT_EQ(c.pairs.size(), 2u);
  EXPECT_EQ(c.pairs[0].sentence.sent_id, 5);
  EXPECT_EQ(c.pairs[1].sentence.sent_id, 5);
}

TEST(LoadCorpus, MalformedLineNamesLineNumber) {
  std::istringstream in(R"({"id":1,"text":"ok","image_id":1}

{"id":2,"text":
)");
  try {
    parse_corpus_jsonl(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  std::istringstream missing(R"({"id":1,"image_id":1})" "\n");
  EXPECT_THROW(parse_corpus_jsonl(missing), ParseError);
}

TEST(LoadCorpus, ImageIdBelowOneRejected) {
  std::istringstream zero(R"({"id":1,"text":"x","image_id":0})" "\n");
  EXPECT_THROW(parse_corpus_jsonl(zero), ValidationError);
  std::istringstream negative(R"({"id":1,"text":"x","image_id":-4})" "\n");
  EXPECT_THROW(parse_corpus_jsonl(negative), ValidationError);
}

TEST(LoadCorpus, TruncatesAtMaxLen) {
  std::istringstream in(R"({"id":1,"text":"a b c d e","image_id":1})" "\n");
  CorpusOptions o;
  o.max_len = 3;
  const auto c = build_corpus(parse_corpus_jsonl(in), StopwordList{}, o);
  EXPECT_EQ(c.pairs[0].sentence.tokens.size(), 3u);
  EXPECT_EQ(c.lexicon.vocab.size(), 3u);
  EXPECT_FALSE(c.warnings.empty());
}

TEST(LoadCorpus, StableIdsUnderReload) {
  TempDir dir("reload");
  write_text(dir / "c.jsonl", R"({"id":1,"text":"red fox","image_id":1}
{"id":2,"text":"blue fox jumps","image_id":2}
)");
  const auto a = load_corpus(dir / "c.jsonl", "");
  const auto b = load_corpus(dir / "c.jsonl", "");
  EXPECT_EQ(a.lexicon, b.lexicon);
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    EXPECT_EQ(a.pairs[i].sentence, b.pairs[i].sentence);
  }
}

TEST(Tokenizer, UnicodeWhitespaceAndPurity) {
  const auto t = whitespace_tokenize("Hello World\tFOO　bar baz\n");
  EXPECT_EQ(t, (std::vector<std::string>{"hello", "world", "foo", "bar", "baz"}));
  EXPECT_EQ(whitespace_tokenize("A  b"), whitespace_tokenize("A  b"));
  EXPECT_TRUE(whitespace_tokenize("   ").empty());
}

TEST(Tokenizer, PluggableSeam) {
  std::istringstream in(R"({"id":1,"text":"a-b-c","image_id":1})" "\n");
  CorpusOptions o;
  o.tokenizer = [](std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
      if (ch == '-') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    out.push_back(cur);
    return out;
  };
  const auto c = build_corpus(parse_corpus_jsonl(in), StopwordList{}, o);
  EXPECT_EQ(surfaces(c.pairs[0].sentence), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(EncodeQuery, DropsStopwordsAndUnknownTokens) {
  std::istringstream in(R"({"id":1,"text":"dog park","image_id":1})" "\n");
  const auto c = build_corpus(parse_corpus_jsonl(in), StopwordList({"the"}));
  const Sentence q = encode_query("The DOG chased a cat", c.lexicon);
  EXPECT_EQ(surfaces(q), (std::vector<std::string>{"dog"}));
  EXPECT_TRUE(encode_query("the", c.lexicon).empty());
}

TEST(Features, BlankRowPrepended) {
  TempDir dir("feat");
  const FeatureTable t = FeatureTable::from_image_rows(Matrix::from_rows({{1, 2, 3}, {4, 5, 6}}));
  save_features(t, dir / "f.uvrf");
  const FeatureTable back = load_features(dir / "f.uvrf");
  EXPECT_EQ(back.n_rows(), 3u);
  EXPECT_EQ(back.matrix(), Matrix::from_rows({{0, 0, 0}, {1, 2, 3}, {4, 5, 6}}));
  EXPECT_EQ(back, t);
}

TEST(Features, EmptyTableHasOnlyBlankRow) {
  TempDir dir("feat0");
  save_features(FeatureTable::from_image_rows(Matrix(0, 4)), dir / "f.uvrf");
  const FeatureTable back = load_features(dir / "f.uvrf");
  EXPECT_EQ(back.n_rows(), 1u);
  EXPECT_EQ(back.n_images(), 0u);
  EXPECT_EQ(back.dim(), 4u);
  for (double v : back.row(0)) EXPECT_EQ(v, 0.0);
}

TEST(Features, WideDimensionRoundTrips) {
  TempDir dir("feat2048");
  Rng rng(3);
  const FeatureTable t = FeatureTable::from_image_rows(Matrix::uniform(2, 2048, -1, 1, rng));
  save_features(t, dir / "f.uvrf");
  const FeatureTable back = load_features(dir / "f.uvrf");
  EXPECT_EQ(back.dim(), 2048u);
  for (std::size_t i = 1; i < 3; ++i) {
    for (std::size_t j = 0; j < 2048; ++j) {
      EXPECT_EQ(back.matrix()(i, j), static_cast<double>(static_cast<float>(t.matrix()(i, j))));
    }
  }
}

std::vector<std::uint8_t> feature_bytes(const char* magic, std::uint64_t n, std::uint64_t dim,
                                        const std::vector<float>& values) {
  ByteWriter w;
  w.bytes(std::string_view(magic, 4));
  w.u32(1);
  w.u64(n);
  w.u64(dim);
  for (float v : values) w.f32(v);
  return w.take();
}

TEST(Features, RejectsCorruptFiles) {
  TempDir dir("badfeat");
  auto write = [&](const std::vector<std::uint8_t>& b) {
    write_file_atomic(dir / "f.uvrf", b);
    return dir / "f.uvrf";
  };
  EXPECT_THROW(load_features(write(feature_bytes("UVRX", 1, 2, {1, 2}))), LoadError);
  EXPECT_THROW(load_features(write(feature_bytes("UVRF", 2, 2, {1, 2, 3}))), LoadError);
  EXPECT_THROW(load_features(write(feature_bytes("UVRF", 1, 2, {1, NAN}))), LoadError);
  EXPECT_THROW(load_features(write(feature_bytes("UVRF", 1, 2, {1, INFINITY}))), LoadError);
  EXPECT_NO_THROW(load_features(write(feature_bytes("UVRF", 1, 2, {1, 2}))));
  EXPECT_THROW(load_features(dir / "missing.uvrf"), LoadError);
}

TEST(Features, AlignmentChecked) {
  std::istringstream in(R"({"id":1,"text":"x","image_id":3})" "\n");
  const auto c = build_corpus(parse_corpus_jsonl(in), StopwordList{});
  EXPECT_THROW(require_aligned(c, FeatureTable::from_image_rows(Matrix(2, 2))), ValidationError);
  EXPECT_NO_THROW(require_aligned(c, FeatureTable::from_image_rows(Matrix(3, 2))));
}

TEST(Stopwords, SortedUniqueLookup) {
  TempDir dir("stop");
  write_text(dir / "s.txt", "the\na\n\nthe\n  of \n");
  const StopwordList s = load_stopwords(dir / "s.txt");
  EXPECT_EQ(s.words(), (std::vector<std::string>{"a", "of", "the"}));
  EXPECT_TRUE(s.contains("of"));
  EXPECT_FALSE(s.contains("dog"));
}

TEST(Lexicon, BinaryRoundTrip) {
  std::istringstream in(R"({"id":1,"text":"Zebra crossing the road","image_id":1})" "\n");
  const auto c = build_corpus(parse_corpus_jsonl(in), StopwordList({"the"}));
  ByteWriter w;
  write_lexicon(w, c.lexicon);
  const auto bytes = w.take();
  ByteReader r(bytes);
  EXPECT_EQ(read_lexicon(r), c.lexicon);
  r.expect_end("lexicon");
}

TEST(Container, CorruptLengthAndVersion) {
  const Magic t{'U', 'V', 'R', 'T'};
  const auto good = wrap_container(t, 1, {1, 2, 3});
  EXPECT_EQ(magic_of(good), "UVRT");
  EXPECT_EQ(unwrap_container(good, t, 1), (std::vector<std::uint8_t>{1, 2, 3}));
  auto bad_len = good;
  bad_len[8] ^= 0x01;
  EXPECT_THROW(unwrap_container(bad_len, t, 1), LoadError);
  auto bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(unwrap_container(bad_version, t, 1), IncompatibleVersionError);
  EXPECT_THROW(unwrap_container(good, Magic{'U', 'V', 'R', 'E'}, 1), LoadError);
}

}  // namespace
}  // namespace uvr
