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

#include <cmath>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "uvr/binary_io.hpp"
#include "uvr/error.hpp"
#include "uvr/tilt.hpp"

namespace uvr {
namespace {

CaptionCorpus corpus_of(const std::vector<std::pair<std::string, std::int64_t>>& docs) {
  std::vector<CorpusRecord> records;
  std::int64_t id = 0;
  for (const auto& [text, image] : docs) records.push_back({id++, text, image});
  return build_corpus(records, StopwordList{});
}

double ti_of(const TfIdfDictionary& dict, const CaptionCorpus& c, std::size_t doc,
             const std::string& word) {
  const TokenId t = *c.lexicon.vocab.find(word);
  for (const auto& s : dict.scores[doc]) {
    if (s.token == t) return s.score;
  }
  ADD_FAILURE() << word << " not scored in document " << doc;
  return NAN;
}

TEST(TfIdf, HandExamples) {
  const auto c = corpus_of({{"dog park", 1}, {"dog ball", 2}, {"cat ball", 3}});
  const auto dict = compute_tfidf(c);
  EXPECT_EQ(dict.document_count, 3u);
  EXPECT_EQ(ti_of(dict, c, 0, "dog"), 0.0);
  EXPECT_NEAR(ti_of(dict, c, 2, "cat"), 0.5 * std::log(1.5), 1e-15);
  EXPECT_NEAR(ti_of(dict, c, 2, "cat"), 0.2027, 1e-4);
  EXPECT_EQ(ti_of(dict, c, 2, "ball"), 0.0);
}

TEST(TfIdf, SingleDocumentIsNegative) {
  const auto c = corpus_of({{"dog", 1}});
  const auto dict = compute_tfidf(c);
  EXPECT_NEAR(ti_of(dict, c, 0, "dog"), std::log(0.5), 1e-15);
  EXPECT_NEAR(ti_of(dict, c, 0, "dog"), -0.6931, 1e-4);
}

TEST(TfIdf, EmptyDocumentHasNoEntries) {
  const auto c = corpus_of({{"", 1}, {"dog", 2}});
  const auto dict = compute_tfidf(c);
  EXPECT_TRUE(dict.scores[0].empty());
  EXPECT_EQ(dict.document_count, 2u);
}

TEST(TfIdf, DocumentFrequencyBounds) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = build_corpus(testing::random_records(rng), StopwordList{});
    const auto dict = compute_tfidf(c);
    for (auto df : dict.df) {
      EXPECT_LE(df, dict.document_count);
    }
  }
}

TEST(TfIdf, MatchesBruteForce) {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = build_corpus(testing::random_records(rng), StopwordList{});
    const auto dict = compute_tfidf(c);
    const auto docs = testing::documents(c);
    for (std::size_t j = 0; j < docs.size(); ++j) {
      std::set<TokenId> distinct(docs[j].begin(), docs[j].end());
      ASSERT_EQ(dict.scores[j].size(), distinct.size());
      for (const auto& s : dict.scores[j]) {
        EXPECT_NEAR(s.score, testing::brute_ti(docs[j], s.token, docs), 1e-12);
      }
    }
  }
}

TEST(TopicWords, BudgetAndOrder) {
  const auto c = corpus_of({{"dog park", 1}, {"dog ball", 2}, {"cat ball", 3}});
  const auto dict = compute_tfidf(c);
  EXPECT_EQ(topic_words(c.pairs[0].sentence, dict, 8).topics.size(), 2u);
  const auto top = topic_words(c.pairs[2].sentence, dict, 1).topics;
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(c.lexicon.vocab.surface(top[0]), "cat");
  EXPECT_THROW(topic_words(c.pairs[0].sentence, dict, 0), ValidationError);
  EXPECT_TRUE(topic_words(Sentence{}, dict, 3).topics.empty());
}

TEST(TopicWords, TiesBreakByLowerId) {
  const auto c = corpus_of({{"b a", 1}, {"c", 2}});
  const auto dict = compute_tfidf(c);
  const auto topics = topic_words(c.pairs[0].sentence, dict, 2).topics;
  EXPECT_EQ(topics, (std::vector<TokenId>{0, 1}));
}

TEST(BuildTable, SmallExamples) {
  const auto c = corpus_of({{"dog park", 1}, {"dog ball", 2}, {"dog park", 1}});
  const auto dict = compute_tfidf(c);
  const auto table = build_table(c, dict, 8);
  const TokenId dog = *c.lexicon.vocab.find("dog");
  ASSERT_NE(table.images_for(dog), nullptr);
  EXPECT_EQ(*table.images_for(dog), (std::vector<ImageId>{1, 2}));
  const TokenId park = *c.lexicon.vocab.find("park");
  EXPECT_EQ(*table.images_for(park), (std::vector<ImageId>{1}));
  EXPECT_EQ(table.topic_count(), 3u);
}

TEST(BuildTable, MatchesReference) {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = build_corpus(testing::random_records(rng), StopwordList{});
    const auto dict = compute_tfidf(c);
    for (std::size_t w : {1u, 3u, 8u}) {
      EXPECT_EQ(build_table(c, dict, w).index, testing::brute_table(c, w));
    }
  }
}

TEST(RetrieveTilt, CountThenId) {
  const auto c = corpus_of({{"a b", 1}, {"a", 2}, {"z", 9}});
  const auto dict = compute_tfidf(c);
  const TokenId a = *c.lexicon.vocab.find("a"), b = *c.lexicon.vocab.find("b");
  TopicImageTable table;
  table.index[a] = {1, 2};
  table.index[b] = {2, 3};
  Sentence q;
  q.tokens = {{"a", a}, {"b", b}};
  const auto r = retrieve_tilt(q, table, dict, 8, 2);
  EXPECT_EQ(r.images, (std::vector<ImageId>{2, 1}));
  EXPECT_EQ(r.scores, (std::vector<double>{2, 1}));
  const auto all = retrieve_tilt(q, table, dict, 8, 10);
  EXPECT_EQ(all.images, (std::vector<ImageId>{2, 1, 3}));
}

TEST(RetrieveTilt, NoHitGivesSentinel) {
  const auto art = build_tilt(corpus_of({{"dog park", 1}}), 8);
  const Sentence q = encode_query("zebra", art.lexicon);
  const auto r = retrieve_tilt(q, art.table, art.dict, 8, 5);
  EXPECT_TRUE(r.is_blank());
  EXPECT_EQ(r.images, (std::vector<ImageId>{0}));
  EXPECT_THROW(retrieve_tilt(q, art.table, art.dict, 8, 0), ValidationError);
}

TEST(RetrieveTilt, MatchesBruteForceAndStaysInTable) {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = build_corpus(testing::random_records(rng), StopwordList{});
    for (std::size_t w : {1u, 2u, 5u, 8u}) {
      const auto art = build_tilt(c, w);
      std::set<ImageId> known;
      for (const auto& [t, ids] : art.table.index) known.insert(ids.begin(), ids.end());
      for (std::size_t m : {1u, 2u, 5u, 10u}) {
        for (const auto& pair : c.pairs) {
          const auto got = retrieve_tilt(pair.sentence, art.table, art.dict, w, m);
          const auto want = testing::brute_retrieve(pair.sentence.token_ids(), c, w, m);
          ASSERT_EQ(got.images.size(), want.size());
          for (std::size_t i = 0; i < want.size(); ++i) {
            EXPECT_EQ(got.images[i], want[i].first);
            EXPECT_EQ(got.scores[i], static_cast<double>(want[i].second));
          }
          if (!got.is_blank()) {
            for (ImageId id : got.images) EXPECT_TRUE(known.contains(id));
          }
        }
      }
    }
  }
}

TEST(BuildTable, AddingPairNeverRemovesImages) {
  Rng rng(15);
  for (int trial = 0; trial < 30; ++trial) {
    testing::RandomCorpusShape shape;
    shape.max_len = 6;
    auto records = testing::random_records(rng, shape);
    const auto before = build_tilt(build_corpus(records, StopwordList{}), 8).table;
    records.push_back({999, "unrelated novel words", 42});
    const auto after = build_tilt(build_corpus(records, StopwordList{}), 8).table;
    for (const auto& [t, ids] : before.index) {
      const auto* now = after.images_for(t);
      ASSERT_NE(now, nullptr);
      for (ImageId id : ids) {
        EXPECT_NE(std::find(now->begin(), now->end(), id), now->end());
      }
    }
  }
}

TEST(TiltArtifact, ByteIdenticalRoundTrip) {
  Rng rng(16);
  testing::TempDir dir("tilt");
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = build_corpus(testing::random_records(rng), StopwordList({"w0"}));
    const auto art = build_tilt(c, 5);
    const auto bytes = serialize_tilt(art);
    EXPECT_EQ(serialize_tilt(build_tilt(c, 5)), bytes);
    save_table(art, dir / "t.uvrt");
    const auto back = load_table(dir / "t.uvrt");
    EXPECT_EQ(serialize_tilt(back), bytes);
    EXPECT_EQ(back.table, art.table);
    EXPECT_EQ(back.lexicon, art.lexicon);
    EXPECT_EQ(back.dict.df, art.dict.df);
    for (const auto& pair : c.pairs) {
      EXPECT_EQ(retrieve_tilt(pair.sentence, back.table, back.dict, 5, 5),
                retrieve_tilt(pair.sentence, art.table, art.dict, 5, 5));
    }
  }
}

TEST(TiltArtifact, EmptyTableRoundTrip) {
  const auto art = build_tilt(corpus_of({}), 8);
  const auto back = deserialize_tilt(serialize_tilt(art));
  EXPECT_EQ(back.table, art.table);
  EXPECT_EQ(serialize_tilt(back), serialize_tilt(art));
}

TEST(TiltArtifact, CorruptionRejected) {
  const auto bytes = serialize_tilt(build_tilt(corpus_of({{"dog park", 1}, {"cat", 2}}), 8));
  auto version = bytes;
  version[4] = 2;
  EXPECT_THROW(deserialize_tilt(version), IncompatibleVersionError);
  auto length = bytes;
  length[8] ^= 0x10;
  EXPECT_THROW(deserialize_tilt(length), LoadError);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  EXPECT_THROW(deserialize_tilt(truncated), LoadError);
  testing::TempDir dir("tiltbad");
  write_file_atomic(dir / "t.uvrt", length);
  EXPECT_THROW(load_table(dir / "t.uvrt"), LoadError);
}

}  // namespace
}  // namespace uvr
