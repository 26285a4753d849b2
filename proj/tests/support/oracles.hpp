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

// Brute-force reference implementations shared by the unit and acceptance
// tests. Each one recomputes its result from first principles with plain
// loops and no library helpers beyond the data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "uvr/cmrm.hpp"
#include "uvr/corpus.hpp"
#include "uvr/rng.hpp"
#include "uvr/tensor.hpp"
#include "uvr/tilt.hpp"

namespace uvr::testing {

struct RandomCorpusShape {
  std::size_t max_docs = 50;
  std::size_t max_vocab = 30;
  std::size_t max_images = 20;
  std::size_t max_len = 8;
};

/// Random records over words w0..w{V-1}; about one document in ten is empty.
inline std::vector<CorpusRecord> random_records(Rng& rng, const RandomCorpusShape& shape = {}) {
  const std::size_t docs = 1 + rng.below(shape.max_docs);
  const std::size_t vocab = 1 + rng.below(shape.max_vocab);
  const std::size_t images = 1 + rng.below(shape.max_images);
  std::vector<CorpusRecord> records;
  for (std::size_t j = 0; j < docs; ++j) {
    CorpusRecord r;
    r.id = static_cast<std::int64_t>(j);
    r.image_id = static_cast<std::int64_t>(1 + rng.below(images));
    const std::size_t len = rng.below(10) == 0 ? 0 : 1 + rng.below(shape.max_len);
    for (std::size_t i = 0; i < len; ++i) {
      if (i > 0) r.text += ' ';
      r.text += "w" + std::to_string(rng.below(vocab));
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline double brute_ti(const std::vector<TokenId>& doc, TokenId t,
                       const std::vector<std::vector<TokenId>>& docs) {
  double occurrences = 0.0;
  for (TokenId x : doc) occurrences += x == t ? 1.0 : 0.0;
  double df = 0.0;
  for (const auto& g : docs) {
    bool present = false;
    for (TokenId x : g) present = present || x == t;
    df += present ? 1.0 : 0.0;
  }
  return occurrences / static_cast<double>(doc.size()) *
         std::log(static_cast<double>(docs.size()) / (1.0 + df));
}

inline std::vector<std::vector<TokenId>> documents(const CaptionCorpus& corpus) {
  std::vector<std::vector<TokenId>> docs;
  for (const auto& p : corpus.pairs) docs.push_back(p.sentence.token_ids());
  return docs;
}

/// TI of every distinct token of `query`, scored against the corpus documents.
inline std::map<TokenId, double> brute_scores(const std::vector<TokenId>& query,
                                              const std::vector<std::vector<TokenId>>& docs) {
  std::map<TokenId, double> out;
  if (query.empty()) return out;
  for (TokenId t : query) {
    double occurrences = 0.0;
    for (TokenId x : query) occurrences += x == t ? 1.0 : 0.0;
    double df = 0.0;
    for (const auto& g : docs) df += std::count(g.begin(), g.end(), t) > 0 ? 1.0 : 0.0;
    out[t] = occurrences / static_cast<double>(query.size()) *
             std::log(static_cast<double>(docs.size()) / (1.0 + df));
  }
  return out;
}

inline std::vector<TokenId> brute_topics(const std::vector<TokenId>& query,
                                         const std::vector<std::vector<TokenId>>& docs,
                                         std::size_t w) {
  const auto scores = brute_scores(query, docs);
  std::vector<TokenId> order;
  for (const auto& [t, s] : scores) order.push_back(t);
  // Selection by repeated maximum: highest score, then lowest id.
  std::vector<TokenId> picked;
  while (picked.size() < w && !order.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < order.size(); ++i) {
      const double si = scores.at(order[i]), sb = scores.at(order[best]);
      if (si > sb || (si == sb && order[i] < order[best])) best = i;
    }
    picked.push_back(order[best]);
    order.erase(order.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return picked;
}

/// Reference lookup table: topic -> distinct images in corpus order.
inline std::map<TokenId, std::vector<ImageId>> brute_table(const CaptionCorpus& corpus,
                                                           std::size_t w) {
  const auto docs = documents(corpus);
  std::map<TokenId, std::vector<ImageId>> q;
  for (std::size_t j = 0; j < docs.size(); ++j) {
    for (TokenId t : brute_topics(docs[j], docs, w)) {
      auto& list = q[t];
      const ImageId e = corpus.pairs[j].image.image_id;
      if (std::find(list.begin(), list.end(), e) == list.end()) list.push_back(e);
    }
  }
  return q;
}

/// Gather the multiset of images over the query's topics, count, sort.
inline std::vector<std::pair<ImageId, std::size_t>> brute_retrieve(
    const std::vector<TokenId>& query, const CaptionCorpus& corpus, std::size_t w,
    std::size_t m) {
  const auto docs = documents(corpus);
  const auto table = brute_table(corpus, w);
  std::vector<ImageId> gathered;
  for (TokenId t : brute_topics(query, docs, w)) {
    auto it = table.find(t);
    if (it != table.end()) gathered.insert(gathered.end(), it->second.begin(), it->second.end());
  }
  if (gathered.empty()) return {{kBlankImage, 0}};
  std::vector<std::pair<ImageId, std::size_t>> counted;
  for (ImageId id : gathered) {
    if (std::none_of(counted.begin(), counted.end(), [&](const auto& c) { return c.first == id; })) {
      counted.push_back({id, static_cast<std::size_t>(
                                 std::count(gathered.begin(), gathered.end(), id))});
    }
  }
  std::sort(counted.begin(), counted.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (counted.size() > m) counted.resize(m);
  return counted;
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

/// alpha[i][j] = exp(s_ij) / sum_k exp(s_ik), s_ij = sum_c h[i][c] * (m[j] w_g^T + b_g)[c].
inline std::pair<Matrix, Matrix> naive_attend(const Matrix& h, const Matrix& m, const Matrix& w_g,
                                              const Matrix& b_g) {
  const std::size_t n = h.rows(), k = m.rows(), d = h.cols();
  Matrix g(k, d);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t r = 0; r < d; ++r) {
      double s = b_g(0, r);
      for (std::size_t c = 0; c < d; ++c) s += m(j, c) * w_g(r, c);
      g(j, r) = s;
    }
  Matrix alpha(n, k), h_prime(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(k);
    double top = -INFINITY;
    for (std::size_t j = 0; j < k; ++j) {
      s[j] = 0.0;
      for (std::size_t c = 0; c < d; ++c) s[j] += h(i, c) * g(j, c);
      top = std::max(top, s[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(s[j] - top);
    for (std::size_t j = 0; j < k; ++j) alpha(i, j) = std::exp(s[j] - top) / z;
    for (std::size_t c = 0; c < d; ++c) {
      double v = 0.0;
      for (std::size_t j = 0; j < k; ++j) v += alpha(i, j) * m(j, c);
      h_prime(i, c) = v;
    }
  }
  return {alpha, h_prime};
}

/// Every image scored by dot product with the unit query, sorted (sim desc, id asc).
inline std::vector<std::pair<ImageId, double>> brute_cosine_ranking(const Matrix& query,
                                                                     const Matrix& image_vecs) {
  std::vector<std::pair<ImageId, double>> all;
  for (std::size_t i = 0; i < image_vecs.rows(); ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < image_vecs.cols(); ++c) s += query(0, c) * image_vecs(i, c);
    all.push_back({static_cast<ImageId>(i + 1), s});
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return all;
}

/// Pearson chi-square goodness of fit against a uniform distribution.
inline double chi_square_uniform_p(const std::vector<std::size_t>& counts) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) stat += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("uvr-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace uvr::testing
