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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "uvr/cmrm.hpp"
#include "uvr/fusion.hpp"

namespace uvr {

/// Toolkit settings. Retrieval defaults: top-8
/// topic words, 5 lookup-table images, 8 embedding images, threshold 0.4.
struct Config {
  std::size_t w = 8;
  std::size_t m_tilt = 5;
  std::size_t m_cmrm = 8;
  double delta = 0.4;
  double margin = 0.2;

  std::size_t dim = 16;
  std::size_t heads = 8;
  std::size_t ffn_hidden = 32;
  std::size_t image_hidden = 32;
  std::size_t text_dim = 32;
  std::size_t embed_dim = 64;
  std::optional<std::size_t> feature_dim;  // checked against loaded features when set
  std::size_t max_len = 128;

  double lr = 0.5;
  std::size_t epochs = 50;
  std::size_t batch = 16;
  NegativeScope negatives = NegativeScope::kBatch;
  std::size_t recall_k = 5;
  double init_range = 0.1;
  std::uint64_t seed = 42;

  /// Default file locations keyed by flag name (corpus, stopwords, ...).
  std::map<std::string, std::string> paths;
  /// Keys assigned through set(), in any order.
  std::set<std::string> assigned;

  /// Sets one key from its textual value. Throws ParseError for unknown keys
  /// or unparsable values, ValidationError for out-of-range values.
  void set(std::string_view key, std::string_view value);

  /// Reads `key = value` lines; `#` starts a comment.
  static Config from_file(const std::filesystem::path& path);

  CmrmConfig cmrm() const;
  FusionModelConfig fusion() const;
  CorpusOptions corpus_options() const;
};

/// Seed fallback from the UVR_SEED environment variable, if set and valid.
std::optional<std::uint64_t> seed_from_environment();

}  // namespace uvr
