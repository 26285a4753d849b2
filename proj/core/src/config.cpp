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

#include "uvr/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>

#include "uvr/error.hpp"

namespace uvr {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) +
                     "'");
  }
  return out;
}

std::size_t positive(std::string_view key, std::string_view value) {
  const auto v = parse_number<std::size_t>(key, value);
  if (v == 0) throw ValidationError("config key '" + std::string(key) + "' must be positive");
  return v;
}

}  // namespace

void Config::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "w") {
    w = positive(key, value);
  } else if (key == "m_tilt") {
    m_tilt = positive(key, value);
  } else if (key == "m_cmrm") {
    m_cmrm = positive(key, value);
  } else if (key == "delta") {
    delta = parse_number<double>(key, value);
    if (!(delta >= -1.0 && delta <= 1.0)) throw ValidationError("delta must lie in [-1, 1]");
  } else if (key == "margin") {
    margin = parse_number<double>(key, value);
    if (!(margin >= 0.0)) throw ValidationError("margin must be non-negative");
  } else if (key == "dim") {
    dim = positive(key, value);
  } else if (key == "heads") {
    heads = positive(key, value);
  } else if (key == "ffn_hidden") {
    ffn_hidden = positive(key, value);
  } else if (key == "image_hidden") {
    image_hidden = positive(key, value);
  } else if (key == "text_dim") {
    text_dim = positive(key, value);
  } else if (key == "embed_dim") {
    embed_dim = positive(key, value);
  } else if (key == "feature_dim") {
    feature_dim = positive(key, value);
  } else if (key == "max_len") {
    max_len = positive(key, value);
  } else if (key == "lr") {
    lr = parse_number<double>(key, value);
    if (!(lr >= 0.0)) throw ValidationError("lr must be non-negative");
  } else if (key == "epochs") {
    epochs = parse_number<std::size_t>(key, value);
  } else if (key == "batch") {
    batch = positive(key, value);
  } else if (key == "negatives") {
    if (value == "batch") {
      negatives = NegativeScope::kBatch;
    } else if (value == "global") {
      negatives = NegativeScope::kGlobal;
    } else {
      throw ParseError("config key 'negatives' must be 'batch' or 'global'");
    }
  } else if (key == "recall_k") {
    recall_k = positive(key, value);
  } else if (key == "init_range") {
    init_range = parse_number<double>(key, value);
    if (!(init_range > 0.0)) throw ValidationError("init_range must be positive");
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "corpus" || key == "stopwords" || key == "features" || key == "table" ||
             key == "index" || key == "params" || key == "heldout" || key == "out") {
    paths[std::string(key)] = std::string(value);
  } else {
    throw ParseError("unknown config key '" + std::string(key) + "'");
  }
  assigned.emplace(key);
}

Config Config::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config " + path.string());
  Config config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      config.set(trim(view.substr(0, eq)), view.substr(eq + 1));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

CmrmConfig Config::cmrm() const {
  CmrmConfig c;
  c.epochs = epochs;
  c.lr = lr;
  c.margin = margin;
  c.batch = batch;
  c.seed = seed;
  c.text_dim = text_dim;
  c.embed_dim = embed_dim;
  c.init_range = init_range;
  c.negatives = negatives;
  c.default_threshold = delta;
  c.recall_k = recall_k;
  return c;
}

FusionModelConfig Config::fusion() const {
  if (dim % heads != 0) {
    throw ValidationError("dim " + std::to_string(dim) + " is not divisible by heads " +
                          std::to_string(heads));
  }
  FusionModelConfig c;
  c.dim = dim;
  c.heads = heads;
  c.ffn_hidden = ffn_hidden;
  c.image_hidden = image_hidden;
  c.init_range = init_range;
  c.seed = seed;
  return c;
}

CorpusOptions Config::corpus_options() const {
  CorpusOptions o;
  o.max_len = max_len;
  return o;
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* raw = std::getenv("UVR_SEED");
  if (raw == nullptr) return std::nullopt;
  std::string_view s = trim(raw);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError("UVR_SEED is not an unsigned integer: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace uvr
