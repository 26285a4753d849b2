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

#include "uvr/cli.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "uvr/ablation.hpp"
#include "uvr/binary_io.hpp"
#include "uvr/cmrm.hpp"
#include "uvr/config.hpp"
#include "uvr/error.hpp"
#include "uvr/fusion.hpp"
#include "uvr/gradcheck.hpp"
#include "uvr/synthetic.hpp"
#include "uvr/tilt.hpp"

namespace uvr {

namespace {

using json = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Settings shared by every subcommand: config file, per-key overrides and
/// the ablation flags.
struct Invocation {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::string ablate = "none";
  std::optional<std::uint64_t> ablate_seed;

  Config config() const {
    Config c = config_path.empty() ? Config{} : Config::from_file(config_path);
    if (!c.assigned.contains("seed")) {
      if (auto env = seed_from_environment()) c.seed = *env;
    }
    for (const auto& [key, value] : overrides) c.set(key, value);
    return c;
  }

  AblationMode ablation(const Config& c) const {
    return AblationMode::parse(ablate, ablate_seed ? ablate_seed : std::optional(c.seed));
  }
};

void key_option(CLI::App* app, Invocation& inv, const std::string& flags, const std::string& key,
                const std::string& help) {
  app->add_option_function<std::string>(
      flags, [&inv, key](const std::string& v) { inv.overrides[key] = v; }, help);
}

void ablation_options(CLI::App* app, Invocation& inv) {
  app->add_option("--ablate", inv.ablate, "none|shuffle|random_init|random_mapping");
  app->add_option("--ablate-seed", inv.ablate_seed, "seed for the ablation (defaults to --seed)");
}

std::string require_path(const Config& c, const std::string& key) {
  const auto it = c.paths.find(key);
  if (it == c.paths.end() || it->second.empty()) throw UsageError("--" + key + " is required");
  return it->second;
}

std::optional<std::string> optional_path(const Config& c, const std::string& key) {
  const auto it = c.paths.find(key);
  if (it == c.paths.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

FeatureTable load_checked_features(const Config& c) {
  FeatureTable features = load_features(require_path(c, "features"));
  if (c.feature_dim && *c.feature_dim != features.dim()) {
    throw ValidationError("features have dimension " + std::to_string(features.dim()) +
                          ", config expects " + std::to_string(*c.feature_dim));
  }
  return features;
}

std::size_t max_table_image(const TopicImageTable& table) {
  ImageId top = 0;
  for (const auto& [token, images] : table.index) {
    for (ImageId id : images) top = std::max(top, id);
  }
  return top;
}

/// Lookup table or embedding index, detected from the file's magic.
struct Retriever {
  std::optional<TiltArtifact> tilt;
  std::optional<JointEmbeddingIndex> cmrm;

  static Retriever load(const std::string& path) {
    const auto bytes = read_file(path);
    const std::string magic = magic_of(bytes);
    Retriever r;
    if (magic == "UVRT") {
      r.tilt = deserialize_tilt(bytes);
    } else if (magic == "UVRE") {
      r.cmrm = deserialize_index(bytes);
    } else {
      throw LoadError(path + " is neither a lookup table nor an embedding index");
    }
    return r;
  }

  const Lexicon& lexicon() const { return tilt ? tilt->lexicon : cmrm->lexicon; }
  std::size_t n_images() const { return tilt ? max_table_image(tilt->table) : cmrm->n_images(); }

  RankedImages retrieve(const Sentence& s, const Config& c) const {
    if (tilt) return retrieve_tilt(s, tilt->table, tilt->dict, c.w, c.m_tilt);
    return retrieve_cmrm(s, *cmrm, c.delta, c.m_cmrm);
  }
};

RankedImages apply_mapping(const RankedImages& ranked, std::size_t n_images,
                           const AblationMode& mode, std::uint64_t call) {
  if (mode.kind != AblationKind::kRandomMapping) return ranked;
  return ablate_retrieval(ranked, n_images, mode, call);
}

FeatureTable apply_feature_ablation(const FeatureTable& features, const AblationMode& mode) {
  if (mode.kind == AblationKind::kRandomMapping) return features;
  return ablate_features(features, mode);
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

json shape_json(const Matrix& m) { return json::array({m.rows(), m.cols()}); }

int cmd_build_table(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const Config c = inv.config();
  const CaptionCorpus corpus =
      load_corpus(require_path(c, "corpus"), optional_path(c, "stopwords").value_or(""),
                  c.corpus_options());
  for (const auto& w : corpus.warnings) err << "warning: " << w << '\n';
  const TiltArtifact artifact = build_tilt(corpus, c.w);
  save_table(artifact, require_path(c, "out"));
  json j;
  j["documents"] = corpus.document_count();
  j["vocab"] = corpus.lexicon.vocab.size();
  j["topics"] = artifact.table.topic_count();
  j["mean_images_per_topic"] = artifact.table.mean_images_per_topic();
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_retrieve(const Invocation& inv, const std::string& mode, const std::string& text,
                 std::ostream& out) {
  const Config c = inv.config();
  Retriever r;
  if (mode == "tilt") {
    r.tilt = load_table(require_path(c, "table"));
  } else {
    r.cmrm = load_index(require_path(c, "index"));
  }
  const AblationMode ablation = inv.ablation(c);
  if (ablation.kind != AblationKind::kNone && ablation.kind != AblationKind::kRandomMapping) {
    throw ValidationError("retrieve supports only --ablate random_mapping");
  }
  const Sentence query = encode_query(text, r.lexicon(), c.corpus_options());
  const RankedImages raw = r.retrieve(query, c);
  const bool mapped = ablation.kind == AblationKind::kRandomMapping;
  const RankedImages ranked = apply_mapping(raw, r.n_images(), ablation, 0);
  if (ranked.is_blank()) {
    out << json{{"image_id", 0}}.dump() << '\n';
    return kExitOk;
  }
  for (std::size_t i = 0; i < ranked.images.size(); ++i) {
    json j;
    j["image_id"] = ranked.images[i];
    if (!mapped) {
      if (r.tilt) {
        j["count"] = static_cast<std::uint64_t>(ranked.scores[i]);
      } else {
        j["sim"] = ranked.scores[i];
      }
    }
    out << j.dump() << '\n';
  }
  return kExitOk;
}

int cmd_train(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const Config c = inv.config();
  const CaptionCorpus corpus =
      load_corpus(require_path(c, "corpus"), optional_path(c, "stopwords").value_or(""),
                  c.corpus_options());
  for (const auto& w : corpus.warnings) err << "warning: " << w << '\n';
  const AblationMode ablation = inv.ablation(c);
  if (ablation.kind == AblationKind::kRandomMapping) {
    throw ValidationError("train-cmrm supports only --ablate shuffle|random_init");
  }
  const FeatureTable features = ablate_features(load_checked_features(c), ablation);
  std::optional<CaptionCorpus> heldout;
  if (auto p = optional_path(c, "heldout")) {
    heldout = load_corpus_with_lexicon(*p, corpus.lexicon, c.corpus_options());
  }
  const TrainResult result = train_cmrm(corpus, features, c.cmrm(), heldout ? &*heldout : nullptr);
  save_index(result.index, require_path(c, "out"));
  out << result.report.to_json() << '\n';
  if (!result.report.epoch_loss.empty()) {
    err << "trained " << result.report.epoch_loss.size() << " epochs, final loss "
        << result.report.epoch_loss.back() << '\n';
  }
  return kExitOk;
}

int cmd_init_params(const Invocation& inv, const std::string& from, std::ostream& out) {
  const Config c = inv.config();
  const Retriever r = Retriever::load(from);
  const FeatureTable features = load_checked_features(c);
  FusionModelConfig fc = c.fusion();
  FusionModel model = FusionModel::init(r.lexicon().vocab.size(), features.dim(), fc);
  save_fusion_model(model, require_path(c, "out"));
  std::size_t tensors = 0, parameters = 0;
  model.for_each_tensor([&](const std::string&, Matrix& t) {
    ++tensors;
    parameters += t.size();
  });
  json j;
  j["tensors"] = tensors;
  j["parameters"] = parameters;
  j["dim"] = fc.dim;
  j["heads"] = fc.heads;
  out << j.dump() << '\n';
  return kExitOk;
}

struct FuseArgs {
  std::string source;
  std::string text;
  std::string pair;
  std::optional<double> fixed_lambda;
  bool dump = false;
};

int cmd_fuse(const Invocation& inv, const FuseArgs& args, std::ostream& out) {
  const Config c = inv.config();
  const Retriever r = Retriever::load(args.source);
  const FusionModel model = load_fusion_model(require_path(c, "params"));
  const AblationMode ablation = inv.ablation(c);
  const FeatureTable features = apply_feature_ablation(load_checked_features(c), ablation);
  if (model.encoder.vocab_size() != r.lexicon().vocab.size()) {
    throw ValidationError("parameters were initialized for a vocabulary of " +
                          std::to_string(model.encoder.vocab_size()) + " tokens, artifact has " +
                          std::to_string(r.lexicon().vocab.size()));
  }
  if (model.fusion.feature_dim() != features.dim()) {
    throw ValidationError("parameters expect features of dimension " +
                          std::to_string(model.fusion.feature_dim()) + ", got " +
                          std::to_string(features.dim()));
  }
  FusionOptions options;
  options.fixed_lambda = args.fixed_lambda;

  std::vector<std::string> texts = {args.text};
  if (!args.pair.empty()) texts.push_back(args.pair);
  json sides = json::array();
  Matrix stacked;
  double gate_sum = 0.0;
  std::size_t gate_count = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const Sentence s = encode_query(texts[i], r.lexicon(), c.corpus_options());
    if (s.empty()) throw ValidationError("text has no in-vocabulary tokens: '" + texts[i] + "'");
    const RankedImages ranked = apply_mapping(r.retrieve(s, c), r.n_images(), ablation, i);
    const FusionTrace trace = fuse_sentence(s, ranked, features, model, options);
    json side;
    side["tokens"] = s.token_ids();
    side["images"] = ranked.images;
    side["h_shape"] = shape_json(trace.text.h);
    side["m_shape"] = shape_json(trace.images.m);
    side["h_hat_shape"] = shape_json(trace.out.h_hat);
    side["mean_gate"] = mean_gate(trace.out);
    if (args.dump) {
      side["alpha"] = matrix_json(trace.out.alpha);
      side["lambda"] = matrix_json(trace.out.lambda);
    }
    sides.push_back(side);
    gate_sum += mean_gate(trace.out) * static_cast<double>(trace.out.lambda.size());
    gate_count += trace.out.lambda.size();
    stacked = i == 0 ? trace.out.h_hat : vstack(stacked, trace.out.h_hat);
  }
  json j;
  j["h_hat_shape"] = shape_json(stacked);
  j["mean_gate"] = gate_sum / static_cast<double>(gate_count);
  j["sides"] = sides;
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_gradcheck(const Invocation& inv, std::size_t fixtures, std::ostream& out,
                  std::ostream& err) {
  const Config c = inv.config();
  GradCheckOptions options;
  options.seed = c.seed;
  options.fusion_fixtures = fixtures;
  options.cmrm_fixtures = fixtures;
  const GradCheckReport report = run_gradcheck(options);
  out << report.to_jsonl();
  err << (report.pass() ? "gradcheck passed" : "gradcheck FAILED") << " ("
      << report.fusion_fixtures << " fusion, " << report.cmrm_fixtures << " embedding fixtures, "
      << report.skipped << " redrawn)\n";
  return report.pass() ? kExitOk : kExitNumerical;
}

std::vector<double> parse_grid(const std::string& grid) {
  std::vector<double> values;
  std::stringstream ss(grid);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(' ');
    const auto last = item.find_last_not_of(' ');
    const std::string_view v =
        first == std::string::npos ? std::string_view{} : std::string_view(item).substr(first, last - first + 1);
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
      throw UsageError("bad grid value '" + item + "'");
    }
    values.push_back(x);
  }
  if (values.empty()) throw UsageError("--grid is empty");
  return values;
}

/// Planted corpus or user-provided files, split into train and held-out.
struct SweepData {
  CaptionCorpus train;
  CaptionCorpus heldout;
  FeatureTable features;
};

SweepData sweep_data(const Config& c) {
  SweepData d;
  if (auto corpus = optional_path(c, "corpus")) {
    d.train = load_corpus(*corpus, optional_path(c, "stopwords").value_or(""), c.corpus_options());
    d.heldout = load_corpus_with_lexicon(require_path(c, "heldout"), d.train.lexicon,
                                         c.corpus_options());
    d.features = load_checked_features(c);
  } else {
    PlantedCorpusShape shape;
    shape.seed = c.seed;
    const PlantedCorpus planted = make_planted_corpus(shape);
    d.train = build_corpus(planted.train, planted.stopwords, c.corpus_options());
    d.heldout = build_corpus_with_lexicon(planted.heldout, d.train.lexicon, c.corpus_options());
    d.features = planted.features;
  }
  return d;
}

struct HitStats {
  double hit_rate = 0.0;
  double mean_images = 0.0;
  double blank_rate = 0.0;
};

HitStats hit_stats(const CaptionCorpus& queries,
                   const std::function<RankedImages(const Sentence&)>& retrieve) {
  HitStats s;
  for (const auto& pair : queries.pairs) {
    const RankedImages r = retrieve(pair.sentence);
    if (r.is_blank()) {
      s.blank_rate += 1.0;
    } else {
      s.mean_images += static_cast<double>(r.images.size());
      if (std::find(r.images.begin(), r.images.end(), pair.image.image_id) != r.images.end()) {
        s.hit_rate += 1.0;
      }
    }
  }
  const auto n = static_cast<double>(std::max<std::size_t>(queries.pairs.size(), 1));
  s.hit_rate /= n;
  s.mean_images /= n;
  s.blank_rate /= n;
  return s;
}

std::string csv_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

int cmd_sweep(const Invocation& inv, const std::string& param, const std::string& grid,
              std::ostream& out, std::ostream& err) {
  const Config c = inv.config();
  const std::vector<double> values = parse_grid(grid);
  const SweepData d = sweep_data(c);
  err << "sweeping " << param << " over " << values.size() << " values on "
      << d.heldout.pairs.size() << " held-out queries\n";

  if (param == "m") {
    const TiltArtifact tilt = build_tilt(d.train, c.w);
    const JointEmbeddingIndex index = train_cmrm(d.train, d.features, c.cmrm()).index;
    out << "m,tilt_hit_rate,tilt_mean_images,cmrm_hit_rate,cmrm_mean_images\n";
    for (double v : values) {
      if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v))) {
        throw ValidationError("m must be a positive integer, got " + csv_number(v));
      }
      const auto m = static_cast<std::size_t>(v);
      const HitStats t = hit_stats(d.heldout, [&](const Sentence& s) {
        return retrieve_tilt(s, tilt.table, tilt.dict, c.w, m);
      });
      const HitStats e = hit_stats(
          d.heldout, [&](const Sentence& s) { return retrieve_cmrm(s, index, c.delta, m); });
      out << m << ',' << csv_number(t.hit_rate) << ',' << csv_number(t.mean_images) << ','
          << csv_number(e.hit_rate) << ',' << csv_number(e.mean_images) << '\n';
    }
  } else if (param == "delta") {
    const JointEmbeddingIndex index = train_cmrm(d.train, d.features, c.cmrm()).index;
    out << "delta,hit_rate,mean_images,blank_rate\n";
    for (double v : values) {
      if (!(v >= -1.0 && v <= 1.0)) throw ValidationError("delta must lie in [-1, 1]");
      const HitStats e = hit_stats(
          d.heldout, [&](const Sentence& s) { return retrieve_cmrm(s, index, v, c.m_cmrm); });
      out << csv_number(v) << ',' << csv_number(e.hit_rate) << ',' << csv_number(e.mean_images)
          << ',' << csv_number(e.blank_rate) << '\n';
    }
  } else if (param == "lambda") {
    const TiltArtifact tilt = build_tilt(d.train, c.w);
    const FusionModel model =
        FusionModel::init(d.train.lexicon.vocab.size(), d.features.dim(), c.fusion());
    out << "lambda,mean_gate,visual_shift\n";
    for (double v : values) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
      FusionOptions options;
      options.fixed_lambda = v;
      double gate = 0.0, shift = 0.0;
      std::size_t count = 0;
      for (const auto& pair : d.heldout.pairs) {
        if (pair.sentence.empty()) continue;
        const RankedImages ranked = retrieve_tilt(pair.sentence, tilt.table, tilt.dict, c.w,
                                                  c.m_tilt);
        const FusionTrace t = fuse_sentence(pair.sentence, ranked, d.features, model, options);
        const Matrix text_only = layer_norm(t.text.h, model.fusion.ln_scale,
                                            model.fusion.ln_shift, model.ln_eps);
        gate += mean_gate(t.out);
        shift += max_abs_diff(t.out.h_hat, text_only);
        ++count;
      }
      const auto n = static_cast<double>(std::max<std::size_t>(count, 1));
      out << csv_number(v) << ',' << csv_number(gate / n) << ',' << csv_number(shift / n) << '\n';
    }
  } else {
    throw UsageError("--param must be m, delta or lambda");
  }
  return kExitOk;
}

int cmd_make_synthetic(const Invocation& inv, std::ostream& out) {
  const Config c = inv.config();
  PlantedCorpusShape shape;
  shape.seed = c.seed;
  if (c.feature_dim) shape.feature_dim = *c.feature_dim;
  const PlantedCorpus planted = make_planted_corpus(shape);
  const std::string dir = require_path(c, "out");
  write_planted_corpus(planted, dir);
  json j;
  j["train"] = planted.train.size();
  j["heldout"] = planted.heldout.size();
  j["images"] = planted.features.n_images();
  j["feature_dim"] = planted.features.dim();
  j["dir"] = dir;
  out << j.dump() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Universal visual representation toolkit", "uvr"};
  app.require_subcommand(1);
  Invocation inv;
  app.add_option("--config", inv.config_path, "key = value settings file")
      ->check(CLI::ExistingFile);

  auto common = [&](CLI::App* sub) {
    key_option(sub, inv, "--seed", "seed", "global seed (falls back to UVR_SEED)");
    key_option(sub, inv, "--max-len", "max_len", "maximum tokens per sentence");
  };

  auto* build = app.add_subcommand("build-table", "build a topic-image lookup table");
  common(build);
  key_option(build, inv, "--corpus", "corpus", "caption corpus (JSONL)");
  key_option(build, inv, "--stopwords", "stopwords", "stopword list, one per line");
  key_option(build, inv, "--out", "out", "output table file");
  key_option(build, inv, "-w,--topics", "w", "topic words per sentence");

  auto* retrieve = app.add_subcommand("retrieve", "retrieve images for a sentence");
  common(retrieve);
  std::string mode = "tilt";
  std::string text;
  retrieve->add_option("--mode", mode, "tilt|cmrm")->check(CLI::IsMember({"tilt", "cmrm"}));
  retrieve->add_option("--text", text, "query sentence")->required();
  key_option(retrieve, inv, "--table", "table", "lookup table file");
  key_option(retrieve, inv, "--index", "index", "embedding index file");
  key_option(retrieve, inv, "-w,--topics", "w", "topic words per sentence");
  key_option(retrieve, inv, "--delta", "delta", "similarity threshold");
  std::optional<std::string> retrieve_m;
  retrieve->add_option("-m", retrieve_m, "images to return");
  ablation_options(retrieve, inv);

  auto* train = app.add_subcommand("train-cmrm", "train the cross-modal embedding");
  common(train);
  key_option(train, inv, "--corpus", "corpus", "caption corpus (JSONL)");
  key_option(train, inv, "--stopwords", "stopwords", "stopword list");
  key_option(train, inv, "--features", "features", "image feature file");
  key_option(train, inv, "--heldout", "heldout", "held-out corpus for recall");
  key_option(train, inv, "--out", "out", "output index file");
  key_option(train, inv, "--epochs", "epochs", "training epochs");
  key_option(train, inv, "--lr", "lr", "learning rate");
  key_option(train, inv, "--batch", "batch", "mini-batch size");
  key_option(train, inv, "--margin", "margin", "triplet margin");
  key_option(train, inv, "--negatives", "negatives", "batch|global");
  key_option(train, inv, "--text-dim", "text_dim", "token embedding width");
  key_option(train, inv, "--embed-dim", "embed_dim", "joint space width");
  key_option(train, inv, "--init-range", "init_range", "token embedding init range");
  key_option(train, inv, "--delta", "delta", "default threshold stored in the index");
  key_option(train, inv, "--recall-k", "recall_k", "k for held-out recall");
  key_option(train, inv, "--feature-dim", "feature_dim", "expected feature dimension");
  ablation_options(train, inv);

  auto* init = app.add_subcommand("init-params", "initialize fusion parameters");
  common(init);
  std::string init_from;
  init->add_option("--from", init_from, "lookup table or index providing the vocabulary")
      ->required();
  key_option(init, inv, "--features", "features", "image feature file");
  key_option(init, inv, "--out", "out", "output parameter file");
  key_option(init, inv, "--dim", "dim", "model width");
  key_option(init, inv, "--heads", "heads", "attention heads");
  key_option(init, inv, "--ffn-hidden", "ffn_hidden", "encoder FFN width");
  key_option(init, inv, "--image-hidden", "image_hidden", "image FFN width");
  key_option(init, inv, "--init-range", "init_range", "uniform init range");

  auto* fuse = app.add_subcommand("fuse", "fuse a sentence with its retrieved images");
  common(fuse);
  FuseArgs fuse_args;
  fuse->add_option("--index-or-table", fuse_args.source, "lookup table or embedding index")
      ->required();
  fuse->add_option("--text", fuse_args.text, "sentence")->required();
  fuse->add_option("--pair", fuse_args.pair, "second sentence of a pair");
  fuse->add_option("--lambda", fuse_args.fixed_lambda, "fixed gate value in [0, 1]")
      ->check(CLI::Range(0.0, 1.0));
  fuse->add_flag("--dump", fuse_args.dump, "include alpha and lambda");
  key_option(fuse, inv, "--features", "features", "image feature file");
  key_option(fuse, inv, "--params", "params", "fusion parameter file");
  key_option(fuse, inv, "-w,--topics", "w", "topic words per sentence");
  key_option(fuse, inv, "--delta", "delta", "similarity threshold");
  std::optional<std::string> fuse_m;
  fuse->add_option("-m", fuse_m, "images per sentence");
  ablation_options(fuse, inv);

  auto* grad = app.add_subcommand("gradcheck", "compare analytic and numeric gradients");
  common(grad);
  std::size_t fixtures = 20;
  grad->add_option("--fixtures", fixtures, "fixtures per model")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "metric vs parameter as CSV");
  common(sweep);
  std::string sweep_param, sweep_grid;
  sweep->add_option("--param", sweep_param, "m|delta|lambda")->required();
  sweep->add_option("--grid", sweep_grid, "comma-separated values")->required();
  key_option(sweep, inv, "--corpus", "corpus", "training corpus (default: planted corpus)");
  key_option(sweep, inv, "--heldout", "heldout", "held-out corpus");
  key_option(sweep, inv, "--stopwords", "stopwords", "stopword list");
  key_option(sweep, inv, "--features", "features", "image feature file");
  key_option(sweep, inv, "--epochs", "epochs", "training epochs");
  key_option(sweep, inv, "--delta", "delta", "similarity threshold");
  key_option(sweep, inv, "-w,--topics", "w", "topic words per sentence");

  auto* synth = app.add_subcommand("make-synthetic", "write the planted evaluation corpus");
  common(synth);
  key_option(synth, inv, "--out", "out", "output directory");
  key_option(synth, inv, "--feature-dim", "feature_dim", "feature dimension");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "uvr: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (retrieve->parsed() && retrieve_m) {
      inv.overrides[mode == "tilt" ? "m_tilt" : "m_cmrm"] = *retrieve_m;
    }
    if (fuse->parsed() && fuse_m) {
      const std::string magic = magic_of(read_file(fuse_args.source));
      inv.overrides[magic == "UVRE" ? "m_cmrm" : "m_tilt"] = *fuse_m;
    }
    if (build->parsed()) return cmd_build_table(inv, out, err);
    if (retrieve->parsed()) return cmd_retrieve(inv, mode, text, out);
    if (train->parsed()) return cmd_train(inv, out, err);
    if (init->parsed()) return cmd_init_params(inv, init_from, out);
    if (fuse->parsed()) return cmd_fuse(inv, fuse_args, out);
    if (grad->parsed()) return cmd_gradcheck(inv, fixtures, out, err);
    if (sweep->parsed()) return cmd_sweep(inv, sweep_param, sweep_grid, out, err);
    if (synth->parsed()) return cmd_make_synthetic(inv, out);
  } catch (const UsageError& e) {
    err << "uvr: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "uvr: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "uvr: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "uvr: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace uvr
