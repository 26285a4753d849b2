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

#include "uvr/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>
#include "uvr/cmrm.hpp"
#include "uvr/error.hpp"
#include "uvr/fusion.hpp"
#include "uvr/rng.hpp"

namespace uvr {

namespace {

constexpr double kKinkClearance = 1e-3;
constexpr std::size_t kMaxRedraws = 1000;

template <typename T>
std::size_t pick(const T& choices, Rng& rng) {
  return choices[rng.below(choices.size())];
}

template <typename Model>
std::vector<Matrix*> tensors_of(Model& model, std::vector<std::string>* names = nullptr) {
  std::vector<Matrix*> out;
  model.for_each_tensor([&](const std::string& name, Matrix& t) {
    out.push_back(&t);
    if (names) names->push_back(name);
  });
  return out;
}

class Accumulator {
 public:
  explicit Accumulator(double tolerance) : tolerance_(tolerance) {}

  void record(const std::string& name, double err) {
    auto [it, inserted] = index_.try_emplace(name, entries_.size());
    if (inserted) entries_.push_back({name, 0.0, 0, true});
    auto& e = entries_[it->second];
    e.max_rel_error = std::max(e.max_rel_error, err);
    ++e.fixtures;
    e.pass = e.pass && err <= tolerance_;
  }

  std::vector<GradCheckEntry> take() { return std::move(entries_); }

 private:
  double tolerance_;
  std::map<std::string, std::size_t> index_;
  std::vector<GradCheckEntry> entries_;
};

template <typename Model>
void compare_all(Model& model, Model& analytic, const std::function<double(const Model&)>& loss,
                 double step, Accumulator& acc) {
  std::vector<std::string> names;
  auto params = tensors_of(model, &names);
  auto grads = tensors_of(analytic);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Model probe = model;
    Matrix* slot = tensors_of(probe)[k];
    const Matrix numeric = finite_diff_grad(
        [&](const Matrix& theta) {
          *slot = theta;
          return loss(probe);
        },
        *params[k], step);
    acc.record(names[k], relative_error(*grads[k], numeric));
  }
}

bool clear_of_kinks(const Matrix& pre_activation) {
  return std::all_of(pre_activation.values().begin(), pre_activation.values().end(),
                     [](double z) { return std::abs(z) > kKinkClearance; });
}

bool unfloored(const LayerNormCache& cache) {
  return std::none_of(cache.floored.begin(), cache.floored.end(), [](bool f) { return f; });
}

bool fusion_fixture(Rng& rng, std::size_t index, double step, Accumulator& acc) {
  constexpr std::array<std::size_t, 3> lengths = {1, 2, 5};
  constexpr std::array<std::size_t, 2> dims = {8, 16};
  constexpr std::array<std::size_t, 4> head_counts = {1, 2, 4, 8};
  constexpr std::size_t vocab = 7, feature_dim = 6, n_images = 6;

  const std::size_t n = pick(lengths, rng);
  const std::size_t m = pick(lengths, rng);
  FusionModelConfig config;
  config.dim = pick(dims, rng);
  config.heads = pick(head_counts, rng);
  config.ffn_hidden = 10;
  config.image_hidden = 9;
  config.init_range = 0.5;
  config.seed = rng.next();
  FusionModel model = FusionModel::init(vocab, feature_dim, config);
  for (Matrix* scale : {&model.encoder.ln1_scale, &model.encoder.ln2_scale,
                        &model.fusion.ln_scale}) {
    *scale = Matrix::uniform(1, config.dim, 0.5, 1.5, rng);
  }
  for (Matrix* shift : {&model.encoder.ln1_shift, &model.encoder.ln2_shift,
                        &model.fusion.ln_shift}) {
    *shift = Matrix::uniform(1, config.dim, -0.5, 0.5, rng);
  }
  const FeatureTable features =
      FeatureTable::from_image_rows(Matrix::uniform(n_images, feature_dim, -1.0, 1.0, rng));

  Sentence sentence;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<TokenId>(rng.below(vocab));
    sentence.tokens.push_back({"t" + std::to_string(id), id});
  }
  RankedImages ranked;
  ranked.m = m;
  for (std::size_t j = 0; j < m; ++j) {
    ranked.images.push_back(static_cast<ImageId>(rng.below(n_images + 1)));
    ranked.scores.push_back(0.0);
  }
  FusionOptions options;
  if (index % 5 == 4) options.fixed_lambda = 0.3;
  const Matrix upstream = Matrix::uniform(n, config.dim, -1.0, 1.0, rng);

  const FusionTrace trace = fuse_sentence(sentence, ranked, features, model, options);
  if (!clear_of_kinks(trace.encoder.ffn.pre_activation) ||
      !clear_of_kinks(trace.image.ffn.pre_activation) || !unfloored(trace.encoder.ln1) ||
      !unfloored(trace.encoder.ln2) || !unfloored(trace.ln)) {
    return false;
  }
  FusionModel analytic = backward(trace, model, upstream);
  compare_all<FusionModel>(
      model, analytic,
      [&](const FusionModel& probe) {
        return sum(hadamard(upstream,
                            fuse_sentence(sentence, ranked, features, probe, options).out.h_hat));
      },
      step, acc);
  return true;
}

bool cmrm_fixture(Rng& rng, std::size_t index, double step, Accumulator& acc) {
  constexpr std::size_t vocab = 8, feature_dim = 4, n_images = 6, batch_size = 4;
  constexpr double margin = 0.5;
  CmrmConfig config;
  config.text_dim = 5;
  config.embed_dim = 6;
  config.seed = rng.next();
  CmrmParams params = init_cmrm_params(vocab, feature_dim, config);
  params.text.token_table = Matrix::uniform(vocab, config.text_dim, -1.0, 1.0, rng);
  params.text.bias = Matrix::uniform(1, config.embed_dim, -0.3, 0.3, rng);
  params.image.bias = Matrix::uniform(1, config.embed_dim, -0.3, 0.3, rng);
  const FeatureTable features =
      FeatureTable::from_image_rows(Matrix::uniform(n_images, feature_dim, -1.0, 1.0, rng));
  const NegativeScope scope = index % 2 == 0 ? NegativeScope::kBatch : NegativeScope::kGlobal;

  std::vector<Sentence> sentences(batch_size);
  std::vector<TripletSample> batch;
  for (auto& s : sentences) {
    const std::size_t len = 1 + rng.below(4);
    for (std::size_t i = 0; i < len; ++i) {
      const auto id = static_cast<TokenId>(rng.below(vocab));
      s.tokens.push_back({"t" + std::to_string(id), id});
    }
    batch.push_back({&s, static_cast<ImageId>(1 + rng.below(n_images))});
  }

  CmrmParams analytic;
  const ObjectiveResult r = triplet_objective(params, features, batch, margin, scope, &analytic);
  if (!(r.loss > 0.0) || r.kink_distance < kKinkClearance || r.mining_gap < kKinkClearance) {
    return false;
  }
  compare_all<CmrmParams>(
      params, analytic,
      [&](const CmrmParams& probe) {
        return triplet_objective(probe, features, batch, margin, scope).loss;
      },
      step, acc);
  return true;
}

}  // namespace

double relative_error(const Matrix& analytic, const Matrix& numeric) {
  require_same_shape(analytic, numeric, "relative_error");
  const double scale = std::max({max_abs(analytic), max_abs(numeric), 1e-4});
  return max_abs_diff(analytic, numeric) / scale;
}

bool GradCheckReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

std::string GradCheckReport::to_jsonl() const {
  std::string out;
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["tensor"] = e.tensor;
    j["max_rel_error"] = e.max_rel_error;
    j["fixtures"] = e.fixtures;
    j["pass"] = e.pass;
    out += j.dump() + "\n";
  }
  return out;
}

GradCheckReport run_gradcheck(const GradCheckOptions& options) {
  Accumulator acc(options.tolerance);
  GradCheckReport report;
  auto run = [&](std::size_t count, std::uint64_t stream, auto&& fixture) {
    Rng rng(derive_seed(options.seed, stream));
    std::size_t done = 0, attempts = 0;
    while (done < count) {
      if (++attempts > count * kMaxRedraws) {
        throw NumericalError("gradient check could not draw kink-free fixtures");
      }
      if (fixture(rng, done, options.step, acc)) {
        ++done;
      } else {
        ++report.skipped;
      }
    }
    return done;
  };
  report.fusion_fixtures = run(options.fusion_fixtures, 1, fusion_fixture);
  report.cmrm_fixtures = run(options.cmrm_fixtures, 2, cmrm_fixture);
  report.entries = acc.take();
  return report;
}

}  // namespace uvr
