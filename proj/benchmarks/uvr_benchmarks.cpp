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

#include <benchmark/benchmark.h>

#include "uvr/cmrm.hpp"
#include "uvr/fusion.hpp"
#include "uvr/rng.hpp"
#include "uvr/synthetic.hpp"
#include "uvr/tensor.hpp"
#include "uvr/tilt.hpp"

namespace {

using namespace uvr;

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix a = Matrix::uniform(n, n, -1, 1, rng);
  const Matrix b = Matrix::uniform(n, n, -1, 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNCubed);

void BM_FusionForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  FusionModelConfig c;
  const FusionModel model = FusionModel::init(100, 48, c);
  Rng rng(2);
  const FeatureTable features = FeatureTable::from_image_rows(Matrix::uniform(50, 48, -1, 1, rng));
  Sentence s;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<TokenId>(rng.below(100));
    s.tokens.push_back({"t" + std::to_string(id), id});
  }
  RankedImages ranked;
  ranked.m = 5;
  for (ImageId id = 1; id <= 5; ++id) {
    ranked.images.push_back(id);
    ranked.scores.push_back(0.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(fuse_sentence(s, ranked, features, model));
}
BENCHMARK(BM_FusionForward)->Arg(8)->Arg(32)->Arg(128);

struct Planted {
  PlantedCorpus raw = make_planted_corpus();
  CaptionCorpus train = build_corpus(raw.train, raw.stopwords);
};

const Planted& planted() {
  static const Planted p;
  return p;
}

void BM_TiltRetrieve(benchmark::State& state) {
  const auto& p = planted();
  const TiltArtifact art = build_tilt(p.train, 8);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& s = p.train.pairs[i++ % p.train.pairs.size()].sentence;
    benchmark::DoNotOptimize(retrieve_tilt(s, art.table, art.dict, 8, 5));
  }
}
BENCHMARK(BM_TiltRetrieve);

void BM_CmrmRetrieve(benchmark::State& state) {
  const auto& p = planted();
  CmrmConfig c;
  c.epochs = 5;
  const JointEmbeddingIndex index = train_cmrm(p.train, p.raw.features, c).index;
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& s = p.train.pairs[i++ % p.train.pairs.size()].sentence;
    benchmark::DoNotOptimize(retrieve_cmrm(s, index, 0.4, 8));
  }
}
BENCHMARK(BM_CmrmRetrieve);

void BM_CmrmEpoch(benchmark::State& state) {
  const auto& p = planted();
  CmrmConfig c;
  c.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_cmrm(p.train, p.raw.features, c));
}
BENCHMARK(BM_CmrmEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
