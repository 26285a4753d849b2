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

#include "uvr/ablation.hpp"

#include <numeric>
#include <vector>

#include "uvr/error.hpp"
#include "uvr/rng.hpp"

namespace uvr {

namespace {

std::uint64_t require_seed(const AblationMode& mode) {
  if (!mode.seed) throw ValidationError("ablation mode '" + mode.name() + "' requires a seed");
  return *mode.seed;
}

}  // namespace

AblationMode AblationMode::parse(std::string_view name, std::optional<std::uint64_t> seed) {
  AblationMode mode;
  mode.seed = seed;
  if (name == "none") {
    mode.kind = AblationKind::kNone;
  } else if (name == "shuffle") {
    mode.kind = AblationKind::kShuffle;
  } else if (name == "random_init") {
    mode.kind = AblationKind::kRandomInit;
  } else if (name == "random_mapping") {
    mode.kind = AblationKind::kRandomMapping;
  } else {
    throw ValidationError("unknown ablation mode '" + std::string(name) + "'");
  }
  if (mode.kind != AblationKind::kNone) require_seed(mode);
  return mode;
}

std::string AblationMode::name() const {
  switch (kind) {
    case AblationKind::kNone: return "none";
    case AblationKind::kShuffle: return "shuffle";
    case AblationKind::kRandomInit: return "random_init";
    case AblationKind::kRandomMapping: return "random_mapping";
  }
  return "unknown";
}

FeatureTable ablate_features(const FeatureTable& features, const AblationMode& mode) {
  switch (mode.kind) {
    case AblationKind::kNone:
      return features;
    case AblationKind::kShuffle: {
      Rng rng(require_seed(mode));
      std::vector<std::size_t> perm(features.n_images());
      std::iota(perm.begin(), perm.end(), std::size_t{1});
      rng.shuffle(perm.begin(), perm.end());
      Matrix rows(features.n_images(), features.dim());
      for (std::size_t i = 0; i < perm.size(); ++i) {
        const auto src = features.row(perm[i]);
        std::copy(src.begin(), src.end(), rows.row(i).begin());
      }
      return FeatureTable::from_image_rows(rows);
    }
    case AblationKind::kRandomInit: {
      Rng rng(require_seed(mode));
      return FeatureTable::from_image_rows(
          Matrix::uniform(features.n_images(), features.dim(), -1.0, 1.0, rng));
    }
    case AblationKind::kRandomMapping:
      break;
  }
  throw ValidationError("ablation mode '" + mode.name() + "' does not apply to features");
}

RankedImages ablate_retrieval(const RankedImages& ranked, std::size_t n_images,
                              const AblationMode& mode, std::uint64_t call_index) {
  if (mode.kind == AblationKind::kNone) return ranked;
  if (mode.kind != AblationKind::kRandomMapping) {
    throw ValidationError("ablation mode '" + mode.name() + "' does not apply to retrieval");
  }
  if (n_images < 1) throw ValidationError("random_mapping needs at least one image");
  Rng rng(derive_seed(require_seed(mode), call_index));
  RankedImages out = ranked;
  for (ImageId& id : out.images) id = static_cast<ImageId>(1 + rng.below(n_images));
  return out;
}

}  // namespace uvr
