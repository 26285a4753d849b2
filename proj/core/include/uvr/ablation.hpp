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
#include <optional>
#include <string>
#include <string_view>

#include "uvr/corpus.hpp"
#include "uvr/tilt.hpp"

namespace uvr {

enum class AblationKind { kNone, kShuffle, kRandomInit, kRandomMapping };

/// A controlled corruption of the visual side. Every mode except kNone needs
/// a seed.
struct AblationMode {
  AblationKind kind = AblationKind::kNone;
  std::optional<std::uint64_t> seed;

  static AblationMode parse(std::string_view name, std::optional<std::uint64_t> seed);
  std::string name() const;
};

/// shuffle: seeded permutation of rows 1..n; random_init: rows 1..n redrawn
/// uniform(-1, 1); none: identity. Row 0 is never touched.
FeatureTable ablate_features(const FeatureTable& features, const AblationMode& mode);

/// random_mapping: every id replaced by a uniform draw from 1..n_images.
/// `call_index` selects an independent stream so repeated retrievals are
/// resampled but reproducible.
RankedImages ablate_retrieval(const RankedImages& ranked, std::size_t n_images,
                              const AblationMode& mode, std::uint64_t call_index = 0);

}  // namespace uvr
