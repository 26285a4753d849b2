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
#include <string>
#include <vector>

#include "uvr/tensor.hpp"

namespace uvr {

/// max |a - n| / max(|a|_inf, |n|_inf, 1e-4)
double relative_error(const Matrix& analytic, const Matrix& numeric);

struct GradCheckEntry {
  std::string tensor;
  double max_rel_error = 0.0;
  std::size_t fixtures = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  std::size_t fusion_fixtures = 0;
  std::size_t cmrm_fixtures = 0;
  std::size_t skipped = 0;

  bool pass() const;
  std::string to_jsonl() const;
};

struct GradCheckOptions {
  std::uint64_t seed = 1234;
  std::size_t fusion_fixtures = 20;
  std::size_t cmrm_fixtures = 20;
  double step = 1e-5;
  double tolerance = 1e-4;
};

/// Compares analytic gradients of every encoder, fusion, text-embedding and
/// image-embedding tensor against central differences on random fixtures.
/// Fixtures whose perturbation would cross a ReLU or hinge kink, or flip a
/// mined negative, are redrawn.
GradCheckReport run_gradcheck(const GradCheckOptions& options = {});

}  // namespace uvr
