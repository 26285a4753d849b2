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

#include <stdexcept>
#include <string>

namespace uvr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (corpus lines, config files).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Binary artifact could not be read (bad magic, truncation, bad values).
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Artifact was written by an incompatible format version.
class IncompatibleVersionError : public LoadError {
 public:
  using LoadError::LoadError;
};

/// Tensor operands have inconsistent shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered or a numerical verification failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace uvr
