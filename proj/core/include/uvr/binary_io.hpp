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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "uvr/tensor.hpp"

namespace uvr {

/// Appends little-endian primitives to a byte buffer.
class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view raw);
  void string(std::string_view s);  // u32 length + bytes
  void matrix(const Matrix& m);     // u64 rows, u64 cols, f64 values

  const std::vector<std::uint8_t>& buffer() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader. Every overrun throws LoadError.
class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  explicit ByteReader(const std::vector<std::uint8_t>& buf) : ByteReader(buf.data(), buf.size()) {}

  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string bytes(std::size_t n);
  std::string string();
  Matrix matrix();

  std::size_t remaining() const { return size_ - pos_; }
  /// Throws LoadError if `count` items of `item_size` bytes cannot fit.
  void require(std::uint64_t count, std::size_t item_size, const char* what) const;
  void expect_end(const char* what) const;

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

using Magic = std::array<char, 4>;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so a failed write never
/// leaves a partial artifact at `path`.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Container layout: magic[4], u32 version, u64 payload length, payload.
std::vector<std::uint8_t> wrap_container(const Magic& magic, std::uint32_t version,
                                         const std::vector<std::uint8_t>& payload);
/// Validates magic, version and length field; returns the payload.
std::vector<std::uint8_t> unwrap_container(const std::vector<std::uint8_t>& bytes,
                                           const Magic& magic, std::uint32_t version);

std::string magic_of(const std::vector<std::uint8_t>& bytes);

}  // namespace uvr
