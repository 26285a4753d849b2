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

#include "uvr/binary_io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "uvr/error.hpp"

namespace uvr {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

void ByteWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void ByteWriter::f32(float v) { put_le(buf_, std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::bytes(std::string_view raw) { buf_.insert(buf_.end(), raw.begin(), raw.end()); }

void ByteWriter::string(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("string too long to serialize");
  }
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s);
}

void ByteWriter::matrix(const Matrix& m) {
  u64(m.rows());
  u64(m.cols());
  for (double v : m.values()) f64(v);
}

void ByteReader::require(std::uint64_t count, std::size_t item_size, const char* what) const {
  if (item_size != 0 && count > remaining() / item_size) {
    throw LoadError(std::string("truncated payload while reading ") + what);
  }
}

void ByteReader::expect_end(const char* what) const {
  if (remaining() != 0) {
    throw LoadError(std::string("unexpected trailing bytes after ") + what);
  }
}

std::uint32_t ByteReader::u32() {
  require(1, 4, "u32");
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  require(1, 8, "u64");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::bytes(std::size_t n) {
  require(n, 1, "bytes");
  std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
  pos_ += n;
  return s;
}

std::string ByteReader::string() { return bytes(u32()); }

Matrix ByteReader::matrix() {
  const std::uint64_t rows = u64();
  const std::uint64_t cols = u64();
  if (cols != 0 && rows > std::numeric_limits<std::uint64_t>::max() / cols) {
    throw LoadError("matrix dimensions overflow");
  }
  require(rows * cols, 8, "matrix");
  std::vector<double> data(rows * cols);
  for (double& v : data) {
    v = f64();
    if (!std::isfinite(v)) throw LoadError("matrix contains a non-finite value");
  }
  return Matrix(rows, cols, std::move(data));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw LoadError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw LoadError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::uint8_t> wrap_container(const Magic& magic, std::uint32_t version,
                                         const std::vector<std::uint8_t>& payload) {
  ByteWriter w;
  w.bytes(std::string_view(magic.data(), magic.size()));
  w.u32(version);
  w.u64(payload.size());
  auto out = w.take();
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::vector<std::uint8_t> unwrap_container(const std::vector<std::uint8_t>& bytes,
                                           const Magic& magic, std::uint32_t version) {
  ByteReader r(bytes);
  const std::string name(magic.data(), magic.size());
  if (r.remaining() < 4 || r.bytes(4) != name) {
    throw LoadError("bad magic: expected " + name);
  }
  const std::uint32_t found = r.u32();
  if (found != version) {
    throw IncompatibleVersionError(name + " version " + std::to_string(found) +
                                   " is not supported (expected " + std::to_string(version) + ")");
  }
  const std::uint64_t length = r.u64();
  if (length != r.remaining()) {
    throw LoadError(name + " length field says " + std::to_string(length) + " bytes, found " +
                    std::to_string(r.remaining()));
  }
  return {bytes.begin() + 16, bytes.end()};
}

std::string magic_of(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) return {};
  return std::string(bytes.begin(), bytes.begin() + 4);
}

}  // namespace uvr
