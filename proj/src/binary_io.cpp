/**
 * Copyright 2026, The polsar-srsr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "binary_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <vector>

#include "srsr/error.hpp"

namespace srsr::io {

namespace {

template <typename U>
void put_le(std::ofstream& out, U v) {
  std::array<char, sizeof(U)> buf{};
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf.data(), buf.size());
}

template <typename U>
U get_le(const char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return v;
}

}  // namespace

Writer::Writer(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::IoError, "cannot open for writing: " + path);
}

void Writer::magic(std::string_view m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }

void Writer::u16(std::uint16_t v) { put_le(out_, v); }

void Writer::u32(std::uint32_t v) { put_le(out_, v); }

void Writer::f64(double v) { put_le(out_, std::bit_cast<std::uint64_t>(v)); }

void Writer::f64s(std::span<const double> v) {
  if constexpr (std::endian::native == std::endian::little) {
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
  } else {
    for (double x : v) f64(x);
  }
}

void Writer::finish() {
  out_.flush();
  if (!out_) throw Error(ErrorCode::IoError, "write failed: " + path_);
  out_.close();
}

Reader::Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw Error(ErrorCode::IoError, "cannot open for reading: " + path);
  in_.seekg(0, std::ios::end);
  size_ = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0, std::ios::beg);
}

void Reader::read_bytes(char* dst, std::size_t n) {
  if (remaining() < n) throw Error(ErrorCode::TruncatedFile, path_);
  in_.read(dst, static_cast<std::streamsize>(n));
  if (!in_) throw Error(ErrorCode::TruncatedFile, path_);
}

void Reader::expect_magic(std::string_view m) {
  std::vector<char> buf(m.size());
  if (remaining() < m.size()) throw Error(ErrorCode::BadMagic, path_ + ": file shorter than magic");
  read_bytes(buf.data(), buf.size());
  if (std::memcmp(buf.data(), m.data(), m.size()) != 0) {
    throw Error(ErrorCode::BadMagic, path_ + ": expected " + std::string(m));
  }
}

std::uint16_t Reader::u16() {
  char b[2];
  read_bytes(b, 2);
  return get_le<std::uint16_t>(b);
}

std::uint32_t Reader::u32() {
  char b[4];
  read_bytes(b, 4);
  return get_le<std::uint32_t>(b);
}

double Reader::f64() {
  char b[8];
  read_bytes(b, 8);
  return std::bit_cast<double>(get_le<std::uint64_t>(b));
}

void Reader::f64s(std::span<double> out) {
  if (remaining() < out.size_bytes()) throw Error(ErrorCode::TruncatedFile, path_);
  if constexpr (std::endian::native == std::endian::little) {
    read_bytes(reinterpret_cast<char*>(out.data()), out.size_bytes());
  } else {
    for (double& x : out) x = f64();
  }
}

std::uint64_t Reader::remaining() {
  const auto pos = in_.tellg();
  if (pos < 0) return 0;
  return size_ - static_cast<std::uint64_t>(pos);
}

}  // namespace srsr::io
