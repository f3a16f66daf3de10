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

// Little-endian binary helpers shared by the raster, feature and checkpoint
// formats. Byte order is fixed regardless of host.

#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

namespace srsr::io {

class Writer {
 public:
  explicit Writer(const std::string& path);
  void magic(std::string_view m);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void f64(double v);
  void f64s(std::span<const double> v);
  void finish();

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path);
  /// Throws BadMagic when the leading bytes differ from `m`.
  void expect_magic(std::string_view m);
  std::uint16_t u16();
  std::uint32_t u32();
  double f64();
  void f64s(std::span<double> out);
  /// Bytes left between the cursor and end of file.
  std::uint64_t remaining();

 private:
  void read_bytes(char* dst, std::size_t n);

  std::string path_;
  std::ifstream in_;
  std::uint64_t size_ = 0;
};

}  // namespace srsr::io
