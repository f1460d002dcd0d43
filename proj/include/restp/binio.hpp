// Copyright 2026 The restp Authors. All Rights Reserved.
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

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "restp/error.hpp"

namespace restp {

// Little-endian stream helpers shared by the binary file formats
// (RTPT tensors, RTPC checkpoints, SVM models).

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError("truncated file while reading " + what);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

inline float read_f32(std::istream& is, const std::string& what) {
  std::uint32_t bits = read_u32(is, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline void write_f32_span(std::ostream& os, const float* p, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) write_f32(os, p[i]);
}

inline void read_f32_span(std::istream& is, float* p, std::size_t count, const std::string& what) {
  std::vector<char> raw(count * 4);
  if (!is.read(raw.data(), static_cast<std::streamsize>(raw.size()))) {
    throw FormatError("truncated file while reading " + what);
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i])) |
                         (static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + 1])) << 8) |
                         (static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + 2])) << 16) |
                         (static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + 3])) << 24);
    std::memcpy(&p[i], &bits, 4);
  }
}

inline std::ofstream open_out_binary(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  return is;
}

}  // namespace restp
