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

#include <string>

#include "restp/binio.hpp"
#include "restp/tensor.hpp"

namespace restp {

// Raw tensor fixture format ("RTPT"): magic, u32 version, four u32 dims,
// all little-endian, followed by the f32 payload in n,c,h,w order.

inline constexpr std::uint32_t kRtptVersion = 1;

inline void write_rtpt(const std::string& path, const Tensor& t) {
  auto os = open_out_binary(path);
  os.write("RTPT", 4);
  write_u32(os, kRtptVersion);
  for (int d : t.shape) write_u32(os, static_cast<std::uint32_t>(d));
  write_f32_span(os, t.data.data(), t.numel());
  if (!os) throw IoError("write failed: " + path);
}

inline Tensor read_rtpt(const std::string& path) {
  auto is = open_in_binary(path);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "RTPT") {
    throw FormatError("bad magic in " + path + " (expected RTPT)");
  }
  std::uint32_t version = read_u32(is, "version");
  if (version != kRtptVersion) {
    throw FormatError("unsupported RTPT version " + std::to_string(version) + " in " + path);
  }
  std::uint32_t dims[4];
  for (auto& d : dims) d = read_u32(is, "dims");
  for (auto d : dims) {
    if (d == 0 || d > (1u << 24)) throw FormatError("implausible dim " + std::to_string(d) + " in " + path);
  }
  Tensor t(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]),
           static_cast<int>(dims[3]));
  read_f32_span(is, t.data.data(), t.numel(), "payload of " + path);
  return t;
}

}  // namespace restp
