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
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "restp/binio.hpp"
#include "restp/error.hpp"
#include "restp/network.hpp"
#include "restp/tensor.hpp"

namespace restp {

// Named-parameter store. Tensors cover both trainable parameters and batch
// norm running statistics; the frozen set and bookkeeping live in metadata.
struct Checkpoint {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> metadata;

  std::set<std::string> frozen() const {
    std::set<std::string> out;
    auto it = metadata.find("frozen");
    if (it == metadata.end() || it->second.empty()) return out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) out.insert(item);
    return out;
  }

  void set_frozen(const std::set<std::string>& groups) {
    std::string joined;
    for (const auto& g : groups) {
      if (!joined.empty()) joined += ',';
      joined += g;
    }
    metadata["frozen"] = joined;
  }
};

// File format: magic "RTPC", u32 version, u32 metadata length, metadata bytes
// (UTF-8 key=value lines), then per-tensor records of (u32 name length, name
// bytes, four u32 dims, f32 payload) until end of file. All little-endian.
inline constexpr std::uint32_t kRtpcVersion = 1;

inline void write_rtpc(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os = open_out_binary(path);
  os.write("RTPC", 4);
  write_u32(os, kRtpcVersion);

  std::string meta;
  for (const auto& [k, v] : ckpt.metadata) {
    meta += k;
    meta += '=';
    meta += v;
    meta += '\n';
  }
  write_u32(os, static_cast<std::uint32_t>(meta.size()));
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));

  for (const auto& [name, t] : ckpt.tensors) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    for (int d : t.shape) write_u32(os, static_cast<std::uint32_t>(d));
    write_f32_span(os, t.data.data(), t.data.size());
  }
  if (!os) throw IoError("failed writing checkpoint " + path);
}

inline Checkpoint read_rtpc(const std::string& path) {
  std::ifstream is = open_in_binary(path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "RTPC") {
    throw FormatError("not a checkpoint file (bad magic): " + path);
  }
  std::uint32_t version = read_u32(is, "checkpoint version");
  if (version != kRtpcVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }

  Checkpoint ckpt;
  std::uint32_t meta_len = read_u32(is, "metadata length");
  std::string meta(meta_len, '\0');
  is.read(meta.data(), meta_len);
  if (!is) throw FormatError("truncated file while reading checkpoint metadata");
  std::stringstream ms(meta);
  std::string line;
  while (std::getline(ms, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("malformed metadata line '" + line + "'");
    }
    ckpt.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }

  while (is.peek() != EOF) {
    std::uint32_t name_len = read_u32(is, "tensor name length");
    if (name_len == 0 || name_len > 4096) {
      throw FormatError("implausible tensor name length " + std::to_string(name_len));
    }
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw FormatError("truncated file while reading tensor name");
    int dims[4];
    for (int& d : dims) {
      std::uint32_t v = read_u32(is, "tensor dim of " + name);
      if (v == 0 || v > (1u << 24)) {
        throw FormatError("implausible dimension " + std::to_string(v) + " for " + name);
      }
      d = static_cast<int>(v);
    }
    Tensor t(dims[0], dims[1], dims[2], dims[3]);
    read_f32_span(is, t.data.data(), t.data.size(), "payload of " + name);
    ckpt.tensors.emplace(std::move(name), std::move(t));
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// Network <-> checkpoint bridging.

inline Checkpoint checkpoint_from(Network& net) {
  Checkpoint ckpt;
  net.for_each_param([&](const std::string&, const std::string& name, Tensor& t) {
    Tensor copy = t;
    copy.grad.clear();
    ckpt.tensors.emplace(name, std::move(copy));
  });
  net.for_each_state([&](const std::string&, const std::string& name, Tensor& t) {
    ckpt.tensors.emplace(name, t);
  });
  ckpt.metadata["config"] = net.config.canonical();
  ckpt.metadata["config_hash"] = std::to_string(net.config.hash());
  ckpt.set_frozen(net.frozen_groups());
  return ckpt;
}

// Copies checkpoint tensors into the network. Strict mode demands an exact
// one-to-one name match; non-strict loads the intersection (so a checkpoint
// from a single-pathway run can seed a two-pathway network, leaving the other
// pathway at its current values). A shape clash is an error in both modes.
inline void load_into(Network& net, const Checkpoint& ckpt, bool strict) {
  std::set<std::string> net_names;
  std::vector<std::string> missing;

  auto apply = [&](const std::string& name, Tensor& t) {
    net_names.insert(name);
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) {
      missing.push_back(name);
      return;
    }
    if (!t.same_shape(it->second)) {
      throw DimensionError("checkpoint tensor " + name + " has shape " +
                           it->second.shape_str() + ", network expects " + t.shape_str());
    }
    t.data = it->second.data;
  };
  net.for_each_param([&](const std::string&, const std::string& name, Tensor& t) {
    apply(name, t);
  });
  net.for_each_state([&](const std::string&, const std::string& name, Tensor& t) {
    apply(name, t);
  });

  if (strict) {
    std::string problems;
    for (const auto& [name, t] : ckpt.tensors) {
      if (!net_names.count(name)) problems += "\n  unknown in network: " + name;
    }
    for (const auto& name : missing) problems += "\n  missing in checkpoint: " + name;
    if (!problems.empty()) {
      throw ConfigError("strict checkpoint load failed:" + problems);
    }
  }
}

inline void save_checkpoint(Network& net, const std::string& path,
                            const std::map<std::string, std::string>& extra = {}) {
  Checkpoint ckpt = checkpoint_from(net);
  for (const auto& [k, v] : extra) ckpt.metadata[k] = v;
  write_rtpc(path, ckpt);
}

inline Checkpoint load_checkpoint(Network& net, const std::string& path, bool strict) {
  Checkpoint ckpt = read_rtpc(path);
  load_into(net, ckpt, strict);
  return ckpt;
}

// Removes every tensor whose name starts with prefix + "/" (or equals it);
// used to shed a classifier head when transferring across label sets.
inline Checkpoint drop_prefix(const Checkpoint& in, const std::string& prefix) {
  Checkpoint out;
  out.metadata = in.metadata;
  for (const auto& [name, t] : in.tensors) {
    if (name == prefix || name.rfind(prefix + "/", 0) == 0) continue;
    out.tensors.emplace(name, t);
  }
  return out;
}

}  // namespace restp
