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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "restp/error.hpp"
#include "restp/rng.hpp"
#include "restp/tensor.hpp"

namespace restp {

// ---------------------------------------------------------------------------
// Netpbm I/O. P6 (binary RGB) is the interchange format; P5 (binary gray) is
// accepted on read and expanded to three channels. Values map to [0,1].

namespace detail {

inline int read_pnm_token(std::istream& is, const std::string& path) {
  // Skips whitespace and '#' comments, then reads one nonnegative integer.
  for (;;) {
    int ch = is.peek();
    if (ch == '#') {
      std::string line;
      std::getline(is, line);
      continue;
    }
    if (std::isspace(ch)) {
      is.get();
      continue;
    }
    break;
  }
  int value = -1;
  is >> value;
  if (!is || value < 0) throw FormatError("malformed header in " + path);
  return value;
}

}  // namespace detail

inline Tensor read_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open image " + path);
  char m0 = 0, m1 = 0;
  is.get(m0);
  is.get(m1);
  const bool color = (m0 == 'P' && m1 == '6');
  const bool gray = (m0 == 'P' && m1 == '5');
  if (!color && !gray) throw FormatError("unsupported image magic in " + path);

  const int w = detail::read_pnm_token(is, path);
  const int h = detail::read_pnm_token(is, path);
  const int maxval = detail::read_pnm_token(is, path);
  if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16)) {
    throw FormatError("implausible image size in " + path);
  }
  if (maxval != 255) throw FormatError("only 8-bit images supported: " + path);
  is.get();  // single whitespace after maxval

  const int ch = color ? 3 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * ch);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!is) throw FormatError("truncated pixel data in " + path);

  Tensor t(1, 3, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * w + x) * ch;
      for (int c = 0; c < 3; ++c) {
        const unsigned char byte = raw[base + (color ? c : 0)];
        t.at(0, c, y, x) = static_cast<float>(byte) / 255.0f;
      }
    }
  }
  return t;
}

inline void write_ppm(const std::string& path, const Tensor& img) {
  if (img.n() != 1 || img.c() != 3) {
    throw DimensionError("write_ppm expects a (1,3,h,w) tensor, got " + img.shape_str());
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot create image " + path);
  os << "P6\n" << img.w() << " " << img.h() << "\n255\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(img.w()) * img.h() * 3);
  std::size_t i = 0;
  for (int y = 0; y < img.h(); ++y) {
    for (int x = 0; x < img.w(); ++x) {
      for (int c = 0; c < 3; ++c) {
        float v = std::clamp(img.at(0, c, y, x), 0.0f, 1.0f);
        raw[i++] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
  }
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!os) throw IoError("failed writing image " + path);
}

// ---------------------------------------------------------------------------
// Bilinear resize with half-pixel centers; constants stay constant and sizes
// may grow or shrink per axis independently.

inline Tensor bilinear_resize(const Tensor& in, int oh, int ow) {
  if (oh <= 0 || ow <= 0) throw DimensionError("resize target must be positive");
  if (in.h() == oh && in.w() == ow) return in;
  Tensor out(in.n(), in.c(), oh, ow);
  const double sy = static_cast<double>(in.h()) / oh;
  const double sx = static_cast<double>(in.w()) / ow;
  for (int n = 0; n < in.n(); ++n) {
    for (int c = 0; c < in.c(); ++c) {
      for (int y = 0; y < oh; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, in.h() - 1);
        int y1c = std::clamp(y0 + 1, 0, in.h() - 1);
        for (int x = 0; x < ow; ++x) {
          double fx = (x + 0.5) * sx - 0.5;
          int x0 = static_cast<int>(std::floor(fx));
          double wx = fx - x0;
          int x0c = std::clamp(x0, 0, in.w() - 1);
          int x1c = std::clamp(x0 + 1, 0, in.w() - 1);
          double top = (1 - wx) * in.at(n, c, y0c, x0c) + wx * in.at(n, c, y0c, x1c);
          double bot = (1 - wx) * in.at(n, c, y1c, x0c) + wx * in.at(n, c, y1c, x1c);
          out.at(n, c, y, x) = static_cast<float>((1 - wy) * top + wy * bot);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest: CSV of `path,class_name` rows; class ids follow sorted names.

struct ManifestRecord {
  std::string path;  // resolved absolute or root-relative path
  std::string class_name;
  int label = -1;
};

struct DatasetManifest {
  std::string root;
  std::vector<ManifestRecord> records;
  std::vector<std::string> class_names;  // sorted; index = label

  int num_classes() const { return static_cast<int>(class_names.size()); }

  std::vector<int> class_sizes() const {
    std::vector<int> sizes(class_names.size(), 0);
    for (const auto& r : records) ++sizes[r.label];
    return sizes;
  }
};

inline DatasetManifest load_manifest(const std::string& csv_path) {
  std::ifstream is(csv_path);
  if (!is) throw IoError("cannot open manifest " + csv_path);
  DatasetManifest m;
  m.root = std::filesystem::path(csv_path).parent_path().string();

  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty manifest " + csv_path);
  if (line != "path,class_name") {
    throw FormatError("manifest header must be 'path,class_name', got '" + line + "'");
  }
  std::map<std::string, std::vector<std::size_t>> by_class;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 >= line.size()) {
      throw FormatError("malformed manifest row '" + line + "'");
    }
    ManifestRecord rec;
    rec.path = line.substr(0, comma);
    rec.class_name = line.substr(comma + 1);
    by_class[rec.class_name].push_back(m.records.size());
    m.records.push_back(std::move(rec));
  }
  if (by_class.size() < 2) {
    throw DomainError("manifest needs at least 2 classes, found " +
                      std::to_string(by_class.size()));
  }
  for (const auto& [name, idxs] : by_class) m.class_names.push_back(name);
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < m.class_names.size(); ++i) {
    index[m.class_names[i]] = static_cast<int>(i);
  }
  for (auto& rec : m.records) rec.label = index[rec.class_name];
  return m;
}

struct NormalizeConfig {
  std::array<float, 3> mean = {0.5f, 0.5f, 0.5f};
  std::array<float, 3> stddev = {0.25f, 0.25f, 0.25f};
};

// Decoded corpus: one (1,3,s,s) tensor per record, resized and normalized.
struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<Tensor> images;
  std::vector<int> labels;

  int size() const { return static_cast<int>(images.size()); }
};

inline Tensor normalize_image(const Tensor& img, const NormalizeConfig& norm) {
  Tensor out = img;
  for (int c = 0; c < 3; ++c) {
    const float mean = norm.mean[c];
    const float inv = 1.0f / norm.stddev[c];
    for (int y = 0; y < out.h(); ++y) {
      for (int x = 0; x < out.w(); ++x) {
        out.at(0, c, y, x) = (out.at(0, c, y, x) - mean) * inv;
      }
    }
  }
  return out;
}

inline LoadedDataset load_dataset(const std::string& manifest_path, int input_h, int input_w,
                                  const NormalizeConfig& norm = {}) {
  LoadedDataset ds;
  ds.manifest = load_manifest(manifest_path);
  ds.images.reserve(ds.manifest.records.size());
  for (const auto& rec : ds.manifest.records) {
    std::filesystem::path p(rec.path);
    if (p.is_relative()) p = std::filesystem::path(ds.manifest.root) / p;
    Tensor img = read_pnm(p.string());
    img = bilinear_resize(img, input_h, input_w);
    ds.images.push_back(normalize_image(img, norm));
    ds.labels.push_back(rec.label);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic desk-scale corpus: oriented sinusoidal gratings, one orientation
// band per class, with per-image frequency and phase jitter plus pixel noise.
// Byte-deterministic for a fixed seed.

struct SynthConfig {
  int classes = 5;
  int per_class = 50;
  int size = 64;
  std::uint64_t seed = 1;
  double base_frequency = 7.0;   // cycles across the image
  double freq_jitter = 0.2;      // relative
  double noise = 0.06;
  double contrast = 0.42;
};

inline Tensor synth_image(const SynthConfig& cfg, int cls, int index) {
  Rng rng(Rng::derive(cfg.seed, (static_cast<std::uint64_t>(cls) << 32) |
                                    static_cast<std::uint64_t>(index)));
  // Class orientations tile half a turn; a seed-wide offset decouples the
  // band layout from the class ids.
  Rng global(Rng::derive(cfg.seed, 0x6f666673ull));  // independent of cls/index
  const double offset = global.uniform() * 3.14159265358979323846;
  const double theta =
      offset + 3.14159265358979323846 * static_cast<double>(cls) / cfg.classes;
  const double freq = cfg.base_frequency * (1.0 + cfg.freq_jitter * (2.0 * rng.uniform() - 1.0));
  const double phase = rng.uniform() * 2.0 * 3.14159265358979323846;
  const double kx = std::cos(theta) * 2.0 * 3.14159265358979323846 * freq / cfg.size;
  const double ky = std::sin(theta) * 2.0 * 3.14159265358979323846 * freq / cfg.size;

  Tensor img(1, 3, cfg.size, cfg.size);
  for (int y = 0; y < cfg.size; ++y) {
    for (int x = 0; x < cfg.size; ++x) {
      const double wave = std::sin(kx * x + ky * y + phase);
      const double base = 0.5 + cfg.contrast * wave;
      for (int c = 0; c < 3; ++c) {
        const double v = base + cfg.noise * rng.normal();
        img.at(0, c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return img;
}

// Writes the corpus under out_dir (created if needed) and returns the path of
// the manifest CSV.
inline std::string synth_dataset(const SynthConfig& cfg, const std::string& out_dir) {
  if (cfg.classes < 2) throw DomainError("synthetic corpus needs at least 2 classes");
  if (cfg.per_class < 1 || cfg.size < 8) throw ConfigError("invalid synthetic corpus shape");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::ostringstream manifest;
  manifest << "path,class_name\n";
  for (int cls = 0; cls < cfg.classes; ++cls) {
    char cname[32];
    std::snprintf(cname, sizeof(cname), "class_%02d", cls);
    fs::create_directories(fs::path(out_dir) / cname);
    for (int i = 0; i < cfg.per_class; ++i) {
      char fname[64];
      std::snprintf(fname, sizeof(fname), "%s/img_%04d.ppm", cname, i);
      write_ppm((fs::path(out_dir) / fname).string(), synth_image(cfg, cls, i));
      manifest << fname << "," << cname << "\n";
    }
  }
  const std::string manifest_path = (fs::path(out_dir) / "manifest.csv").string();
  std::ofstream os(manifest_path, std::ios::binary);
  if (!os) throw IoError("cannot write manifest " + manifest_path);
  os << manifest.str();
  return manifest_path;
}

}  // namespace restp
