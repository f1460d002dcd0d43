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

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "restp/blocks.hpp"
#include "restp/conv.hpp"
#include "restp/error.hpp"
#include "restp/ops.hpp"
#include "restp/rng.hpp"
#include "restp/tensor.hpp"

namespace restp {

enum class Pathways { both, conv5_1_only, conv5_2_only };

inline std::string pathways_name(Pathways p) {
  switch (p) {
    case Pathways::both: return "both";
    case Pathways::conv5_1_only: return "conv5_1_only";
    case Pathways::conv5_2_only: return "conv5_2_only";
  }
  return "?";
}

inline Pathways parse_pathways(const std::string& s) {
  if (s == "both") return Pathways::both;
  if (s == "5_1" || s == "conv5_1_only" || s == "conv5_1") return Pathways::conv5_1_only;
  if (s == "5_2" || s == "conv5_2_only" || s == "conv5_2") return Pathways::conv5_2_only;
  throw ConfigError("unknown pathways selection '" + s + "'");
}

// The canonical group names, in forward order. "conv1" covers the stem conv
// and its pool; "fc" is the classifier head.
inline const std::vector<std::string>& group_names() {
  static const std::vector<std::string> names = {"conv1",     "conv2_x",    "conv3_x", "conv4_x",
                                                 "conv5_1_x", "conv5_2_x", "fc"};
  return names;
}

// Accepts common shorthand ("conv2", "conv5_1") for a canonical group name.
inline std::string normalize_group_name(const std::string& raw) {
  std::string s = raw;
  if (s == "conv1_x") s = "conv1";
  for (const auto& name : group_names()) {
    if (s == name) return name;
    if (name.size() > 2 && name.substr(name.size() - 2) == "_x" &&
        s == name.substr(0, name.size() - 2)) {
      return name;
    }
  }
  throw ConfigError("unknown group name '" + raw + "'");
}

struct NetworkConfig {
  int depth = 18;  // {18, 34, 50, 101}
  int num_classes = 1000;
  int input_h = 224;
  int input_w = 224;
  double width_multiplier = 1.0;  // in (0, 1]
  Pathways pathways = Pathways::both;

  std::array<int, 4> block_counts() const {
    switch (depth) {
      case 18: return {2, 2, 2, 2};
      case 34:
      case 50: return {3, 4, 6, 3};
      case 101: return {3, 4, 23, 3};
      default: throw ConfigError("unsupported depth " + std::to_string(depth));
    }
  }

  BlockKind block_kind() const {
    return depth >= 50 ? BlockKind::bottleneck : BlockKind::basic;
  }

  // Channel counts scale by width_multiplier, rounded to multiples of 4 so
  // bottleneck mid-planes stay integral.
  int scaled(int channels) const {
    int quads = static_cast<int>(std::lround(channels * width_multiplier / 4.0));
    return std::max(4, 4 * quads);
  }

  int stem_channels() const { return scaled(64); }

  // Out-planes per residual group, in order conv2_x .. conv5.
  std::array<int, 4> group_planes() const {
    if (block_kind() == BlockKind::basic) {
      return {scaled(64), scaled(128), scaled(256), scaled(512)};
    }
    return {scaled(256), scaled(512), scaled(1024), scaled(2048)};
  }

  int pathway_channels() const { return group_planes()[3]; }

  int representation_length() const {
    return pathways == Pathways::both ? 2 * pathway_channels() : pathway_channels();
  }

  void validate() const {
    (void)block_counts();  // throws on bad depth
    if (num_classes < 2) {
      throw ConfigError("num_classes must be >= 2, got " + std::to_string(num_classes));
    }
    if (width_multiplier <= 0.0 || width_multiplier > 1.0) {
      throw ConfigError("width_multiplier must be in (0,1]");
    }
    if (input_h < 64 || input_w < 64) {
      throw ConfigError("input size " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                        " below the 64-pixel minimum for the downsampling chain");
    }
    // Walk the shape chain so a failure names the first group that breaks.
    int h = conv_out_dim(input_h, 7, 2, 1, 3);
    int w = conv_out_dim(input_w, 7, 2, 1, 3);
    if (h < 2 || w < 2) throw ConfigError("input too small at group conv1");
    if (h % 2 != 0 || w % 2 != 0) {
      throw ConfigError("group conv1 pool requires an even pre-pool size, got " +
                        std::to_string(h) + "x" + std::to_string(w) +
                        " (use an input size divisible by 4)");
    }
    h /= 2;
    w /= 2;
    const char* names[] = {"conv2_x", "conv3_x", "conv4_x", "conv5_1_x"};
    const int strides[] = {1, 2, 2, 2};
    for (int g = 0; g < 4; ++g) {
      h = conv_out_dim(h, 3, strides[g], 1, 1);
      w = conv_out_dim(w, 3, strides[g], 1, 1);
      if (h < 1 || w < 1) {
        throw ConfigError(std::string("input too small at group ") + names[g]);
      }
    }
  }

  // Stable key=value rendering; the checkpoint metadata hash is over this.
  std::string canonical() const {
    std::ostringstream os;
    os << "depth=" << depth << ";classes=" << num_classes << ";input=" << input_h << "x"
       << input_w << ";width=" << width_multiplier << ";pathways=" << pathways_name(pathways);
    return os.str();
  }

  std::uint64_t hash() const {
    // FNV-1a over the canonical string.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : canonical()) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    return h;
  }
};

// Inverse of NetworkConfig::canonical(), used to rebuild a network from
// checkpoint metadata alone.
inline NetworkConfig config_from_canonical(const std::string& text) {
  NetworkConfig cfg;
  std::istringstream is(text);
  std::string part;
  while (std::getline(is, part, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw FormatError("bad config entry '" + part + "'");
    const std::string key = part.substr(0, eq);
    const std::string value = part.substr(eq + 1);
    try {
      if (key == "depth") {
        cfg.depth = std::stoi(value);
      } else if (key == "classes") {
        cfg.num_classes = std::stoi(value);
      } else if (key == "input") {
        const auto x = value.find('x');
        if (x == std::string::npos) throw FormatError("bad input size '" + value + "'");
        cfg.input_h = std::stoi(value.substr(0, x));
        cfg.input_w = std::stoi(value.substr(x + 1));
      } else if (key == "width") {
        cfg.width_multiplier = std::stod(value);
      } else if (key == "pathways") {
        cfg.pathways = parse_pathways(value);
      } else {
        throw FormatError("unknown config key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw FormatError("unparsable config value '" + part + "'");
    }
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

template <typename T>
struct NetCacheT {
  TensorT<T> x;
  TensorT<T> c1, b1, r1;
  PoolResultT<T> pool;
  BatchNormCacheT<T> bnc1;
  std::vector<BlockCacheT<T>> g2, g3, g4, g51, g52;
  TensorT<T> feat4;          // conv4_x output feeding both pathways
  TensorT<T> f51, f52;       // pathway conv outputs
  TensorT<T> gap51, gap52;   // pooled representations
};

template <typename T>
struct RepresentationT {
  TensorT<T> values;  // (n, total_channels, 1, 1), conv5_1 part first
  int boundary = 0;   // channel index where the conv5_2 part starts
};

using Representation = RepresentationT<float>;

// Two-pathway residual network. Groups conv1 (stem + pool) and conv2_x to
// conv4_x form the shared trunk; conv5_1_x (stride 2, d=1) and conv5_2_x
// (stride 1, d=2) both consume the trunk output. Each pathway is pooled to a
// vector and a single FC head scores the concatenation, conv5_1 part first.
// The head weight is stored per pathway so either half can be loaded, saved,
// or trained independently of the other.
template <typename T>
class NetworkT {
 public:
  NetworkConfig config;
  ConvParamsT<T> conv1;
  BatchNormParamsT<T> bn1;
  std::vector<ResidualBlockT<T>> conv2_x, conv3_x, conv4_x, conv5_1_x, conv5_2_x;
  TensorT<T> fc_w_5_1, fc_w_5_2;  // (num_classes, pathway_channels, 1, 1)
  TensorT<T> fc_bias;             // (1, num_classes, 1, 1)

  NetworkT() = default;

  explicit NetworkT(const NetworkConfig& cfg) : config(cfg) {
    config.validate();
    const auto counts = config.block_counts();
    const auto planes = config.group_planes();
    const BlockKind kind = config.block_kind();
    const int stem = config.stem_channels();

    conv1 = ConvParamsT<T>(3, stem, 7, 7, 2, 1, 3, false);
    bn1 = BatchNormParamsT<T>(stem);

    auto make_group = [&](int count, int in, int out, int first_stride, int dilation) {
      std::vector<ResidualBlockT<T>> group;
      group.reserve(count);
      for (int i = 0; i < count; ++i) {
        BlockSpec spec{kind, i == 0 ? in : out, out, i == 0 ? first_stride : 1, dilation};
        group.emplace_back(spec);
      }
      return group;
    };

    conv2_x = make_group(counts[0], stem, planes[0], 1, 1);
    conv3_x = make_group(counts[1], planes[0], planes[1], 2, 1);
    conv4_x = make_group(counts[2], planes[1], planes[2], 2, 1);
    if (has_5_1()) conv5_1_x = make_group(counts[3], planes[2], planes[3], 2, 1);
    if (has_5_2()) conv5_2_x = make_group(counts[3], planes[2], planes[3], 1, 2);

    const int pc = config.pathway_channels();
    if (has_5_1()) fc_w_5_1 = TensorT<T>(config.num_classes, pc, 1, 1);
    if (has_5_2()) fc_w_5_2 = TensorT<T>(config.num_classes, pc, 1, 1);
    fc_bias = TensorT<T>(1, config.num_classes, 1, 1);
  }

  bool has_5_1() const { return config.pathways != Pathways::conv5_2_only; }
  bool has_5_2() const { return config.pathways != Pathways::conv5_1_only; }

  void init(Rng& rng) {
    conv1.he_init(rng);
    for (auto* group : {&conv2_x, &conv3_x, &conv4_x, &conv5_1_x, &conv5_2_x}) {
      for (auto& block : *group) block.init(rng);
    }
    const T fc_std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(
                                        config.representation_length())));
    if (has_5_1()) {
      for (auto& v : fc_w_5_1.data) v = static_cast<T>(rng.normal()) * fc_std;
    }
    if (has_5_2()) {
      for (auto& v : fc_w_5_2.data) v = static_cast<T>(rng.normal()) * fc_std;
    }
    fc_bias.fill(T(0));
  }

  // --- freeze handling ------------------------------------------------------

  const std::set<std::string>& frozen_groups() const { return frozen_; }

  void set_freeze(const std::set<std::string>& groups) {
    std::set<std::string> normalized;
    for (const auto& g : groups) normalized.insert(normalize_group_name(g));
    frozen_ = std::move(normalized);
  }

  bool is_frozen(const std::string& group) const { return frozen_.count(group) != 0; }

  // Frozen groups run batch norm in eval mode during training so their
  // running statistics stay untouched along with their parameters.
  Mode group_mode(const std::string& group, Mode requested) const {
    return (requested == Mode::train && is_frozen(group)) ? Mode::eval : requested;
  }

  // --- forward / backward ---------------------------------------------------

  TensorT<T> forward(const TensorT<T>& x, Mode mode, NetCacheT<T>* cache = nullptr) {
    check_input(x);
    NetCacheT<T> local;
    NetCacheT<T>& cc = cache ? *cache : local;

    cc.c1 = conv2d(x, conv1);
    cc.b1 = batch_norm(cc.c1, bn1, group_mode("conv1", mode), &cc.bnc1);
    cc.r1 = relu(cc.b1);
    cc.pool = max_pool2x2(cc.r1);

    TensorT<T> cur = cc.pool.y;
    cur = run_group(conv2_x, "conv2_x", cur, mode, cache ? &cc.g2 : nullptr);
    cur = run_group(conv3_x, "conv3_x", cur, mode, cache ? &cc.g3 : nullptr);
    cur = run_group(conv4_x, "conv4_x", cur, mode, cache ? &cc.g4 : nullptr);
    cc.feat4 = std::move(cur);

    TensorT<T> logits(x.n(), config.num_classes, 1, 1);
    for (int i = 0; i < x.n(); ++i) {
      for (int k = 0; k < config.num_classes; ++k) {
        logits.at(i, k, 0, 0) = fc_bias.data[k];
      }
    }
    if (has_5_1()) {
      cc.f51 = run_group(conv5_1_x, "conv5_1_x", cc.feat4, mode, cache ? &cc.g51 : nullptr);
      cc.gap51 = global_avg_pool(cc.f51);
      add_head(logits, cc.gap51, fc_w_5_1);
    }
    if (has_5_2()) {
      cc.f52 = run_group(conv5_2_x, "conv5_2_x", cc.feat4, mode, cache ? &cc.g52 : nullptr);
      cc.gap52 = global_avg_pool(cc.f52);
      add_head(logits, cc.gap52, fc_w_5_2);
    }
    if (cache) cache->x = x;
    return logits;
  }

  // Accumulates parameter gradients (grad buffers) and returns nothing; the
  // input gradient is not needed for training and is dropped at the stem.
  void backward(const NetCacheT<T>& cc, const TensorT<T>& upstream_logits) {
    TensorT<T> g_feat4(cc.feat4.n(), cc.feat4.c(), cc.feat4.h(), cc.feat4.w());

    auto head_backward = [&](const TensorT<T>& gap, TensorT<T>& w,
                             std::vector<ResidualBlockT<T>>& group,
                             const std::vector<BlockCacheT<T>>& caches,
                             const TensorT<T>& conv_out) {
      auto g = fully_connected_backward(gap, w, upstream_logits);
      w.accumulate_grad(g.weight);
      fc_bias.accumulate_grad(g.bias);
      TensorT<T> g_conv = global_avg_pool_backward(conv_out.h(), conv_out.w(), g.x);
      for (int i = static_cast<int>(group.size()) - 1; i >= 0; --i) {
        g_conv = group[i].backward(caches[i], g_conv);
      }
      for (std::size_t i = 0; i < g_feat4.data.size(); ++i) g_feat4.data[i] += g_conv.data[i];
    };

    if (has_5_2()) head_backward(cc.gap52, fc_w_5_2, conv5_2_x, cc.g52, cc.f52);
    if (has_5_1()) head_backward(cc.gap51, fc_w_5_1, conv5_1_x, cc.g51, cc.f51);

    TensorT<T> g = std::move(g_feat4);
    for (int i = static_cast<int>(conv4_x.size()) - 1; i >= 0; --i) {
      g = conv4_x[i].backward(cc.g4[i], g);
    }
    for (int i = static_cast<int>(conv3_x.size()) - 1; i >= 0; --i) {
      g = conv3_x[i].backward(cc.g3[i], g);
    }
    for (int i = static_cast<int>(conv2_x.size()) - 1; i >= 0; --i) {
      g = conv2_x[i].backward(cc.g2[i], g);
    }
    g = max_pool2x2_backward(cc.r1, cc.pool, g);
    g = relu_backward(cc.b1, g);
    auto gbn = batch_norm_backward(bn1, cc.bnc1, g);
    bn1.gamma.accumulate_grad(gbn.gamma);
    bn1.beta.accumulate_grad(gbn.beta);
    auto gc = conv2d_backward(cc.x, conv1, gbn.x);
    conv1.weights.accumulate_grad(gc.weights);
  }

  RepresentationT<T> extract_representation(const TensorT<T>& x) {
    check_input(x);
    TensorT<T> c1 = conv2d(x, conv1);
    TensorT<T> b1 = batch_norm(c1, bn1, Mode::eval);
    TensorT<T> cur = max_pool2x2(relu(b1)).y;
    for (auto& blk : conv2_x) cur = blk.forward(cur, Mode::eval);
    for (auto& blk : conv3_x) cur = blk.forward(cur, Mode::eval);
    for (auto& blk : conv4_x) cur = blk.forward(cur, Mode::eval);

    TensorT<T> gap51, gap52;
    if (has_5_1()) {
      TensorT<T> f = cur;
      for (auto& blk : conv5_1_x) f = blk.forward(f, Mode::eval);
      gap51 = global_avg_pool(f);
    }
    if (has_5_2()) {
      TensorT<T> f = cur;
      for (auto& blk : conv5_2_x) f = blk.forward(f, Mode::eval);
      gap52 = global_avg_pool(f);
    }

    RepresentationT<T> rep;
    const int c51 = has_5_1() ? gap51.c() : 0;
    const int c52 = has_5_2() ? gap52.c() : 0;
    rep.boundary = c51;
    rep.values = TensorT<T>(x.n(), c51 + c52, 1, 1);
    for (int n = 0; n < x.n(); ++n) {
      for (int c = 0; c < c51; ++c) rep.values.at(n, c, 0, 0) = gap51.at(n, c, 0, 0);
      for (int c = 0; c < c52; ++c) rep.values.at(n, c51 + c, 0, 0) = gap52.at(n, c, 0, 0);
    }
    return rep;
  }

  // --- parameter registry ---------------------------------------------------

  // Visits every trainable parameter as (group, full_name, tensor).
  void for_each_param(
      const std::function<void(const std::string&, const std::string&, TensorT<T>&)>& fn) {
    fn("conv1", "conv1/weight", conv1.weights);
    fn("conv1", "conv1/bn/gamma", bn1.gamma);
    fn("conv1", "conv1/bn/beta", bn1.beta);
    visit_group("conv2_x", conv2_x, fn, /*state=*/false);
    visit_group("conv3_x", conv3_x, fn, false);
    visit_group("conv4_x", conv4_x, fn, false);
    visit_group("conv5_1_x", conv5_1_x, fn, false);
    visit_group("conv5_2_x", conv5_2_x, fn, false);
    if (has_5_1()) fn("fc", "fc/w_conv5_1_x", fc_w_5_1);
    if (has_5_2()) fn("fc", "fc/w_conv5_2_x", fc_w_5_2);
    fn("fc", "fc/bias", fc_bias);
  }

  // Visits the non-trainable running statistics.
  void for_each_state(
      const std::function<void(const std::string&, const std::string&, TensorT<T>&)>& fn) {
    fn("conv1", "conv1/bn/running_mean", bn1.running_mean);
    fn("conv1", "conv1/bn/running_var", bn1.running_var);
    visit_group("conv2_x", conv2_x, fn, /*state=*/true);
    visit_group("conv3_x", conv3_x, fn, true);
    visit_group("conv4_x", conv4_x, fn, true);
    visit_group("conv5_1_x", conv5_1_x, fn, true);
    visit_group("conv5_2_x", conv5_2_x, fn, true);
  }

  void zero_grad() {
    for_each_param([](const std::string&, const std::string&, TensorT<T>& t) { t.zero_grad(); });
  }

 private:
  std::set<std::string> frozen_;

  void check_input(const TensorT<T>& x) const {
    if (x.c() != 3) {
      throw DimensionError("network expects 3 input channels, got " + std::to_string(x.c()));
    }
    if (x.h() != config.input_h || x.w() != config.input_w) {
      throw DimensionError("network expects " + std::to_string(config.input_h) + "x" +
                           std::to_string(config.input_w) + " input, got " +
                           std::to_string(x.h()) + "x" + std::to_string(x.w()));
    }
  }

  TensorT<T> run_group(std::vector<ResidualBlockT<T>>& group, const std::string& name,
                       const TensorT<T>& in, Mode mode, std::vector<BlockCacheT<T>>* caches) {
    Mode m = group_mode(name, mode);
    TensorT<T> cur = in;
    if (caches) caches->resize(group.size());
    for (std::size_t i = 0; i < group.size(); ++i) {
      cur = group[i].forward(cur, m, caches ? &(*caches)[i] : nullptr);
    }
    return cur;
  }

  void add_head(TensorT<T>& logits, const TensorT<T>& gap, const TensorT<T>& w) const {
    const std::size_t in_dim = static_cast<std::size_t>(gap.c());
    for (int n = 0; n < gap.n(); ++n) {
      const T* px = &gap.data[gap.index(n, 0, 0, 0)];
      for (int k = 0; k < config.num_classes; ++k) {
        const T* pw = &w.data[static_cast<std::size_t>(k) * in_dim];
        T acc = T(0);
        for (std::size_t i = 0; i < in_dim; ++i) acc += pw[i] * px[i];
        logits.at(n, k, 0, 0) += acc;
      }
    }
  }

  void visit_group(
      const std::string& gname, std::vector<ResidualBlockT<T>>& group,
      const std::function<void(const std::string&, const std::string&, TensorT<T>&)>& fn,
      bool state) {
    for (std::size_t i = 0; i < group.size(); ++i) {
      const std::string prefix = gname + "/" + std::to_string(i) + "/";
      auto visit = [&](const std::string& rel, TensorT<T>& t) { fn(gname, prefix + rel, t); };
      if (state) {
        group[i].for_each_state(visit);
      } else {
        group[i].for_each_param(visit);
      }
    }
  }
};

using Network = NetworkT<float>;

// ---------------------------------------------------------------------------
// Architecture inspection: pure function of the configuration.

struct GroupReport {
  std::string name;
  int blocks = 0;        // 0 for conv1 and fc
  int out_channels = 0;
  int out_h = 0, out_w = 0;
  int dilation = 1;
  int receptive_field = 0;
  std::size_t param_count = 0;
};

struct ArchitectureReport {
  NetworkConfig config;
  std::vector<GroupReport> groups;
  std::size_t total_params = 0;
  int representation_length = 0;

  std::string to_string() const {
    std::ostringstream os;
    os << "config: " << config.canonical() << "\n";
    os << "group        blocks  out_ch  out_size  dilation  rf      params\n";
    char line[160];
    for (const auto& g : groups) {
      std::snprintf(line, sizeof(line), "%-12s %-7d %-7d %-9s %-9d %-7d %zu\n", g.name.c_str(),
                    g.blocks, g.out_channels,
                    (std::to_string(g.out_h) + "x" + std::to_string(g.out_w)).c_str(),
                    g.dilation, g.receptive_field, g.param_count);
      os << line;
    }
    os << "total trainable parameters: " << total_params << "\n";
    os << "representation length: " << representation_length << "\n";
    return os.str();
  }
};

inline ArchitectureReport inspect(const NetworkConfig& cfg) {
  cfg.validate();
  const auto counts = cfg.block_counts();
  const auto planes = cfg.group_planes();
  const BlockKind kind = cfg.block_kind();
  const int stem = cfg.stem_channels();

  ArchitectureReport rep;
  rep.config = cfg;

  // Receptive field composition: rf grows by (k-1)*d*jump per layer and the
  // jump (input stride of one output step) multiplies by the layer stride.
  struct Probe {
    int h, w, rf, jump;
  };
  Probe p{conv_out_dim(cfg.input_h, 7, 2, 1, 3), conv_out_dim(cfg.input_w, 7, 2, 1, 3),
          1 + 6 * 1, 2};
  p.h /= 2;
  p.w /= 2;
  p.rf += 1 * p.jump;  // 2x2 pool
  p.jump *= 2;

  auto conv1_params = static_cast<std::size_t>(stem) * 3 * 49 + 2 * stem;
  rep.groups.push_back({"conv1", 0, stem, p.h, p.w, 1, p.rf, conv1_params});

  auto block_params = [&](const BlockSpec& s) {
    std::size_t total = 0;
    if (s.kind == BlockKind::basic) {
      total += 9ull * s.in_planes * s.out_planes + 2ull * s.out_planes;
      total += 9ull * s.out_planes * s.out_planes + 2ull * s.out_planes;
    } else {
      const int mid = s.mid_planes();
      total += 1ull * s.in_planes * mid + 2ull * mid;
      total += 9ull * mid * mid + 2ull * mid;
      total += 1ull * mid * s.out_planes + 2ull * s.out_planes;
    }
    if (s.projection()) {
      total += 1ull * s.in_planes * s.out_planes + 2ull * s.out_planes;
    }
    return total;
  };

  auto walk_group = [&](Probe probe, const std::string& name, int count, int in, int out,
                        int first_stride, int dilation) {
    GroupReport g;
    g.name = name;
    g.blocks = count;
    g.out_channels = out;
    g.dilation = dilation;
    for (int i = 0; i < count; ++i) {
      BlockSpec spec{kind, i == 0 ? in : out, out, i == 0 ? first_stride : 1, dilation};
      g.param_count += block_params(spec);
      // 1x1 layers leave rf alone; each 3x3 adds (3-1)*d*jump.
      if (kind == BlockKind::basic) {
        probe.rf += 2 * dilation * probe.jump;
        probe.jump *= spec.stride;
        probe.rf += 2 * dilation * probe.jump;
      } else {
        probe.rf += 2 * dilation * probe.jump;
        probe.jump *= spec.stride;
      }
      auto [oh, ow] = block_out_hw(spec, probe.h, probe.w);
      probe.h = oh;
      probe.w = ow;
    }
    g.out_h = probe.h;
    g.out_w = probe.w;
    g.receptive_field = probe.rf;
    rep.groups.push_back(g);
    return probe;
  };

  Probe after2 = walk_group(p, "conv2_x", counts[0], stem, planes[0], 1, 1);
  Probe after3 = walk_group(after2, "conv3_x", counts[1], planes[0], planes[1], 2, 1);
  Probe after4 = walk_group(after3, "conv4_x", counts[2], planes[1], planes[2], 2, 1);
  if (cfg.pathways != Pathways::conv5_2_only) {
    walk_group(after4, "conv5_1_x", counts[3], planes[2], planes[3], 2, 1);
  }
  if (cfg.pathways != Pathways::conv5_1_only) {
    walk_group(after4, "conv5_2_x", counts[3], planes[2], planes[3], 1, 2);
  }

  GroupReport fc;
  fc.name = "fc";
  fc.out_channels = cfg.num_classes;
  fc.out_h = 1;
  fc.out_w = 1;
  fc.param_count = static_cast<std::size_t>(cfg.num_classes) * cfg.representation_length() +
                   cfg.num_classes;
  rep.groups.push_back(fc);

  for (const auto& g : rep.groups) rep.total_params += g.param_count;
  rep.representation_length = cfg.representation_length();
  return rep;
}

}  // namespace restp
