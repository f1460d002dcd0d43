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

#include <functional>
#include <string>
#include <utility>

#include "restp/conv.hpp"
#include "restp/error.hpp"
#include "restp/ops.hpp"
#include "restp/rng.hpp"
#include "restp/tensor.hpp"

namespace restp {

enum class BlockKind { basic, bottleneck };

// Declarative description of one residual block. The projection shortcut is
// not free-form: it is linear exactly when the identity cannot match shapes.
struct BlockSpec {
  BlockKind kind = BlockKind::basic;
  int in_planes = 0;
  int out_planes = 0;
  int stride = 1;
  int dilation = 1;

  bool projection() const { return in_planes != out_planes || stride != 1; }

  void validate() const {
    if (in_planes <= 0 || out_planes <= 0) {
      throw ConfigError("block planes must be positive, got in=" + std::to_string(in_planes) +
                        " out=" + std::to_string(out_planes));
    }
    if (stride != 1 && stride != 2) {
      throw ConfigError("block stride must be 1 or 2, got " + std::to_string(stride));
    }
    if (dilation < 1) {
      throw ConfigError("block dilation must be >= 1, got " + std::to_string(dilation));
    }
    if (kind == BlockKind::bottleneck && out_planes % 4 != 0) {
      throw ConfigError("bottleneck out_planes must be divisible by 4, got " +
                        std::to_string(out_planes));
    }
  }

  int mid_planes() const {
    return kind == BlockKind::bottleneck ? out_planes / 4 : out_planes;
  }
};

template <typename T>
struct BlockCacheT {
  TensorT<T> x;
  TensorT<T> c1, b1, r1;
  TensorT<T> c2, b2, r2;
  TensorT<T> c3, b3;
  TensorT<T> proj_out;
  TensorT<T> sum;
  BatchNormCacheT<T> bnc1, bnc2, bnc3, bnc_proj;
};

// Residual block per the two layouts in use: the basic block stacks two 3x3
// convolutions; the bottleneck stacks 1x1 -> 3x3 -> 1x1 with the 3x3 at a
// quarter of the output width. Dilation and stride act on the 3x3 layer only.
// Every convolution is followed by batch norm; no convolution carries a bias.
template <typename T>
class ResidualBlockT {
 public:
  BlockSpec spec;
  ConvParamsT<T> conv1, conv2, conv3;  // conv3 used by bottleneck only
  BatchNormParamsT<T> bn1, bn2, bn3;
  ConvParamsT<T> proj_conv;  // 1x1 shortcut projection when needed
  BatchNormParamsT<T> proj_bn;

  ResidualBlockT() = default;

  explicit ResidualBlockT(const BlockSpec& s) : spec(s) {
    spec.validate();
    const int in = spec.in_planes;
    const int out = spec.out_planes;
    const int mid = spec.mid_planes();
    const int d = spec.dilation;
    if (spec.kind == BlockKind::basic) {
      conv1 = ConvParamsT<T>(in, out, 3, 3, spec.stride, d, d, /*bias=*/false);
      conv2 = ConvParamsT<T>(out, out, 3, 3, 1, d, d, false);
      bn1 = BatchNormParamsT<T>(out);
      bn2 = BatchNormParamsT<T>(out);
    } else {
      conv1 = ConvParamsT<T>(in, mid, 1, 1, 1, 1, 0, false);
      conv2 = ConvParamsT<T>(mid, mid, 3, 3, spec.stride, d, d, false);
      conv3 = ConvParamsT<T>(mid, out, 1, 1, 1, 1, 0, false);
      bn1 = BatchNormParamsT<T>(mid);
      bn2 = BatchNormParamsT<T>(mid);
      bn3 = BatchNormParamsT<T>(out);
    }
    if (spec.projection()) {
      proj_conv = ConvParamsT<T>(in, out, 1, 1, spec.stride, 1, 0, false);
      proj_bn = BatchNormParamsT<T>(out);
    }
  }

  // He-normal fan-in for conv weights; the batch norm closing the residual
  // branch starts at gamma = 0 so a fresh block is the identity (plus ReLU).
  void init(Rng& rng) {
    conv1.he_init(rng);
    conv2.he_init(rng);
    if (spec.kind == BlockKind::bottleneck) {
      conv3.he_init(rng);
      bn3.gamma.fill(T(0));
    } else {
      bn2.gamma.fill(T(0));
    }
    if (spec.projection()) proj_conv.he_init(rng);
  }

  TensorT<T> forward(const TensorT<T>& x, Mode mode, BlockCacheT<T>* cache = nullptr) {
    if (x.c() != spec.in_planes) {
      throw DimensionError("block expects " + std::to_string(spec.in_planes) +
                           " input channels, got " + std::to_string(x.c()));
    }
    BlockCacheT<T> local;
    BlockCacheT<T>& cc = cache ? *cache : local;

    cc.c1 = conv2d(x, conv1);
    cc.b1 = batch_norm(cc.c1, bn1, mode, &cc.bnc1);
    cc.r1 = relu(cc.b1);
    cc.c2 = conv2d(cc.r1, conv2);
    cc.b2 = batch_norm(cc.c2, bn2, mode, &cc.bnc2);

    const TensorT<T>* branch = &cc.b2;
    if (spec.kind == BlockKind::bottleneck) {
      cc.r2 = relu(cc.b2);
      cc.c3 = conv2d(cc.r2, conv3);
      cc.b3 = batch_norm(cc.c3, bn3, mode, &cc.bnc3);
      branch = &cc.b3;
    }

    const TensorT<T>* shortcut = &x;
    if (spec.projection()) {
      TensorT<T> pc = conv2d(x, proj_conv);
      cc.proj_out = batch_norm(pc, proj_bn, mode, &cc.bnc_proj);
      shortcut = &cc.proj_out;
    }
    if (!branch->same_shape(*shortcut)) {
      throw DimensionError("block branch " + branch->shape_str() + " vs shortcut " +
                           shortcut->shape_str());
    }
    cc.sum = *branch;
    for (std::size_t i = 0; i < cc.sum.data.size(); ++i) cc.sum.data[i] += shortcut->data[i];
    TensorT<T> y = relu(cc.sum);
    if (cache) cache->x = x;
    return y;
  }

  // Accumulates parameter gradients into each tensor's grad buffer and
  // returns the gradient with respect to the block input.
  TensorT<T> backward(const BlockCacheT<T>& cc, const TensorT<T>& upstream) {
    TensorT<T> g_sum = relu_backward(cc.sum, upstream);

    // Residual branch, walked back to the block input.
    TensorT<T> g_branch = g_sum;  // gradient at the branch output
    if (spec.kind == BlockKind::bottleneck) {
      auto gbn3 = batch_norm_backward(bn3, cc.bnc3, g_branch);
      bn3.gamma.accumulate_grad(gbn3.gamma);
      bn3.beta.accumulate_grad(gbn3.beta);
      auto gc3 = conv2d_backward(cc.r2, conv3, gbn3.x);
      conv3.weights.accumulate_grad(gc3.weights);
      g_branch = relu_backward(cc.b2, gc3.x);
    }
    auto gbn2 = batch_norm_backward(bn2, cc.bnc2, g_branch);
    bn2.gamma.accumulate_grad(gbn2.gamma);
    bn2.beta.accumulate_grad(gbn2.beta);
    auto gc2 = conv2d_backward(cc.r1, conv2, gbn2.x);
    conv2.weights.accumulate_grad(gc2.weights);
    TensorT<T> g_r1 = relu_backward(cc.b1, gc2.x);
    auto gbn1 = batch_norm_backward(bn1, cc.bnc1, g_r1);
    bn1.gamma.accumulate_grad(gbn1.gamma);
    bn1.beta.accumulate_grad(gbn1.beta);
    auto gc1 = conv2d_backward(cc.x, conv1, gbn1.x);
    conv1.weights.accumulate_grad(gc1.weights);
    TensorT<T> g_x = std::move(gc1.x);

    // Shortcut branch adds into the same input gradient.
    if (spec.projection()) {
      auto gbnp = batch_norm_backward(proj_bn, cc.bnc_proj, g_sum);
      proj_bn.gamma.accumulate_grad(gbnp.gamma);
      proj_bn.beta.accumulate_grad(gbnp.beta);
      auto gcp = conv2d_backward(cc.x, proj_conv, gbnp.x);
      proj_conv.weights.accumulate_grad(gcp.weights);
      for (std::size_t i = 0; i < g_x.data.size(); ++i) g_x.data[i] += gcp.x.data[i];
    } else {
      for (std::size_t i = 0; i < g_x.data.size(); ++i) g_x.data[i] += g_sum.data[i];
    }
    return g_x;
  }

  // Trainable parameters, in forward order. Names are relative to the block.
  void for_each_param(const std::function<void(const std::string&, TensorT<T>&)>& fn) {
    fn("conv1/weight", conv1.weights);
    fn("bn1/gamma", bn1.gamma);
    fn("bn1/beta", bn1.beta);
    fn("conv2/weight", conv2.weights);
    fn("bn2/gamma", bn2.gamma);
    fn("bn2/beta", bn2.beta);
    if (spec.kind == BlockKind::bottleneck) {
      fn("conv3/weight", conv3.weights);
      fn("bn3/gamma", bn3.gamma);
      fn("bn3/beta", bn3.beta);
    }
    if (spec.projection()) {
      fn("proj/weight", proj_conv.weights);
      fn("proj/bn/gamma", proj_bn.gamma);
      fn("proj/bn/beta", proj_bn.beta);
    }
  }

  // Non-trainable state (batch norm running statistics).
  void for_each_state(const std::function<void(const std::string&, TensorT<T>&)>& fn) {
    fn("bn1/running_mean", bn1.running_mean);
    fn("bn1/running_var", bn1.running_var);
    fn("bn2/running_mean", bn2.running_mean);
    fn("bn2/running_var", bn2.running_var);
    if (spec.kind == BlockKind::bottleneck) {
      fn("bn3/running_mean", bn3.running_mean);
      fn("bn3/running_var", bn3.running_var);
    }
    if (spec.projection()) {
      fn("proj/bn/running_mean", proj_bn.running_mean);
      fn("proj/bn/running_var", proj_bn.running_var);
    }
  }

  // Every batch norm in the block, for freeze handling.
  void for_each_bn(const std::function<void(BatchNormParamsT<T>&)>& fn) {
    fn(bn1);
    fn(bn2);
    if (spec.kind == BlockKind::bottleneck) fn(bn3);
    if (spec.projection()) fn(proj_bn);
  }
};

using ResidualBlock = ResidualBlockT<float>;

// Spatial output size of a block for a given input size. The 3x3 layer
// carries the stride with pad = dilation, which preserves size at stride 1
// and halves (rounding up) at stride 2.
inline std::pair<int, int> block_out_hw(const BlockSpec& s, int h, int w) {
  return {conv_out_dim(h, 3, s.stride, s.dilation, s.dilation),
          conv_out_dim(w, 3, s.stride, s.dilation, s.dilation)};
}

}  // namespace restp
