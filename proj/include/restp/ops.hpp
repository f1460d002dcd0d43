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
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "restp/error.hpp"
#include "restp/tensor.hpp"

namespace restp {

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// ReLU

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> y = x;
  for (auto& v : y.data) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& upstream) {
  if (!x.same_shape(upstream)) {
    throw DimensionError("relu_backward: upstream " + upstream.shape_str() + " vs input " +
                         x.shape_str());
  }
  TensorT<T> g(x.n(), x.c(), x.h(), x.w());
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    g.data[i] = x.data[i] > T(0) ? upstream.data[i] : T(0);
  }
  return g;
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2. Odd spatial dims are rejected; the supported
// network input sizes never produce them.

template <typename T>
struct PoolResultT {
  TensorT<T> y;
  std::vector<std::int32_t> argmax;  // flat input index per output element
};

template <typename T>
PoolResultT<T> max_pool2x2(const TensorT<T>& x) {
  if (x.h() % 2 != 0 || x.w() % 2 != 0) {
    throw DimensionError("max_pool2x2: spatial dims must be even, got " + x.shape_str());
  }
  const int oh = x.h() / 2;
  const int ow = x.w() / 2;
  PoolResultT<T> r{TensorT<T>(x.n(), x.c(), oh, ow), {}};
  r.argmax.resize(r.y.numel());
  std::size_t oi = 0;
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++oi) {
          std::size_t base = x.index(n, c, 2 * oy, 2 * ox);
          std::size_t best = base;
          T bv = x.data[base];
          const std::size_t cand[3] = {base + 1, base + static_cast<std::size_t>(x.w()),
                                       base + static_cast<std::size_t>(x.w()) + 1};
          for (std::size_t k : cand) {
            if (x.data[k] > bv) {  // ties keep the first index in scan order
              bv = x.data[k];
              best = k;
            }
          }
          r.y.data[oi] = bv;
          r.argmax[oi] = static_cast<std::int32_t>(best);
        }
      }
    }
  }
  return r;
}

template <typename T>
TensorT<T> max_pool2x2_backward(const TensorT<T>& x, const PoolResultT<T>& pooled,
                                const TensorT<T>& upstream) {
  if (!pooled.y.same_shape(upstream)) {
    throw DimensionError("max_pool2x2_backward: upstream " + upstream.shape_str() +
                         " vs pooled output " + pooled.y.shape_str());
  }
  TensorT<T> g(x.n(), x.c(), x.h(), x.w());
  for (std::size_t i = 0; i < upstream.data.size(); ++i) {
    g.data[pooled.argmax[i]] += upstream.data[i];
  }
  return g;
}

// ---------------------------------------------------------------------------
// Batch normalization (per channel over batch and spatial positions).
// Train mode normalizes by batch statistics and updates the running stats
// by exponential moving average; eval mode normalizes by the running stats.

template <typename T>
struct BatchNormParamsT {
  TensorT<T> gamma, beta;                // (1, c, 1, 1)
  TensorT<T> running_mean, running_var;  // (1, c, 1, 1)
  T eps = static_cast<T>(1e-5);
  T momentum = static_cast<T>(0.1);

  BatchNormParamsT() = default;
  explicit BatchNormParamsT(int channels) {
    gamma = TensorT<T>(1, channels, 1, 1, T(1));
    beta = TensorT<T>(1, channels, 1, 1, T(0));
    running_mean = TensorT<T>(1, channels, 1, 1, T(0));
    running_var = TensorT<T>(1, channels, 1, 1, T(1));
  }
  int channels() const { return gamma.c(); }
};

using BatchNormParams = BatchNormParamsT<float>;

template <typename T>
struct BatchNormCacheT {
  Mode mode = Mode::train;
  TensorT<T> x_hat;            // normalized input
  std::vector<T> inv_std;      // per channel, for the stats actually used
  std::vector<T> batch_mean;   // train mode only
};

template <typename T>
TensorT<T> batch_norm(const TensorT<T>& x, BatchNormParamsT<T>& p, Mode mode,
                      BatchNormCacheT<T>* cache = nullptr) {
  if (x.c() != p.channels()) {
    throw DimensionError("batch_norm: channel axis mismatch, input has " + std::to_string(x.c()) +
                         " channels but params have " + std::to_string(p.channels()));
  }
  const int n = x.n(), c = x.c(), h = x.h(), w = x.w();
  const std::size_t per_chan = static_cast<std::size_t>(n) * h * w;
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  std::vector<T> mean(c), var(c);
  if (mode == Mode::train) {
    for (int ic = 0; ic < c; ++ic) {
      double acc = 0;
      for (int in = 0; in < n; ++in) {
        const T* px = &x.data[x.index(in, ic, 0, 0)];
        for (std::size_t i = 0; i < plane; ++i) acc += static_cast<double>(px[i]);
      }
      double m = acc / static_cast<double>(per_chan);
      double vacc = 0;
      for (int in = 0; in < n; ++in) {
        const T* px = &x.data[x.index(in, ic, 0, 0)];
        for (std::size_t i = 0; i < plane; ++i) {
          double d = static_cast<double>(px[i]) - m;
          vacc += d * d;
        }
      }
      mean[ic] = static_cast<T>(m);
      var[ic] = static_cast<T>(vacc / static_cast<double>(per_chan));
    }
    // Running stats use the unbiased variance estimate when possible.
    for (int ic = 0; ic < c; ++ic) {
      T unbiased = per_chan > 1 ? var[ic] * static_cast<T>(per_chan) /
                                      static_cast<T>(per_chan - 1)
                                : var[ic];
      p.running_mean.data[ic] = (T(1) - p.momentum) * p.running_mean.data[ic] + p.momentum * mean[ic];
      p.running_var.data[ic] = (T(1) - p.momentum) * p.running_var.data[ic] + p.momentum * unbiased;
    }
  } else {
    for (int ic = 0; ic < c; ++ic) {
      mean[ic] = p.running_mean.data[ic];
      var[ic] = p.running_var.data[ic];
    }
  }

  TensorT<T> y(n, c, h, w);
  TensorT<T> x_hat(n, c, h, w);
  std::vector<T> inv_std(c);
  for (int ic = 0; ic < c; ++ic) {
    inv_std[ic] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var[ic]) +
                                                 static_cast<double>(p.eps)));
  }
  for (int in = 0; in < n; ++in) {
    for (int ic = 0; ic < c; ++ic) {
      const T* px = &x.data[x.index(in, ic, 0, 0)];
      T* ph = &x_hat.data[x_hat.index(in, ic, 0, 0)];
      T* py = &y.data[y.index(in, ic, 0, 0)];
      const T m = mean[ic], is = inv_std[ic], gm = p.gamma.data[ic], bt = p.beta.data[ic];
      for (std::size_t i = 0; i < plane; ++i) {
        ph[i] = (px[i] - m) * is;
        py[i] = gm * ph[i] + bt;
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
    cache->batch_mean = std::move(mean);
  }
  return y;
}

template <typename T>
struct BatchNormGradsT {
  TensorT<T> x;
  TensorT<T> gamma, beta;  // (1, c, 1, 1)
};

template <typename T>
BatchNormGradsT<T> batch_norm_backward(const BatchNormParamsT<T>& p,
                                       const BatchNormCacheT<T>& cache,
                                       const TensorT<T>& upstream) {
  const TensorT<T>& xh = cache.x_hat;
  if (!xh.same_shape(upstream)) {
    throw DimensionError("batch_norm_backward: upstream " + upstream.shape_str() +
                         " vs cached input " + xh.shape_str());
  }
  const int n = xh.n(), c = xh.c();
  const std::size_t plane = static_cast<std::size_t>(xh.h()) * xh.w();
  const std::size_t m = static_cast<std::size_t>(n) * plane;

  BatchNormGradsT<T> g;
  g.x = TensorT<T>(xh.n(), xh.c(), xh.h(), xh.w());
  g.gamma = TensorT<T>(1, c, 1, 1);
  g.beta = TensorT<T>(1, c, 1, 1);

  for (int ic = 0; ic < c; ++ic) {
    double sum_up = 0, sum_up_xh = 0;
    for (int in = 0; in < n; ++in) {
      const T* pu = &upstream.data[upstream.index(in, ic, 0, 0)];
      const T* ph = &xh.data[xh.index(in, ic, 0, 0)];
      for (std::size_t i = 0; i < plane; ++i) {
        sum_up += static_cast<double>(pu[i]);
        sum_up_xh += static_cast<double>(pu[i]) * static_cast<double>(ph[i]);
      }
    }
    g.gamma.data[ic] = static_cast<T>(sum_up_xh);
    g.beta.data[ic] = static_cast<T>(sum_up);

    const T gm = p.gamma.data[ic];
    const T is = cache.inv_std[ic];
    if (cache.mode == Mode::train) {
      // Through the batch statistics:
      // dx = gamma * inv_std * (du - mean(du) - x_hat * mean(du * x_hat))
      const T mean_up = static_cast<T>(sum_up / static_cast<double>(m));
      const T mean_up_xh = static_cast<T>(sum_up_xh / static_cast<double>(m));
      for (int in = 0; in < n; ++in) {
        const T* pu = &upstream.data[upstream.index(in, ic, 0, 0)];
        const T* ph = &xh.data[xh.index(in, ic, 0, 0)];
        T* pg = &g.x.data[g.x.index(in, ic, 0, 0)];
        for (std::size_t i = 0; i < plane; ++i) {
          pg[i] = gm * is * (pu[i] - mean_up - ph[i] * mean_up_xh);
        }
      }
    } else {
      // Running stats are constants.
      for (int in = 0; in < n; ++in) {
        const T* pu = &upstream.data[upstream.index(in, ic, 0, 0)];
        T* pg = &g.x.data[g.x.index(in, ic, 0, 0)];
        for (std::size_t i = 0; i < plane; ++i) pg[i] = gm * is * pu[i];
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Global average pooling: per-channel spatial mean, (n,c,h,w) -> (n,c,1,1).

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
  TensorT<T> y(x.n(), x.c(), 1, 1);
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  for (int in = 0; in < x.n(); ++in) {
    for (int ic = 0; ic < x.c(); ++ic) {
      const T* px = &x.data[x.index(in, ic, 0, 0)];
      T acc = T(0);
      for (std::size_t i = 0; i < plane; ++i) acc += px[i];
      y.at(in, ic, 0, 0) = acc / static_cast<T>(plane);
    }
  }
  return y;
}

template <typename T>
TensorT<T> global_avg_pool_backward(int h, int w, const TensorT<T>& upstream) {
  TensorT<T> g(upstream.n(), upstream.c(), h, w);
  const T scale = T(1) / static_cast<T>(static_cast<std::size_t>(h) * w);
  for (int in = 0; in < upstream.n(); ++in) {
    for (int ic = 0; ic < upstream.c(); ++ic) {
      const T u = upstream.at(in, ic, 0, 0) * scale;
      T* pg = &g.data[g.index(in, ic, 0, 0)];
      for (int i = 0; i < h * w; ++i) pg[i] = u;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Fully connected layer over flattened (c*h*w) features.
// weight is (out, in, 1, 1); bias is (1, out, 1, 1).

template <typename T>
TensorT<T> fully_connected(const TensorT<T>& x, const TensorT<T>& weight, const TensorT<T>& bias) {
  const std::size_t in_dim = static_cast<std::size_t>(x.c()) * x.h() * x.w();
  if (static_cast<std::size_t>(weight.c()) != in_dim) {
    throw DimensionError("fully_connected: weight expects " + std::to_string(weight.c()) +
                         " features, input provides " + std::to_string(in_dim));
  }
  const int out_dim = weight.n();
  if (!bias.empty() && bias.c() != out_dim) {
    throw DimensionError("fully_connected: bias length " + std::to_string(bias.c()) +
                         " vs out features " + std::to_string(out_dim));
  }
  TensorT<T> y(x.n(), out_dim, 1, 1);
  for (int in = 0; in < x.n(); ++in) {
    const T* px = &x.data[x.index(in, 0, 0, 0)];
    for (int o = 0; o < out_dim; ++o) {
      const T* pw = &weight.data[static_cast<std::size_t>(o) * in_dim];
      T acc = T(0);
      for (std::size_t i = 0; i < in_dim; ++i) acc += pw[i] * px[i];
      // Bias joins last; addition commutes bitwise, so this equals a head
      // that seeds its accumulator with the bias.
      y.at(in, o, 0, 0) = bias.empty() ? acc : acc + bias.data[o];
    }
  }
  return y;
}

template <typename T>
struct FcGradsT {
  TensorT<T> x;
  TensorT<T> weight;
  TensorT<T> bias;
};

template <typename T>
FcGradsT<T> fully_connected_backward(const TensorT<T>& x, const TensorT<T>& weight,
                                     const TensorT<T>& upstream) {
  const std::size_t in_dim = static_cast<std::size_t>(x.c()) * x.h() * x.w();
  const int out_dim = weight.n();
  if (upstream.n() != x.n() || upstream.c() != out_dim) {
    throw DimensionError("fully_connected_backward: upstream " + upstream.shape_str());
  }
  FcGradsT<T> g;
  g.x = TensorT<T>(x.n(), x.c(), x.h(), x.w());
  g.weight = TensorT<T>(weight.n(), weight.c(), 1, 1);
  g.bias = TensorT<T>(1, out_dim, 1, 1);
  for (int in = 0; in < x.n(); ++in) {
    const T* px = &x.data[x.index(in, 0, 0, 0)];
    T* pgx = &g.x.data[g.x.index(in, 0, 0, 0)];
    for (int o = 0; o < out_dim; ++o) {
      const T u = upstream.at(in, o, 0, 0);
      const T* pw = &weight.data[static_cast<std::size_t>(o) * in_dim];
      T* pgw = &g.weight.data[static_cast<std::size_t>(o) * in_dim];
      for (std::size_t i = 0; i < in_dim; ++i) {
        pgx[i] += u * pw[i];
        pgw[i] += u * px[i];
      }
      g.bias.data[o] += u;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy, mean over the batch. Uses max-subtraction for
// stability. Returns the loss and the gradient w.r.t. the logits.

template <typename T>
struct SoftmaxLossT {
  double loss = 0;
  TensorT<T> grad;          // w.r.t. logits
  std::vector<int> predicted;  // argmax per row, ties to the lowest index
};

template <typename T>
SoftmaxLossT<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels) {
  const int n = logits.n();
  const int k = logits.c();
  if (static_cast<int>(labels.size()) != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(n));
  }
  SoftmaxLossT<T> out;
  out.grad = TensorT<T>(n, k, 1, 1);
  out.predicted.resize(n);
  double total = 0;
  for (int in = 0; in < n; ++in) {
    const int label = labels[in];
    if (label < 0 || label >= k) {
      throw DomainError("label " + std::to_string(label) + " outside [0," + std::to_string(k) +
                        ") at row " + std::to_string(in));
    }
    const T* row = &logits.data[logits.index(in, 0, 0, 0)];
    T mx = row[0];
    int arg = 0;
    for (int j = 1; j < k; ++j) {
      if (row[j] > mx) {
        mx = row[j];
        arg = j;
      }
    }
    out.predicted[in] = arg;
    double denom = 0;
    for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
    const double log_denom = std::log(denom);
    total += log_denom - static_cast<double>(row[label] - mx);
    T* grow = &out.grad.data[out.grad.index(in, 0, 0, 0)];
    for (int j = 0; j < k; ++j) {
      double p = std::exp(static_cast<double>(row[j] - mx)) / denom;
      grow[j] = static_cast<T>((p - (j == label ? 1.0 : 0.0)) / n);
    }
  }
  out.loss = total / n;
  return out;
}

}  // namespace restp
