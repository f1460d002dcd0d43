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
#include <utility>
#include <vector>

#include "restp/error.hpp"
#include "restp/tensor.hpp"

namespace restp {

/// 2-D convolution configuration and weights. A dilation of d samples the
/// kernel taps on a grid with spacing d, so the effective kernel extent is
/// (k-1)*d + 1. d=1 is the ordinary convolution; d=2 is the widened-context
/// variant. Larger dilations are accepted but outside the tested envelope
/// (see flagged_dilation).
template <typename T>
struct ConvParamsT {
  int in_channels = 0;
  int out_channels = 0;
  int kh = 0;
  int kw = 0;
  int stride = 1;
  int dilation = 1;
  int pad = 0;  // same count on all four sides

  TensorT<T> weights;  // (out, in, kh, kw)
  TensorT<T> bias;     // (1, out, 1, 1) when present, empty otherwise

  ConvParamsT() = default;

  ConvParamsT(int in_ch, int out_ch, int kh_, int kw_, int stride_, int dilation_, int pad_,
              bool with_bias = false)
      : in_channels(in_ch),
        out_channels(out_ch),
        kh(kh_),
        kw(kw_),
        stride(stride_),
        dilation(dilation_),
        pad(pad_) {
    if (in_ch <= 0 || out_ch <= 0 || kh_ <= 0 || kw_ <= 0 || stride_ < 1 || dilation_ < 1 ||
        pad_ < 0) {
      throw ConfigError("invalid conv parameters");
    }
    weights = TensorT<T>(out_ch, in_ch, kh_, kw_);
    if (with_bias) bias = TensorT<T>(1, out_ch, 1, 1);
  }

  bool has_bias() const { return !bias.empty(); }
  int extent_h() const { return (kh - 1) * dilation + 1; }
  int extent_w() const { return (kw - 1) * dilation + 1; }
  bool flagged_dilation() const { return dilation > 2; }

  void he_init(Rng& rng) {
    T stddev = static_cast<T>(std::sqrt(2.0 / (static_cast<double>(in_channels) * kh * kw)));
    for (auto& v : weights.data) v = static_cast<T>(rng.normal()) * stddev;
    if (has_bias()) bias.fill(T(0));
  }
};

using ConvParams = ConvParamsT<float>;

/// Output spatial size for one dimension: floor((H + 2p - ((k-1)d+1))/s) + 1.
inline int conv_out_dim(int in, int kernel, int stride, int dilation, int pad) {
  int extent = (kernel - 1) * dilation + 1;
  int span = in + 2 * pad - extent;
  if (span < 0) return 0;
  return span / stride + 1;
}

template <typename T>
std::pair<int, int> conv_out_hw(const TensorT<T>& x, const ConvParamsT<T>& p) {
  return {conv_out_dim(x.h(), p.kh, p.stride, p.dilation, p.pad),
          conv_out_dim(x.w(), p.kw, p.stride, p.dilation, p.pad)};
}

template <typename T>
void conv_check(const TensorT<T>& x, const ConvParamsT<T>& p) {
  if (x.c() != p.in_channels) {
    throw DimensionError("conv2d: channel axis mismatch, input has " + std::to_string(x.c()) +
                         " channels but conv expects " + std::to_string(p.in_channels));
  }
  if (p.extent_h() > x.h() + 2 * p.pad) {
    throw DimensionError("conv2d: height axis too small, effective kernel extent " +
                         std::to_string(p.extent_h()) + " exceeds padded input " +
                         std::to_string(x.h() + 2 * p.pad));
  }
  if (p.extent_w() > x.w() + 2 * p.pad) {
    throw DimensionError("conv2d: width axis too small, effective kernel extent " +
                         std::to_string(p.extent_w()) + " exceeds padded input " +
                         std::to_string(x.w() + 2 * p.pad));
  }
  check_finite(x, "conv2d input");
}

namespace detail {

// Gathers the patches of image `in` (one batch item) into col, laid out as
// (in_channels * kh * kw) rows by (oh * ow) columns. Out-of-bounds taps are 0.
template <typename T>
void im2col(const T* im, int c, int h, int w, const ConvParamsT<T>& p, int oh, int ow, T* col) {
  const int hw = h * w;
  for (int ic = 0; ic < c; ++ic) {
    for (int ki = 0; ki < p.kh; ++ki) {
      for (int kj = 0; kj < p.kw; ++kj) {
        T* row = col + (static_cast<std::size_t>(ic) * p.kh * p.kw + ki * p.kw + kj) *
                           static_cast<std::size_t>(oh) * ow;
        const int ih0 = ki * p.dilation - p.pad;
        const int iw0 = kj * p.dilation - p.pad;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * p.stride + ih0;
          T* dst = row + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            for (int ox = 0; ox < ow; ++ox) dst[ox] = T(0);
            continue;
          }
          const T* src = im + ic * hw + iy * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * p.stride + iw0;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Scatter-add of a col buffer back into one image (adjoint of im2col).
template <typename T>
void col2im(const T* col, int c, int h, int w, const ConvParamsT<T>& p, int oh, int ow, T* im) {
  const int hw = h * w;
  for (int ic = 0; ic < c; ++ic) {
    for (int ki = 0; ki < p.kh; ++ki) {
      for (int kj = 0; kj < p.kw; ++kj) {
        const T* row = col + (static_cast<std::size_t>(ic) * p.kh * p.kw + ki * p.kw + kj) *
                                 static_cast<std::size_t>(oh) * ow;
        const int ih0 = ki * p.dilation - p.pad;
        const int iw0 = kj * p.dilation - p.pad;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * p.stride + ih0;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * ow;
          T* dst = im + ic * hw + iy * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * p.stride + iw0;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Patch-gather convolution. Parallelizes over the batch; each output element
/// is accumulated in a fixed order, so results do not depend on the schedule.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const ConvParamsT<T>& p) {
  conv_check(x, p);
  auto [oh, ow] = conv_out_hw(x, p);
  if (oh <= 0 || ow <= 0) {
    throw DimensionError("conv2d: empty output for input " + x.shape_str());
  }
  const int n = x.n();
  const std::size_t k_rows = static_cast<std::size_t>(p.in_channels) * p.kh * p.kw;
  const std::size_t m_cols = static_cast<std::size_t>(oh) * ow;
  TensorT<T> y(n, p.out_channels, oh, ow);

#pragma omp parallel if (n > 1)
  {
    std::vector<T> col(k_rows * m_cols);
    // Accumulation runs in double regardless of T so that this route and the
    // direct-loop reference agree far inside the contracted 1e-6 tolerance.
    std::vector<double> acc(m_cols);
#pragma omp for schedule(static)
    for (int in = 0; in < n; ++in) {
      detail::im2col(&x.data[x.index(in, 0, 0, 0)], x.c(), x.h(), x.w(), p, oh, ow, col.data());
      for (int oc = 0; oc < p.out_channels; ++oc) {
        const double b = p.has_bias() ? static_cast<double>(p.bias.data[oc]) : 0.0;
        for (std::size_t m = 0; m < m_cols; ++m) acc[m] = b;
        const T* wrow = &p.weights.data[static_cast<std::size_t>(oc) * k_rows];
        for (std::size_t k = 0; k < k_rows; ++k) {
          const double wv = static_cast<double>(wrow[k]);
          if (wv == 0.0) continue;
          const T* crow = col.data() + k * m_cols;
          for (std::size_t m = 0; m < m_cols; ++m) acc[m] += wv * static_cast<double>(crow[m]);
        }
        T* out_row = &y.data[y.index(in, oc, 0, 0)];
        for (std::size_t m = 0; m < m_cols; ++m) out_row[m] = static_cast<T>(acc[m]);
      }
    }
  }
  return y;
}

/// Direct nested-loop evaluation of the dilated convolution, value by value:
/// y(p) = sum over kernel taps of w(tap) * x(p*stride + tap*dilation - pad).
/// Slow; kept as the in-repo cross-check for the patch-gather route.
template <typename T>
TensorT<T> conv2d_reference(const TensorT<T>& x, const ConvParamsT<T>& p) {
  conv_check(x, p);
  auto [oh, ow] = conv_out_hw(x, p);
  if (oh <= 0 || ow <= 0) {
    throw DimensionError("conv2d: empty output for input " + x.shape_str());
  }
  TensorT<T> y(x.n(), p.out_channels, oh, ow);
  for (int in = 0; in < x.n(); ++in) {
    for (int oc = 0; oc < p.out_channels; ++oc) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = p.has_bias() ? static_cast<double>(p.bias.data[oc]) : 0.0;
          for (int ic = 0; ic < p.in_channels; ++ic) {
            for (int ki = 0; ki < p.kh; ++ki) {
              const int iy = oy * p.stride + ki * p.dilation - p.pad;
              if (iy < 0 || iy >= x.h()) continue;
              for (int kj = 0; kj < p.kw; ++kj) {
                const int ix = ox * p.stride + kj * p.dilation - p.pad;
                if (ix < 0 || ix >= x.w()) continue;
                acc += static_cast<double>(p.weights.at(oc, ic, ki, kj)) *
                       static_cast<double>(x.at(in, ic, iy, ix));
              }
            }
          }
          y.at(in, oc, oy, ox) = static_cast<T>(acc);
        }
      }
    }
  }
  return y;
}

template <typename T>
struct ConvGradsT {
  TensorT<T> x;        // same shape as the forward input
  TensorT<T> weights;  // same shape as p.weights
  TensorT<T> bias;     // (1, out, 1, 1); empty when the conv has no bias
};

/// Adjoint of conv2d. Returns fresh gradient tensors; callers accumulate them
/// into the designated grad buffers.
template <typename T>
ConvGradsT<T> conv2d_backward(const TensorT<T>& x, const ConvParamsT<T>& p,
                              const TensorT<T>& upstream) {
  conv_check(x, p);
  auto [oh, ow] = conv_out_hw(x, p);
  if (upstream.n() != x.n() || upstream.c() != p.out_channels || upstream.h() != oh ||
      upstream.w() != ow) {
    throw DimensionError("conv2d_backward: upstream shape " + upstream.shape_str() +
                         " does not match forward output (" + std::to_string(x.n()) + "," +
                         std::to_string(p.out_channels) + "," + std::to_string(oh) + "," +
                         std::to_string(ow) + ")");
  }
  const int n = x.n();
  const std::size_t k_rows = static_cast<std::size_t>(p.in_channels) * p.kh * p.kw;
  const std::size_t m_cols = static_cast<std::size_t>(oh) * ow;

  ConvGradsT<T> g;
  g.x = TensorT<T>(x.n(), x.c(), x.h(), x.w());
  g.weights = TensorT<T>(p.out_channels, p.in_channels, p.kh, p.kw);
  if (p.has_bias()) g.bias = TensorT<T>(1, p.out_channels, 1, 1);

  // dL/dx: dcol = W^T * upstream, scattered back per image.
#pragma omp parallel if (n > 1)
  {
    std::vector<T> dcol(k_rows * m_cols);
#pragma omp for schedule(static)
    for (int in = 0; in < n; ++in) {
      std::fill(dcol.begin(), dcol.end(), T(0));
      for (int oc = 0; oc < p.out_channels; ++oc) {
        const T* up_row = &upstream.data[upstream.index(in, oc, 0, 0)];
        const T* wrow = &p.weights.data[static_cast<std::size_t>(oc) * k_rows];
        for (std::size_t k = 0; k < k_rows; ++k) {
          const T wv = wrow[k];
          if (wv == T(0)) continue;
          T* drow = dcol.data() + k * m_cols;
          for (std::size_t m = 0; m < m_cols; ++m) drow[m] += wv * up_row[m];
        }
      }
      detail::col2im(dcol.data(), x.c(), x.h(), x.w(), p, oh, ow, &g.x.data[g.x.index(in, 0, 0, 0)]);
    }
  }

  // dL/dW: serial over the batch so accumulation order is fixed; the
  // (oc, k) cells are independent, so threading over oc is schedule-free.
  {
    std::vector<T> col(k_rows * m_cols);
    for (int in = 0; in < n; ++in) {
      detail::im2col(&x.data[x.index(in, 0, 0, 0)], x.c(), x.h(), x.w(), p, oh, ow, col.data());
#pragma omp parallel for schedule(static) if (p.out_channels > 1)
      for (int oc = 0; oc < p.out_channels; ++oc) {
        const T* up_row = &upstream.data[upstream.index(in, oc, 0, 0)];
        T* gw_row = &g.weights.data[static_cast<std::size_t>(oc) * k_rows];
        for (std::size_t k = 0; k < k_rows; ++k) {
          const T* crow = col.data() + k * m_cols;
          T acc = T(0);
          for (std::size_t m = 0; m < m_cols; ++m) acc += up_row[m] * crow[m];
          gw_row[k] += acc;
        }
      }
    }
  }

  if (p.has_bias()) {
    for (int in = 0; in < n; ++in) {
      for (int oc = 0; oc < p.out_channels; ++oc) {
        const T* up_row = &upstream.data[upstream.index(in, oc, 0, 0)];
        T acc = T(0);
        for (std::size_t m = 0; m < m_cols; ++m) acc += up_row[m];
        g.bias.data[oc] += acc;
      }
    }
  }
  return g;
}

}  // namespace restp
