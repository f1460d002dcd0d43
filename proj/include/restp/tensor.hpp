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
#include <cstddef>
#include <string>
#include <vector>

#include "restp/error.hpp"
#include "restp/rng.hpp"

namespace restp {

/// Dense 4-D tensor in (batch, channel, height, width) layout, batch-major.
/// The scalar type is a template parameter: float is the working precision,
/// double is used by the gradient checker. `grad` is either empty or holds
/// one value per data element; backward passes accumulate into it additively.
template <typename T>
struct TensorT {
  std::array<int, 4> shape{0, 0, 0, 0};
  std::vector<T> data;
  std::vector<T> grad;

  TensorT() = default;

  TensorT(int n, int c, int h, int w, T fill = T(0)) : shape{n, c, h, w} {
    if (n <= 0 || c <= 0 || h <= 0 || w <= 0) {
      throw DimensionError("tensor dims must be positive, got (" + std::to_string(n) + "," +
                           std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) +
                           ")");
    }
    data.assign(static_cast<std::size_t>(n) * c * h * w, fill);
  }

  int n() const { return shape[0]; }
  int c() const { return shape[1]; }
  int h() const { return shape[2]; }
  int w() const { return shape[3]; }

  std::size_t numel() const { return data.size(); }
  bool empty() const { return data.empty(); }

  std::size_t index(int in, int ic, int ih, int iw) const {
    return ((static_cast<std::size_t>(in) * shape[1] + ic) * shape[2] + ih) * shape[3] + iw;
  }

  T& at(int in, int ic, int ih, int iw) { return data[index(in, ic, ih, iw)]; }
  const T& at(int in, int ic, int ih, int iw) const { return data[index(in, ic, ih, iw)]; }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  std::string shape_str() const {
    return "(" + std::to_string(shape[0]) + "," + std::to_string(shape[1]) + "," +
           std::to_string(shape[2]) + "," + std::to_string(shape[3]) + ")";
  }

  void fill(T v) {
    for (auto& x : data) x = v;
  }

  bool has_grad() const { return !grad.empty(); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }

  void zero_grad() {
    if (!grad.empty()) grad.assign(data.size(), T(0));
  }

  void accumulate_grad(const TensorT& g) {
    if (!same_shape(g)) {
      throw DimensionError("gradient shape " + g.shape_str() + " does not match tensor " +
                           shape_str());
    }
    ensure_grad();
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g.data[i];
  }

  bool all_finite() const {
    for (const T& v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape[0], shape[1], shape[2], shape[3]);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  static TensorT random_normal(int n, int c, int h, int w, Rng& rng, T stddev = T(1)) {
    TensorT out(n, c, h, w);
    for (auto& v : out.data) v = static_cast<T>(rng.normal()) * stddev;
    return out;
  }

  static TensorT random_uniform(int n, int c, int h, int w, Rng& rng, T lo = T(0), T hi = T(1)) {
    TensorT out(n, c, h, w);
    for (auto& v : out.data) v = static_cast<T>(rng.uniform(lo, hi));
    return out;
  }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <typename T>
void check_finite(const TensorT<T>& t, const std::string& what) {
  if (!t.all_finite()) throw NumericError("non-finite values in " + what);
}

/// First flat index whose values differ, or -1 when equal. Bitwise compare.
template <typename T>
long first_mismatch(const TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) return 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    if (a.data[i] != b.data[i]) return static_cast<long>(i);
  }
  return -1;
}

template <typename T>
double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    double d = std::fabs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
    if (d > m) m = d;
  }
  return m;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
template <typename T>
double max_rel_diff(const TensorT<T>& a, const TensorT<T>& b, double floor = 1e-8) {
  double m = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    double x = static_cast<double>(a.data[i]);
    double y = static_cast<double>(b.data[i]);
    double d = std::fabs(x - y) / std::max({std::fabs(x), std::fabs(y), floor});
    if (d > m) m = d;
  }
  return m;
}

}  // namespace restp
