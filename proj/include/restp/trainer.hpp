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

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "restp/checkpoint.hpp"
#include "restp/dataset.hpp"
#include "restp/error.hpp"
#include "restp/network.hpp"
#include "restp/ops.hpp"
#include "restp/rng.hpp"
#include "restp/tensor.hpp"

namespace restp {

// ---------------------------------------------------------------------------
// Augmentation: quarter-turn rotations (interpolation-free), optional mirror,
// and a scale jitter recentered to the original size. Square inputs only.

struct AugmentConfig {
  std::vector<int> rotations = {0};  // degrees, each in {0, 90, 180, 270}
  bool mirror = false;
  double scale_lo = 1.0;
  double scale_hi = 1.0;

  bool identity() const {
    return !mirror && scale_lo == 1.0 && scale_hi == 1.0 &&
           (rotations.empty() || (rotations.size() == 1 && rotations[0] == 0));
  }

  void validate() const {
    for (int r : rotations) {
      if (r != 0 && r != 90 && r != 180 && r != 270) {
        throw ConfigError("rotation must be a quarter-turn, got " + std::to_string(r));
      }
    }
    if (!(scale_lo <= 1.0 && 1.0 <= scale_hi)) {
      throw ConfigError("scale range must bracket 1.0");
    }
  }
};

namespace detail {

// k quarter-turns counterclockwise in index convention: one turn sends input
// pixel (r,c) to (c, W-1-r).
template <typename T>
inline TensorT<T> rotate_quarter(const TensorT<T>& in, int k) {
  if (k == 0) return in;
  const int w = in.w();
  TensorT<T> out(in.n(), in.c(), in.h(), in.w());
  for (int n = 0; n < in.n(); ++n) {
    for (int c = 0; c < in.c(); ++c) {
      for (int r = 0; r < w; ++r) {
        for (int x = 0; x < w; ++x) {
          T v = in.at(n, c, r, x);
          switch (k) {
            case 1: out.at(n, c, x, w - 1 - r) = v; break;
            case 2: out.at(n, c, w - 1 - r, w - 1 - x) = v; break;
            default: out.at(n, c, w - 1 - x, r) = v; break;
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
inline TensorT<T> mirror_lr(const TensorT<T>& in) {
  TensorT<T> out(in.n(), in.c(), in.h(), in.w());
  for (int n = 0; n < in.n(); ++n) {
    for (int c = 0; c < in.c(); ++c) {
      for (int r = 0; r < in.h(); ++r) {
        for (int x = 0; x < in.w(); ++x) {
          out.at(n, c, r, in.w() - 1 - x) = in.at(n, c, r, x);
        }
      }
    }
  }
  return out;
}

// Recenter an s-by-s image onto a w-by-w canvas: center crop when s > w,
// replicate-pad when s < w (keeps values inside the input's range).
inline Tensor recenter(const Tensor& in, int w) {
  const int s = in.h();
  if (s == w) return in;
  Tensor out(in.n(), in.c(), w, w);
  const int off = (s - w) / 2;  // negative when padding
  for (int n = 0; n < in.n(); ++n) {
    for (int c = 0; c < in.c(); ++c) {
      for (int r = 0; r < w; ++r) {
        int sr = std::clamp(r + off, 0, s - 1);
        for (int x = 0; x < w; ++x) {
          int sx = std::clamp(x + off, 0, s - 1);
          out.at(n, c, r, x) = in.at(n, c, sr, sx);
        }
      }
    }
  }
  return out;
}

}  // namespace detail

inline Tensor augment(const Tensor& image, const AugmentConfig& cfg, Rng& rng) {
  if (image.h() != image.w()) {
    throw DimensionError("augment expects a square image, got " + image.shape_str());
  }
  cfg.validate();
  if (cfg.identity()) return image;

  Tensor out = image;
  if (!cfg.rotations.empty()) {
    const int deg = cfg.rotations[rng.next_below(static_cast<std::uint32_t>(cfg.rotations.size()))];
    out = detail::rotate_quarter(out, deg / 90);
  }
  if (cfg.mirror && rng.next_below(2) == 1) out = detail::mirror_lr(out);
  if (cfg.scale_lo < cfg.scale_hi || cfg.scale_lo != 1.0) {
    const double scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    const int w = image.w();
    const int s = std::max(1, static_cast<int>(std::lround(w * scale)));
    if (s != w) out = detail::recenter(bilinear_resize(out, s, s), w);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SGD with classical (heavy-ball) momentum: v <- m*v + g, p <- p - lr*v.

struct TrainConfig {
  int batch_size = 64;
  double momentum = 0.9;
  double lr0 = 0.01;
  int lr_step = 30;
  double lr_factor = 0.1;
  double weight_decay = 0.0;  // kept for completeness; defaults off
  int epochs = 1;
  std::vector<std::string> freeze;
  std::uint64_t seed = 1;
  AugmentConfig augment;

  void validate() const {
    if (batch_size < 1 || epochs < 0 || lr_step < 1) {
      throw ConfigError("batch_size and lr_step must be >= 1, epochs >= 0");
    }
    if (lr0 < 0.0 || lr_factor <= 0.0) {
      throw ConfigError("lr0 must be nonnegative and lr_factor positive");
    }
    augment.validate();
  }
};

inline double lr_at(const TrainConfig& cfg, int epoch) {
  if (epoch < 0) throw DomainError("epoch must be nonnegative");
  return cfg.lr0 * std::pow(cfg.lr_factor, epoch / cfg.lr_step);
}

template <typename T>
inline void sgd_step(std::vector<T>& params, const std::vector<T>& grads,
                     std::vector<T>& velocity, double lr, double momentum,
                     const std::string& name = "param") {
  if (grads.size() != params.size()) {
    throw DimensionError("gradient size mismatch for " + name);
  }
  velocity.resize(params.size(), T(0));
  for (const T& g : grads) {
    if (!std::isfinite(static_cast<double>(g))) {
      throw NumericError("non-finite gradient for " + name);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = static_cast<T>(momentum * velocity[i] + grads[i]);
    params[i] = static_cast<T>(params[i] - lr * velocity[i]);
  }
}

// ---------------------------------------------------------------------------
// Training loop. Deterministic for a fixed seed: the per-epoch Rng drives the
// shuffle and every augmentation draw in sample order.

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double train_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  Checkpoint checkpoint;  // final state, or the last good state on divergence
  bool diverged = false;
  std::string error;  // set when diverged
  int completed_epochs = 0;
};

inline void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write metrics " + path);
  os << "epoch,lr,loss,train_acc\n";
  for (const auto& r : rows) {
    char line[128];
    std::snprintf(line, sizeof(line), "%d,%.8g,%.6f,%.4f\n", r.epoch, r.lr, r.loss, r.train_acc);
    os << line;
  }
}

namespace detail {

// Per-parameter momentum applied across a network; frozen groups are skipped
// entirely. Gradients are validated before any parameter mutates, so a
// non-finite gradient aborts the whole step.
template <typename T>
inline void apply_sgd(NetworkT<T>& net, std::map<std::string, std::vector<T>>& velocity,
                      double lr, double momentum, double weight_decay) {
  net.for_each_param([&](const std::string& group, const std::string& name, TensorT<T>& t) {
    if (net.is_frozen(group) || !t.has_grad()) return;
    for (const T& g : t.grad) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericError("non-finite gradient for " + name);
      }
    }
  });
  net.for_each_param([&](const std::string& group, const std::string& name, TensorT<T>& t) {
    if (net.is_frozen(group) || !t.has_grad()) return;
    auto& v = velocity[name];
    v.resize(t.data.size(), T(0));
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      T g = t.grad[i];
      if (weight_decay != 0.0) g = static_cast<T>(g + weight_decay * t.data[i]);
      v[i] = static_cast<T>(momentum * v[i] + g);
      t.data[i] = static_cast<T>(t.data[i] - lr * v[i]);
    }
  });
}

}  // namespace detail

inline TrainResult train(Network& net, const LoadedDataset& ds, const TrainConfig& cfg,
                         const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  cfg.validate();
  if (ds.size() == 0) throw DomainError("training set is empty");
  for (int label : ds.labels) {
    if (label < 0 || label >= net.config.num_classes) {
      throw DomainError("label " + std::to_string(label) + " outside [0, " +
                        std::to_string(net.config.num_classes) + ")");
    }
  }
  net.set_freeze(std::set<std::string>(cfg.freeze.begin(), cfg.freeze.end()));

  TrainResult result;
  std::map<std::string, std::vector<float>> velocity;
  Checkpoint last_good = checkpoint_from(net);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::vector<int> order(ds.size());
    for (int i = 0; i < ds.size(); ++i) order[i] = i;
    rng.shuffle(order);

    const double lr = lr_at(cfg, epoch);
    double loss_sum = 0.0;
    int correct = 0;
    bool epoch_ok = true;

    for (int start = 0; start < ds.size() && epoch_ok; start += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, ds.size() - start);
      Tensor batch(b, 3, net.config.input_h, net.config.input_w);
      std::vector<int> labels(b);
      for (int j = 0; j < b; ++j) {
        const int idx = order[start + j];
        Tensor img = augment(ds.images[idx], cfg.augment, rng);
        if (img.h() != net.config.input_h || img.w() != net.config.input_w) {
          img = bilinear_resize(img, net.config.input_h, net.config.input_w);
        }
        std::copy(img.data.begin(), img.data.end(),
                  batch.data.begin() + static_cast<std::size_t>(j) * img.numel());
        labels[j] = ds.labels[idx];
      }

      net.zero_grad();
      NetCacheT<float> cache;
      Tensor logits = net.forward(batch, Mode::train, &cache);
      SoftmaxLossT<float> sm = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(sm.loss)) {
        result.diverged = true;
        result.error = "loss diverged at epoch " + std::to_string(epoch);
        epoch_ok = false;
        break;
      }
      loss_sum += sm.loss * b;
      for (int j = 0; j < b; ++j) correct += (sm.predicted[j] == labels[j]) ? 1 : 0;

      net.backward(cache, sm.grad);
      try {
        detail::apply_sgd(net, velocity, lr, cfg.momentum, cfg.weight_decay);
      } catch (const NumericError& e) {
        result.diverged = true;
        result.error = e.what();
        epoch_ok = false;
      }
    }

    if (!epoch_ok) break;
    result.history.push_back({epoch, lr, loss_sum / ds.size(),
                              static_cast<double>(correct) / ds.size()});
    if (on_epoch) on_epoch(result.history.back());
    result.completed_epochs = epoch + 1;
    last_good = checkpoint_from(net);
    last_good.metadata["epoch"] = std::to_string(epoch + 1);
    last_good.metadata["seed"] = std::to_string(cfg.seed);
  }

  if (result.diverged) load_into(net, last_good, /*strict=*/true);
  result.checkpoint = std::move(last_good);
  result.checkpoint.metadata["seed"] = std::to_string(cfg.seed);
  if (result.checkpoint.metadata.find("epoch") == result.checkpoint.metadata.end()) {
    result.checkpoint.metadata["epoch"] = "0";
  }
  return result;
}

}  // namespace restp
