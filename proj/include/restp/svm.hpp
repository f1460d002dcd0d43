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
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "restp/binio.hpp"
#include "restp/error.hpp"
#include "restp/rng.hpp"

namespace restp {

// GAP representation with an optional source label; pathway_boundary is the
// index where the second pathway's channels begin (0 = single pathway).
struct FeatureVector {
  std::vector<float> values;
  int pathway_boundary = 0;
  int label = -1;
};

struct SvmClass {
  int class_id = 0;
  float bias = 0.0f;
  std::vector<float> weights;
};

// One-vs-rest linear SVM. Classes are kept in ascending id order, which the
// tie rule of svm_predict relies on.
struct SvmModel {
  std::vector<SvmClass> classes;
  double C = 1.0;

  int dim() const { return classes.empty() ? 0 : static_cast<int>(classes[0].weights.size()); }
  int num_classes() const { return static_cast<int>(classes.size()); }
};

// Returns false (leaving the vector untouched) when the input is all-zero;
// callers that care surface the warning.
inline bool l2_normalize(std::vector<float>& v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (sq == 0.0) return false;
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
  return true;
}

// Primal objective of the bias-augmented formulation for one binary problem:
// 0.5*(|w|^2 + b^2) + C * sum_i hinge(y_i * (w.x_i + b)).
inline double svm_primal_objective(const std::vector<float>& w, float bias,
                                   const std::vector<FeatureVector>& data, int positive_class,
                                   double C) {
  double obj = 0.5 * static_cast<double>(bias) * bias;
  for (float x : w) obj += 0.5 * static_cast<double>(x) * x;
  for (const auto& f : data) {
    const double y = (f.label == positive_class) ? 1.0 : -1.0;
    double score = bias;
    for (std::size_t d = 0; d < w.size(); ++d) {
      score += static_cast<double>(w[d]) * f.values[d];
    }
    obj += C * std::max(0.0, 1.0 - y * score);
  }
  return obj;
}

namespace detail {

// Dual coordinate descent on the L2-regularized L1-hinge dual for one binary
// problem. The bias rides along as a constant-1 feature, so it shares the
// regularizer. Deterministic: the permutation stream is seeded per class.
inline SvmClass svm_train_binary(const std::vector<FeatureVector>& data, int positive_class,
                                 double C, std::uint64_t seed) {
  const int n = static_cast<int>(data.size());
  const int d = static_cast<int>(data[0].values.size());
  std::vector<double> w(d + 1, 0.0);  // slot d is the bias feature
  std::vector<double> alpha(n, 0.0);
  std::vector<double> qii(n);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    double sq = 1.0;  // augmented constant feature
    for (float v : data[i].values) sq += static_cast<double>(v) * v;
    qii[i] = sq;
    y[i] = (data[i].label == positive_class) ? 1.0 : -1.0;
  }

  Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(positive_class) + 0x5653u));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  const double kTol = 1e-4;
  const int kMaxEpochs = 1000;
  for (int epoch = 0; epoch < kMaxEpochs; ++epoch) {
    rng.shuffle(order);
    double max_violation = 0.0;
    for (int idx : order) {
      double g = -1.0;
      const auto& x = data[idx].values;
      double dot = w[d];
      for (int k = 0; k < d; ++k) dot += w[k] * x[k];
      g += y[idx] * dot;

      double pg = g;
      if (alpha[idx] <= 0.0) {
        pg = std::min(g, 0.0);
      } else if (alpha[idx] >= C) {
        pg = std::max(g, 0.0);
      }
      max_violation = std::max(max_violation, std::abs(pg));
      if (pg == 0.0) continue;

      const double prev = alpha[idx];
      alpha[idx] = std::clamp(prev - g / qii[idx], 0.0, C);
      const double delta = (alpha[idx] - prev) * y[idx];
      if (delta != 0.0) {
        for (int k = 0; k < d; ++k) w[k] += delta * x[k];
        w[d] += delta;
      }
    }
    if (max_violation < kTol) break;
  }

  SvmClass out;
  out.class_id = positive_class;
  out.bias = static_cast<float>(w[d]);
  out.weights.resize(d);
  for (int k = 0; k < d; ++k) out.weights[k] = static_cast<float>(w[k]);
  return out;
}

}  // namespace detail

inline SvmModel svm_train(const std::vector<FeatureVector>& data, double C = 1.0,
                          std::uint64_t seed = 1) {
  if (data.empty()) throw DomainError("svm_train needs at least one sample");
  if (C <= 0.0) throw ConfigError("SVM penalty C must be positive");
  std::set<int> class_ids;
  const std::size_t dim = data[0].values.size();
  for (const auto& f : data) {
    if (f.label < 0) throw DomainError("svm_train requires nonnegative labels");
    if (f.values.size() != dim) {
      throw DimensionError("inconsistent feature lengths in training set");
    }
    class_ids.insert(f.label);
  }
  if (class_ids.size() < 2) {
    throw DomainError("svm_train needs at least 2 classes, found " +
                      std::to_string(class_ids.size()));
  }

  SvmModel model;
  model.C = C;
  std::vector<int> ids(class_ids.begin(), class_ids.end());
  model.classes.resize(ids.size());
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < static_cast<int>(ids.size()); ++k) {
    model.classes[k] = detail::svm_train_binary(data, ids[k], C, seed);
  }
  return model;
}

inline double svm_score(const SvmClass& cls, const std::vector<float>& feature) {
  double s = cls.bias;
  for (std::size_t d = 0; d < cls.weights.size(); ++d) {
    s += static_cast<double>(cls.weights[d]) * feature[d];
  }
  return s;
}

inline int svm_predict(const SvmModel& model, const std::vector<float>& feature) {
  if (model.classes.empty()) throw DomainError("empty SVM model");
  if (static_cast<int>(feature.size()) != model.dim()) {
    throw DimensionError("feature length " + std::to_string(feature.size()) +
                         " does not match model dimension " + std::to_string(model.dim()));
  }
  int best = model.classes[0].class_id;
  double best_score = svm_score(model.classes[0], feature);
  for (std::size_t k = 1; k < model.classes.size(); ++k) {
    const double s = svm_score(model.classes[k], feature);
    if (s > best_score) {  // strict: ties keep the lowest class id
      best_score = s;
      best = model.classes[k].class_id;
    }
  }
  return best;
}

inline std::vector<int> svm_predict_batch(const SvmModel& model,
                                          const std::vector<FeatureVector>& data) {
  std::vector<int> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = svm_predict(model, data[i].values);
  return out;
}

// ---------------------------------------------------------------------------
// Model file: consecutive per-class records (u32 class id, f32 bias, D f32
// weights), little-endian, no header. The feature dimension comes from the
// caller; the class count falls out of the file size.

inline void write_svm_model(const std::string& path, const SvmModel& model) {
  std::ofstream os = open_out_binary(path);
  for (const auto& cls : model.classes) {
    write_u32(os, static_cast<std::uint32_t>(cls.class_id));
    write_f32(os, cls.bias);
    write_f32_span(os, cls.weights.data(), cls.weights.size());
  }
  if (!os) throw IoError("failed writing SVM model " + path);
}

// ---------------------------------------------------------------------------
// Feature files. CSV is the labeled interchange form; the RTPT tensor format
// (N x D x 1 x 1) carries values only.

inline void write_features_csv(const std::string& path, const std::vector<FeatureVector>& feats) {
  if (feats.empty()) throw DomainError("refusing to write an empty feature file");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot create feature file " + path);
  os << "label";
  for (std::size_t d = 0; d < feats[0].values.size(); ++d) os << ",f" << d;
  os << "\n";
  char cell[32];
  for (const auto& f : feats) {
    os << f.label;
    for (float v : f.values) {
      std::snprintf(cell, sizeof(cell), ",%.9g", static_cast<double>(v));
      os << cell;
    }
    os << "\n";
  }
  if (!os) throw IoError("failed writing feature file " + path);
}

inline std::vector<FeatureVector> read_features_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open feature file " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("label", 0) != 0) {
    throw FormatError("feature file must start with a 'label,f0,...' header: " + path);
  }
  std::vector<FeatureVector> feats;
  std::size_t dim = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    FeatureVector f;
    std::size_t pos = 0;
    bool first = true;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      const std::string cell = line.substr(pos, comma - pos);
      try {
        if (first) {
          f.label = std::stoi(cell);
          first = false;
        } else {
          f.values.push_back(std::stof(cell));
        }
      } catch (const std::exception&) {
        throw FormatError("unparsable feature cell '" + cell + "' in " + path);
      }
      pos = comma + 1;
    }
    if (feats.empty()) {
      dim = f.values.size();
      if (dim == 0) throw FormatError("feature rows need at least one value: " + path);
    } else if (f.values.size() != dim) {
      throw FormatError("ragged feature row in " + path);
    }
    feats.push_back(std::move(f));
  }
  if (feats.empty()) throw FormatError("feature file has no rows: " + path);
  return feats;
}

inline SvmModel read_svm_model(const std::string& path, int dim) {
  if (dim <= 0) throw ConfigError("model dimension must be positive");
  std::ifstream is = open_in_binary(path);
  is.seekg(0, std::ios::end);
  const std::streamoff size = is.tellg();
  is.seekg(0, std::ios::beg);
  const std::streamoff record = 8 + 4 * static_cast<std::streamoff>(dim);
  if (size <= 0 || size % record != 0) {
    throw FormatError("SVM model size " + std::to_string(size) +
                      " is not a multiple of the record size for dimension " +
                      std::to_string(dim));
  }

  SvmModel model;
  const int k = static_cast<int>(size / record);
  model.classes.resize(k);
  for (auto& cls : model.classes) {
    cls.class_id = static_cast<int>(read_u32(is, "svm class id"));
    cls.bias = read_f32(is, "svm bias");
    cls.weights.resize(dim);
    read_f32_span(is, cls.weights.data(), cls.weights.size(), "svm weights");
  }
  std::sort(model.classes.begin(), model.classes.end(),
            [](const SvmClass& a, const SvmClass& b) { return a.class_id < b.class_id; });
  return model;
}

}  // namespace restp
