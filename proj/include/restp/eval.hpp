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
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "restp/checkpoint.hpp"
#include "restp/dataset.hpp"
#include "restp/error.hpp"
#include "restp/network.hpp"
#include "restp/rng.hpp"
#include "restp/svm.hpp"

namespace restp {

// ---------------------------------------------------------------------------
// Repeated stratified splits.

struct SplitSpec {
  double training_ratio = 0.1;
  int repeats = 10;
  std::uint64_t base_seed = 1;

  void validate() const {
    if (!(training_ratio > 0.0 && training_ratio < 1.0)) {
      throw ConfigError("training ratio must lie in (0,1)");
    }
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
  }
};

struct Split {
  std::vector<int> train_ids;
  std::vector<int> test_ids;
};

// Stratified split over sample labels; deterministic in (base_seed, repeat).
// Every class contributes round(ratio * size) training samples and must keep
// at least one sample on each side.
inline Split split_by_labels(const std::vector<int>& labels, int num_classes,
                             const SplitSpec& spec, int repeat_index) {
  spec.validate();
  if (repeat_index < 0) throw DomainError("repeat index must be nonnegative");
  std::vector<std::vector<int>> per_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw DomainError("label " + std::to_string(labels[i]) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
    per_class[labels[i]].push_back(static_cast<int>(i));
  }

  Rng rng(Rng::derive(spec.base_seed, static_cast<std::uint64_t>(repeat_index)));
  Split out;
  for (int cls = 0; cls < num_classes; ++cls) {
    auto& ids = per_class[cls];
    const int size = static_cast<int>(ids.size());
    const int want = static_cast<int>(std::lround(spec.training_ratio * size));
    if (want < 1 || want >= size) {
      throw ConfigError("ratio " + std::to_string(spec.training_ratio) + " leaves class " +
                        std::to_string(cls) + " (" + std::to_string(size) +
                        " samples) without both train and test samples");
    }
    rng.shuffle(ids);
    out.train_ids.insert(out.train_ids.end(), ids.begin(), ids.begin() + want);
    out.test_ids.insert(out.test_ids.end(), ids.begin() + want, ids.end());
  }
  return out;
}

inline Split split(const DatasetManifest& manifest, const SplitSpec& spec, int repeat_index) {
  std::vector<int> labels;
  labels.reserve(manifest.records.size());
  for (const auto& r : manifest.records) labels.push_back(r.label);
  return split_by_labels(labels, manifest.num_classes(), spec, repeat_index);
}

// ---------------------------------------------------------------------------
// Confusion accounting. Rows are true classes, columns predictions.

struct ConfusionMatrix {
  int n = 0;
  std::vector<std::int64_t> counts;

  explicit ConfusionMatrix(int classes = 0) : n(classes), counts(
      static_cast<std::size_t>(classes) * classes, 0) {}

  std::int64_t& at(int truth, int pred) { return counts[static_cast<std::size_t>(truth) * n + pred]; }
  std::int64_t at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * n + pred];
  }

  void add(int truth, int pred) {
    if (truth < 0 || truth >= n || pred < 0 || pred >= n) {
      throw DomainError("confusion index outside [0, " + std::to_string(n) + ")");
    }
    ++at(truth, pred);
  }

  std::int64_t row_sum(int truth) const {
    std::int64_t s = 0;
    for (int p = 0; p < n; ++p) s += at(truth, p);
    return s;
  }

  std::int64_t total() const {
    std::int64_t s = 0;
    for (std::int64_t c : counts) s += c;
    return s;
  }

  std::int64_t trace() const {
    std::int64_t s = 0;
    for (int i = 0; i < n; ++i) s += at(i, i);
    return s;
  }

  double accuracy_percent() const {
    const std::int64_t t = total();
    return t == 0 ? 0.0 : 100.0 * static_cast<double>(trace()) / static_cast<double>(t);
  }
};

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<double> accuracies;  // percent, one entry per repeat
  std::vector<ConfusionMatrix> confusions;

  double mean() const {
    double s = 0.0;
    for (double a : accuracies) s += a;
    return accuracies.empty() ? 0.0 : s / static_cast<double>(accuracies.size());
  }

  // Sample (n-1) standard deviation; zero for a single repeat.
  double stddev() const {
    const std::size_t n = accuracies.size();
    if (n < 2) return 0.0;
    const double m = mean();
    double sq = 0.0;
    for (double a : accuracies) sq += (a - m) * (a - m);
    return std::sqrt(sq / static_cast<double>(n - 1));
  }
};

inline std::string format_mean_std(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f±%.2f", mean, std);
  return buf;
}

// ---------------------------------------------------------------------------
// The repeated-split protocol, parameterized over the classifier so the
// accounting can be exercised with a label oracle. `train_and_predict`
// receives (train ids, test ids, repeat index) and returns one predicted
// class per test id, in order. A failing repeat propagates; no repeat is
// silently skipped.

template <typename TrainPredictFn>
inline EvalReport run_protocol(const std::vector<int>& labels,
                               const std::vector<std::string>& class_names,
                               const SplitSpec& spec, TrainPredictFn&& train_and_predict) {
  spec.validate();
  const int num_classes = static_cast<int>(class_names.size());
  EvalReport report;
  report.class_names = class_names;
  for (int r = 0; r < spec.repeats; ++r) {
    Split s = split_by_labels(labels, num_classes, spec, r);
    std::vector<int> pred = train_and_predict(s.train_ids, s.test_ids, r);
    if (pred.size() != s.test_ids.size()) {
      throw DimensionError("classifier returned " + std::to_string(pred.size()) +
                           " predictions for " + std::to_string(s.test_ids.size()) +
                           " test samples");
    }
    ConfusionMatrix cm(num_classes);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      cm.add(labels[s.test_ids[i]], pred[i]);
    }
    report.accuracies.push_back(cm.accuracy_percent());
    report.confusions.push_back(std::move(cm));
  }
  return report;
}

// GAP representations for every sample (eval mode, batched).
inline std::vector<FeatureVector> extract_features(Network& net, const LoadedDataset& ds) {
  if (ds.size() == 0) throw DomainError("dataset is empty");
  std::vector<FeatureVector> features(ds.size());
  const int kBatch = 32;
  for (int start = 0; start < ds.size(); start += kBatch) {
    const int b = std::min(kBatch, ds.size() - start);
    Tensor batch(b, 3, net.config.input_h, net.config.input_w);
    for (int j = 0; j < b; ++j) {
      const Tensor& img = ds.images[start + j];
      if (img.h() != net.config.input_h || img.w() != net.config.input_w) {
        throw DimensionError("dataset image " + img.shape_str() +
                             " does not match network input size");
      }
      std::copy(img.data.begin(), img.data.end(),
                batch.data.begin() + static_cast<std::size_t>(j) * img.numel());
    }
    Representation rep = net.extract_representation(batch);
    const int len = rep.values.c();
    for (int j = 0; j < b; ++j) {
      FeatureVector& f = features[start + j];
      f.values.assign(rep.values.data.begin() + static_cast<std::size_t>(j) * len,
                      rep.values.data.begin() + static_cast<std::size_t>(j + 1) * len);
      f.pathway_boundary = rep.boundary;
      f.label = ds.labels[start + j];
    }
  }
  return features;
}

// Extracts representations once, then runs the protocol with a one-vs-rest
// SVM per repeat.
inline EvalReport evaluate(Network& net, const LoadedDataset& ds, const SplitSpec& spec,
                           double svm_C = 1.0) {
  std::vector<FeatureVector> features = extract_features(net, ds);

  return run_protocol(
      ds.labels, ds.manifest.class_names, spec,
      [&](const std::vector<int>& train_ids, const std::vector<int>& test_ids, int repeat) {
        std::vector<FeatureVector> train;
        train.reserve(train_ids.size());
        for (int id : train_ids) train.push_back(features[id]);
        SvmModel model =
            svm_train(train, svm_C, Rng::derive(spec.base_seed, 0x9e3779b9ull + repeat));
        std::vector<int> pred;
        pred.reserve(test_ids.size());
        for (int id : test_ids) pred.push_back(svm_predict(model, features[id].values));
        return pred;
      });
}

// Convenience: rebuild the network recorded in a checkpoint, then evaluate.
inline EvalReport evaluate(const Checkpoint& ckpt, const LoadedDataset& ds,
                           const SplitSpec& spec, double svm_C = 1.0) {
  auto it = ckpt.metadata.find("config");
  if (it == ckpt.metadata.end()) throw FormatError("checkpoint lacks config metadata");
  NetworkConfig cfg = config_from_canonical(it->second);
  Network net(cfg);
  load_into(net, ckpt, /*strict=*/true);
  return evaluate(net, ds, spec, svm_C);
}

// ---------------------------------------------------------------------------
// Report emission: accuracy.csv, summary.txt, confusion_<r>.csv. Output is a
// pure function of the report, so identical runs emit identical bytes.

inline void report_emit(const EvalReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  {
    std::ofstream os(fs::path(out_dir) / "accuracy.csv", std::ios::binary);
    if (!os) throw IoError("cannot write accuracy.csv under " + out_dir);
    os << "repeat,acc\n";
    char line[64];
    for (std::size_t r = 0; r < report.accuracies.size(); ++r) {
      std::snprintf(line, sizeof(line), "%zu,%.6f\n", r, report.accuracies[r]);
      os << line;
    }
  }
  {
    std::ofstream os(fs::path(out_dir) / "summary.txt", std::ios::binary);
    if (!os) throw IoError("cannot write summary.txt under " + out_dir);
    os << format_mean_std(report.mean(), report.stddev()) << "\n";
  }
  for (std::size_t r = 0; r < report.confusions.size(); ++r) {
    const ConfusionMatrix& cm = report.confusions[r];
    char name[48];
    std::snprintf(name, sizeof(name), "confusion_%zu.csv", r);
    std::ofstream os(fs::path(out_dir) / name, std::ios::binary);
    if (!os) throw IoError(std::string("cannot write ") + name + " under " + out_dir);
    os << "class";
    for (const auto& cn : report.class_names) os << "," << cn;
    os << "\n";
    for (int t = 0; t < cm.n; ++t) {
      os << report.class_names[t];
      for (int p = 0; p < cm.n; ++p) os << "," << cm.at(t, p);
      os << "\n";
    }
  }
}

// Parses a confusion_<r>.csv emitted by report_emit (used for round-trips).
inline ConfusionMatrix parse_confusion_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("class", 0) != 0) {
    throw FormatError("confusion CSV header missing in " + path);
  }
  std::vector<std::vector<std::int64_t>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::int64_t> row;
    std::size_t pos = line.find(',');  // skip the class-name column
    while (pos != std::string::npos) {
      const std::size_t next = line.find(',', pos + 1);
      const std::string cell =
          line.substr(pos + 1, (next == std::string::npos ? line.size() : next) - pos - 1);
      try {
        row.push_back(std::stoll(cell));
      } catch (const std::exception&) {
        throw FormatError("unparsable confusion cell '" + cell + "' in " + path);
      }
      pos = next;
    }
    rows.push_back(std::move(row));
  }
  ConfusionMatrix cm(static_cast<int>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != rows.size()) throw FormatError("ragged confusion matrix in " + path);
    for (std::size_t p = 0; p < rows[t].size(); ++p) {
      cm.at(static_cast<int>(t), static_cast<int>(p)) = rows[t][p];
    }
  }
  return cm;
}

}  // namespace restp
