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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "restp/rng.hpp"
#include "restp/svm.hpp"

using namespace restp;

namespace {

FeatureVector fv(std::vector<float> values, int label) {
  FeatureVector f;
  f.values = std::move(values);
  f.label = label;
  return f;
}

// Two well-separated Gaussian blobs in 2-D.
std::vector<FeatureVector> blobs(int per_class, double gap, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FeatureVector> data;
  for (int cls = 0; cls < 2; ++cls) {
    const double cx = cls == 0 ? -gap / 2 : gap / 2;
    for (int i = 0; i < per_class; ++i) {
      data.push_back(fv({static_cast<float>(cx + 0.3 * rng.normal()),
                         static_cast<float>(0.3 * rng.normal())},
                        cls));
    }
  }
  return data;
}

// Independent oracle: projected subgradient descent on the bias-augmented
// primal objective. The objective is 1-strongly convex, so eta_t = 1/(t+2)
// converges; the best iterate's objective is tracked.
double subgradient_best_objective(const std::vector<FeatureVector>& data, int positive_class,
                                  double C, int iters) {
  const std::size_t d = data[0].values.size();
  std::vector<float> w(d, 0.0f);
  float bias = 0.0f;
  std::vector<double> wd(d, 0.0);
  double bd = 0.0;
  double best = svm_primal_objective(w, bias, data, positive_class, C);
  for (int t = 0; t < iters; ++t) {
    std::vector<double> g(wd);
    double gb = bd;
    for (const auto& f : data) {
      const double y = (f.label == positive_class) ? 1.0 : -1.0;
      double score = bd;
      for (std::size_t k = 0; k < d; ++k) score += wd[k] * f.values[k];
      if (y * score < 1.0) {
        for (std::size_t k = 0; k < d; ++k) g[k] -= C * y * f.values[k];
        gb -= C * y;
      }
    }
    const double eta = 1.0 / (t + 2.0);
    for (std::size_t k = 0; k < d; ++k) wd[k] -= eta * g[k];
    bd -= eta * gb;
    for (std::size_t k = 0; k < d; ++k) w[k] = static_cast<float>(wd[k]);
    bias = static_cast<float>(bd);
    best = std::min(best, svm_primal_objective(w, bias, data, positive_class, C));
  }
  return best;
}

}  // namespace

TEST_CASE("two symmetric points give the sign decision along the axis") {
  std::vector<FeatureVector> data = {fv({1.0f, 0.0f}, 1), fv({-1.0f, 0.0f}, 0)};
  SvmModel model = svm_train(data, 1.0, 3);
  // Decision boundary at x0 = 0: the class-1 score dominates iff x0 > 0.
  CHECK(svm_predict(model, {0.5f, 0.0f}) == 1);
  CHECK(svm_predict(model, {-0.5f, 0.0f}) == 0);
  CHECK(svm_predict(model, {2.0f, 3.0f}) == 1);
  // By symmetry the boundary sits at x0 = 0: scores there tie, and the
  // class-1 binary problem has (near-)zero bias.
  const auto& c1 = model.classes[1];
  CHECK(std::abs(c1.bias) < 1e-3f);
  CHECK(std::abs(c1.weights[1]) < 1e-3f);
  CHECK(c1.weights[0] > 0.1f);
}

TEST_CASE("objective matches a projected-subgradient oracle within 1e-3") {
  std::vector<FeatureVector> data = blobs(10, 4.0, 91);  // 20 points, separable
  SvmModel model = svm_train(data, 1.0, 7);
  for (int cls = 0; cls < 2; ++cls) {
    const auto& c = model.classes[cls];
    const double dcd = svm_primal_objective(c.weights, c.bias, data, cls, 1.0);
    const double oracle = subgradient_best_objective(data, cls, 1.0, 200000);
    INFO("class " << cls << " dcd=" << dcd << " oracle=" << oracle);
    CHECK(std::abs(dcd - oracle) / std::max(oracle, 1e-12) <= 1e-3);
  }
}

TEST_CASE("separable training data is classified perfectly") {
  std::vector<FeatureVector> data = blobs(10, 4.0, 17);
  SvmModel model = svm_train(data, 1.0, 5);
  for (const auto& f : data) {
    CHECK(svm_predict(model, f.values) == f.label);
  }
}

TEST_CASE("duplicating every point with C halved keeps the decision") {
  std::vector<FeatureVector> data = blobs(8, 3.0, 23);
  std::vector<FeatureVector> doubled = data;
  doubled.insert(doubled.end(), data.begin(), data.end());

  SvmModel base = svm_train(data, 1.0, 9);
  SvmModel halved = svm_train(doubled, 0.5, 9);

  // The objectives coincide up to the duplicated hinge sum, so the minimizers
  // agree; weights match to solver tolerance and decisions match exactly on a
  // probe grid.
  for (int cls = 0; cls < 2; ++cls) {
    for (std::size_t d = 0; d < 2; ++d) {
      CHECK_THAT(halved.classes[cls].weights[d],
                 Catch::Matchers::WithinAbs(base.classes[cls].weights[d], 5e-3));
    }
  }
  for (float x = -3.0f; x <= 3.0f; x += 0.37f) {
    for (float y = -2.0f; y <= 2.0f; y += 0.41f) {
      if (std::abs(x) < 0.2f) continue;  // skip the boundary neighborhood
      CHECK(svm_predict(base, {x, y}) == svm_predict(halved, {x, y}));
    }
  }
}

TEST_CASE("svm_train rejects degenerate inputs") {
  CHECK_THROWS_AS(svm_train({}, 1.0, 1), DomainError);
  std::vector<FeatureVector> one_class = {fv({1.0f}, 0), fv({2.0f}, 0)};
  CHECK_THROWS_AS(svm_train(one_class, 1.0, 1), DomainError);
  std::vector<FeatureVector> ragged = {fv({1.0f}, 0), fv({2.0f, 3.0f}, 1)};
  CHECK_THROWS_AS(svm_train(ragged, 1.0, 1), DimensionError);
  std::vector<FeatureVector> ok = {fv({1.0f}, 0), fv({2.0f}, 1)};
  CHECK_THROWS_AS(svm_train(ok, 0.0, 1), ConfigError);
}

TEST_CASE("prediction ties break toward the lowest class id") {
  SvmModel model;
  model.classes.resize(3);
  for (int k = 0; k < 3; ++k) {
    model.classes[k].class_id = k;
    model.classes[k].weights = {1.0f, 0.0f};
    model.classes[k].bias = 0.0f;
  }
  model.classes[2].bias = 0.5f;  // unique winner when features are zero
  CHECK(svm_predict(model, {0.0f, 0.0f}) == 2);
  model.classes[2].bias = 0.0f;  // full three-way tie
  CHECK(svm_predict(model, {0.0f, 0.0f}) == 0);
  model.classes[1].bias = 0.25f;
  CHECK(svm_predict(model, {0.0f, 0.0f}) == 1);

  CHECK_THROWS_AS(svm_predict(model, {1.0f, 2.0f, 3.0f}), DimensionError);
}

TEST_CASE("batch prediction equals per-sample prediction") {
  std::vector<FeatureVector> data = blobs(6, 3.0, 41);
  SvmModel model = svm_train(data, 1.0, 11);
  std::vector<int> batch = svm_predict_batch(model, data);
  REQUIRE(batch.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(batch[i] == svm_predict(model, data[i].values));
  }
}

TEST_CASE("prediction is invariant under common positive rescaling") {
  std::vector<FeatureVector> data = blobs(6, 3.0, 43);
  SvmModel model = svm_train(data, 1.0, 13);
  SvmModel scaled = model;
  for (auto& c : scaled.classes) {
    for (float& w : c.weights) w *= 7.5f;
    c.bias *= 7.5f;
  }
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> probe = {static_cast<float>(rng.normal() * 2),
                                static_cast<float>(rng.normal() * 2)};
    CHECK(svm_predict(model, probe) == svm_predict(scaled, probe));
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  std::vector<FeatureVector> data = blobs(10, 2.0, 59);
  SvmModel a = svm_train(data, 1.0, 21);
  SvmModel b = svm_train(data, 1.0, 21);
  REQUIRE(a.classes.size() == b.classes.size());
  for (std::size_t k = 0; k < a.classes.size(); ++k) {
    CHECK(a.classes[k].bias == b.classes[k].bias);
    for (std::size_t d = 0; d < a.classes[k].weights.size(); ++d) {
      CHECK(a.classes[k].weights[d] == b.classes[k].weights[d]);
    }
  }
}

TEST_CASE("one-vs-rest is unaffected by relabeling among the rest") {
  // Three classes; class 0's binary problem sees classes 1 and 2 only as
  // "rest", so swapping their labels must not move class 0's weights.
  Rng rng(67);
  std::vector<FeatureVector> data;
  for (int cls = 0; cls < 3; ++cls) {
    for (int i = 0; i < 6; ++i) {
      data.push_back(fv({static_cast<float>(cls + 0.2 * rng.normal()),
                         static_cast<float>(0.2 * rng.normal())},
                        cls));
    }
  }
  std::vector<FeatureVector> relabeled = data;
  for (auto& f : relabeled) {
    if (f.label == 1) {
      f.label = 2;
    } else if (f.label == 2) {
      f.label = 1;
    }
  }
  SvmModel a = svm_train(data, 1.0, 31);
  SvmModel b = svm_train(relabeled, 1.0, 31);
  for (std::size_t d = 0; d < 2; ++d) {
    CHECK(a.classes[0].weights[d] == b.classes[0].weights[d]);
  }
  CHECK(a.classes[0].bias == b.classes[0].bias);
}

TEST_CASE("l2_normalize behaves on unit, zero, and random vectors") {
  std::vector<float> unit = {1.0f, 0.0f, 0.0f};
  REQUIRE(l2_normalize(unit));
  CHECK(unit[0] == 1.0f);
  CHECK(unit[1] == 0.0f);

  std::vector<float> zero = {0.0f, 0.0f};
  CHECK_FALSE(l2_normalize(zero));
  CHECK(zero[0] == 0.0f);

  Rng rng(5);
  std::vector<float> v(17);
  for (auto& x : v) x = static_cast<float>(rng.normal() * 3);
  REQUIRE(l2_normalize(v));
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  CHECK_THAT(std::sqrt(sq), Catch::Matchers::WithinAbs(1.0, 1e-6));
}

TEST_CASE("model files round-trip through the headerless record format") {
  std::vector<FeatureVector> data = blobs(5, 3.0, 71);
  SvmModel model = svm_train(data, 1.0, 19);
  const std::string path = (std::filesystem::temp_directory_path() / "restp_svm.bin").string();
  write_svm_model(path, model);

  SvmModel back = read_svm_model(path, model.dim());
  REQUIRE(back.classes.size() == model.classes.size());
  for (std::size_t k = 0; k < model.classes.size(); ++k) {
    CHECK(back.classes[k].class_id == model.classes[k].class_id);
    CHECK(back.classes[k].bias == model.classes[k].bias);
    for (std::size_t d = 0; d < model.classes[k].weights.size(); ++d) {
      CHECK(back.classes[k].weights[d] == model.classes[k].weights[d]);
    }
  }
  // File size must be an exact multiple of the per-class record.
  CHECK_THROWS_AS(read_svm_model(path, model.dim() + 1), FormatError);
}

TEST_CASE("feature CSV round-trips labels and values") {
  std::vector<FeatureVector> feats = {fv({1.5f, -2.25f, 3e-7f}, 0), fv({0.0f, 7.0f, -1.0f}, 4)};
  const std::string path =
      (std::filesystem::temp_directory_path() / "restp_feats.csv").string();
  write_features_csv(path, feats);
  std::vector<FeatureVector> back = read_features_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].label == 0);
  CHECK(back[1].label == 4);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t d = 0; d < 3; ++d) {
      CHECK(back[i].values[d] == feats[i].values[d]);
    }
  }
  std::ofstream(path) << "f0,f1\n1,2\n";
  CHECK_THROWS_AS(read_features_csv(path), FormatError);
}
